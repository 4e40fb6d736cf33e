#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mib/data.hpp"
#include "mib/model.hpp"
#include "mib/motion.hpp"

namespace mib {

// K gap fills for one task, in the original (denormalized) pose space.
// seeds[k] is the derived stream seed that produced samples[k].
struct SampleSet {
  std::vector<MotionSequence> samples;
  std::vector<std::uint64_t> seeds;

  int k() const { return static_cast<int>(samples.size()); }
};

// Draws k prior latents and decodes each into a gap fill. Conditions are
// normalized on the way in and samples denormalized on the way out, so the
// task is given in raw pose space. Sample i uses the derived seed
// mix_seed(seed, i), making every sample reproducible in isolation.
SampleSet interpolate(const ModelParams& params, const Normalizer& normalizer,
                      const InterpolationTask& task, int k, std::uint64_t seed);

// Average displacement error: the per-frame mean pose distance to the
// ground truth, minimized over the samples (closest-sample error).
double ade(const std::vector<MotionSequence>& samples,
           const MotionSequence& ground_truth);

// Average pairwise distance between flattened samples over ordered pairs:
//   (1 / (k (k-1))) * sum_{a != b} || flatten(x_a) - flatten(x_b) ||_2
double apd(const std::vector<MotionSequence>& samples);

// How far a fill is from its anchors: distance from the last start pose to
// the fill's first frame plus distance from the fill's last frame to the
// first end pose.
double boundary_gap(const InterpolationTask& task, const MotionSequence& fill);

struct TaskMetrics {
  std::string subject;
  std::string action;
  int window_start = 0;
  double ade = 0.0;
  double apd = 0.0;
  double boundary_gap = 0.0;  // mean over the k samples
};

struct EvaluationReport {
  double ade = 0.0;
  double apd = 0.0;
  double mean_boundary_gap = 0.0;
  int n_tasks = 0;
  int k = 0;
  std::vector<TaskMetrics> per_task;
};

// Cuts the corpus into non-overlapping windows (stride = window length),
// interpolates each with k samples and averages the metrics. Task i uses
// the derived seed mix_seed(seed, i). Requires k >= 2 so the pairwise
// diversity metric is defined.
EvaluationReport evaluate(const ModelParams& params,
                          const Normalizer& normalizer,
                          const ModelConfig& config, const Corpus& corpus,
                          int k, std::uint64_t seed);

// Single-line summary: header row then one data row
// (ade,apd,mean_boundary_gap,n_tasks,k).
void write_report_csv(const std::string& path, const EvaluationReport& report);

// One row per task: subject,action,window_start,ade,apd,boundary_gap.
void write_per_task_csv(const std::string& path,
                        const EvaluationReport& report);

}  // namespace mib
