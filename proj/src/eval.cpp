#include "mib/eval.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "mib/errors.hpp"
#include "mib/log.hpp"
#include "mib/rng.hpp"
#include "mib/text.hpp"

namespace mib {

SampleSet interpolate(const ModelParams& params, const Normalizer& normalizer,
                      const InterpolationTask& task, int k,
                      std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("interpolate needs k >= 1");
  if (task.gap_length < 1)
    throw std::invalid_argument("interpolate needs a non-empty gap");
  const int d = params_pose_dim(params);
  if (task.start.dim() != d || task.end.dim() != d)
    throw std::invalid_argument("task pose dimension does not match model");
  if (normalizer.mean.size() != d)
    throw std::invalid_argument("normalizer dimension does not match model");

  const MotionSequence start_n = apply_normalizer(normalizer, task.start);
  const MotionSequence end_n = apply_normalizer(normalizer, task.end);
  const Eigen::VectorXd cond = encode_condition(params, start_n, end_n);
  const Pose last_start = start_n.pose(start_n.length() - 1);
  const int latent = params_latent_size(params);

  SampleSet out;
  out.samples.reserve(static_cast<std::size_t>(k));
  out.seeds.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const std::uint64_t sample_seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(sample_seed);
    const LatentSample z = sample_prior(latent, rng);
    MotionSequence fill = decode(params, z, cond, last_start, task.gap_length,
                                 task.start.frame_rate_hz);
    out.samples.push_back(invert_normalizer(normalizer, fill));
    out.seeds.push_back(sample_seed);
  }
  return out;
}

double ade(const std::vector<MotionSequence>& samples,
           const MotionSequence& ground_truth) {
  if (samples.empty()) throw std::invalid_argument("ade needs at least one sample");
  const int T = ground_truth.length();
  if (T < 1) throw std::invalid_argument("ade needs a non-empty ground truth");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    if (s.length() != T || s.dim() != ground_truth.dim())
      throw std::invalid_argument("sample geometry does not match ground truth");
    double acc = 0.0;
    for (int t = 0; t < T; ++t)
      acc += pose_distance(s.pose(t), ground_truth.pose(t));
    best = std::min(best, acc / static_cast<double>(T));
  }
  return best;
}

double apd(const std::vector<MotionSequence>& samples) {
  const int k = static_cast<int>(samples.size());
  if (k < 2) throw std::invalid_argument("apd needs at least two samples");
  std::vector<Eigen::VectorXd> flat;
  flat.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.length() != samples.front().length() || s.dim() != samples.front().dim())
      throw std::invalid_argument("apd samples must share one geometry");
    flat.push_back(flatten_motion(s));
  }
  double acc = 0.0;
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      if (a != b) acc += (flat[a] - flat[b]).norm();
  return acc / (static_cast<double>(k) * static_cast<double>(k - 1));
}

double boundary_gap(const InterpolationTask& task, const MotionSequence& fill) {
  if (fill.length() < 1) throw std::invalid_argument("empty fill");
  const Pose anchor_start = task.start.pose(task.start.length() - 1);
  const Pose anchor_end = task.end.pose(0);
  return pose_distance(anchor_start, fill.pose(0)) +
         pose_distance(fill.pose(fill.length() - 1), anchor_end);
}

EvaluationReport evaluate(const ModelParams& params,
                          const Normalizer& normalizer,
                          const ModelConfig& config, const Corpus& corpus,
                          int k, std::uint64_t seed) {
  config.validate();
  if (k < 2) throw std::invalid_argument("evaluate needs k >= 2");
  if (corpus.items.empty()) throw DataError("evaluation corpus is empty");
  if (corpus.dim() != config.d)
    throw DataError("corpus pose dimension " + std::to_string(corpus.dim()) +
                    " does not match configured d=" + std::to_string(config.d));

  const std::vector<WindowTask> windows =
      make_windows(corpus, config.condition_length, config.gap_length,
                   config.window_length());
  if (windows.empty())
    throw DataError("evaluation corpus yields no windows: need sequences of "
                    "at least " + std::to_string(config.window_length()) +
                    " frames");

  EvaluationReport report;
  report.k = k;
  report.n_tasks = static_cast<int>(windows.size());
  report.per_task.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const WindowTask& w = windows[i];
    if (!w.task.ground_truth.has_value())
      throw DataError("evaluation window lacks ground truth");
    const SampleSet set =
        interpolate(params, normalizer, w.task, k, mix_seed(seed, i));
    TaskMetrics m;
    m.subject = w.subject;
    m.action = w.action;
    m.window_start = w.window_start;
    m.ade = ade(set.samples, *w.task.ground_truth);
    m.apd = apd(set.samples);
    double gap_acc = 0.0;
    for (const auto& s : set.samples) gap_acc += boundary_gap(w.task, s);
    m.boundary_gap = gap_acc / static_cast<double>(set.samples.size());
    report.ade += m.ade;
    report.apd += m.apd;
    report.mean_boundary_gap += m.boundary_gap;
    report.per_task.push_back(std::move(m));
    log_debug("evaluated window " + std::to_string(i + 1) + "/" +
              std::to_string(windows.size()));
  }
  const double n = static_cast<double>(report.n_tasks);
  report.ade /= n;
  report.apd /= n;
  report.mean_boundary_gap /= n;
  return report;
}

void write_report_csv(const std::string& path, const EvaluationReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << "ade,apd,mean_boundary_gap,n_tasks,k\n";
  out << format_double(report.ade) << "," << format_double(report.apd) << ","
      << format_double(report.mean_boundary_gap) << "," << report.n_tasks
      << "," << report.k << "\n";
  if (!out) throw DataError(path + ": write failed");
}

void write_per_task_csv(const std::string& path,
                        const EvaluationReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << "subject,action,window_start,ade,apd,boundary_gap\n";
  for (const auto& m : report.per_task)
    out << m.subject << "," << m.action << "," << m.window_start << ","
        << format_double(m.ade) << "," << format_double(m.apd) << ","
        << format_double(m.boundary_gap) << "\n";
  if (!out) throw DataError(path + ": write failed");
}

}  // namespace mib
