#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "mib/motion.hpp"

namespace mib {

enum class Split { kTrain, kTest };

const std::vector<std::string>& train_subjects();  // S1 S5 S6 S7 S8
const std::vector<std::string>& test_subjects();   // S9 S11
const std::vector<std::string>& subjects_for(Split split);

struct CorpusItem {
  std::string subject;
  std::string action;
  MotionSequence sequence;
};

// All sequences share one pose dimension; items are kept sorted by
// (subject, action) so downstream order never depends on directory
// enumeration.
struct Corpus {
  std::vector<CorpusItem> items;
  Split split = Split::kTrain;

  int dim() const { return items.empty() ? 0 : items.front().sequence.dim(); }
};

struct LoadStats {
  int loaded = 0;
  int skipped_short = 0;
};

// Loads <root>/<subject>/<subject>_<action>.motion for the split's
// subjects. Sequences shorter than min_length are skipped and counted.
// Throws DataError on a missing root or malformed file.
Corpus load_corpus(const std::string& root, Split split, int min_length = 125,
                   LoadStats* stats = nullptr);

// Synthetic desk-scale corpus: per-dimension sums of random sinusoids on a
// random constant offset, plus a slow drift on the root joint dims. The
// `amplitude` field is the master scale of everything time-varying, so
// amplitude 0 yields constant sequences.
struct SynthConfig {
  int harmonics = 3;
  double amplitude = 0.25;       // motion scale (m)
  double min_frequency_hz = 0.15;
  double max_frequency_hz = 1.2;
  double drift_rate = 0.2;       // root drift speed, amplitudes per second
  double base_offset = 0.5;      // constant per-dim offset drawn in +-this
  double frame_rate_hz = 50.0;
};

// Deterministic for a given seed: identical seeds give byte-identical
// corpora. Subjects cycle through the split's subject labels.
Corpus generate_synthetic_corpus(const SkeletonSpec& spec, int n_sequences,
                                 int frame_count, std::uint64_t seed,
                                 Split split = Split::kTrain,
                                 const SynthConfig& config = SynthConfig{});

// Upper bound on |x_j(t+1) - x_j(t)| for any dimension j of any sequence
// produced with this config.
double synthetic_step_bound(const SynthConfig& config);

// Per-dimension standardization fitted over all frames of a corpus.
// Population standard deviation, floor-clamped so apply/invert stays a
// bijection on constant dimensions.
struct Normalizer {
  static constexpr double kStdFloor = 1e-6;
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};

Normalizer fit_normalizer(const Corpus& corpus);
MotionSequence apply_normalizer(const Normalizer& n, const MotionSequence& s);
MotionSequence invert_normalizer(const Normalizer& n, const MotionSequence& s);

// Two-line text file: means line, stds line.
void write_normalizer(const std::string& path, const Normalizer& n);
Normalizer read_normalizer(const std::string& path);

// A task cut out of a corpus sequence, with provenance for reports.
struct WindowTask {
  InterpolationTask task;
  std::string subject;
  std::string action;
  int window_start = 0;  // 0-based frame offset of the window
};

// Sliding windows of length 2*condition_length + gap_length over every
// sequence, split at (t_s = condition_length, t_e = condition_length +
// gap_length + 1). Output is ordered by (subject, action, window_start).
std::vector<WindowTask> make_windows(const Corpus& corpus,
                                     int condition_length, int gap_length,
                                     int stride);

}  // namespace mib
