#include "mib/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "mib/errors.hpp"
#include "mib/log.hpp"
#include "mib/rng.hpp"
#include "mib/text.hpp"

namespace fs = std::filesystem;

namespace mib {

const std::vector<std::string>& train_subjects() {
  static const std::vector<std::string> v = {"S1", "S5", "S6", "S7", "S8"};
  return v;
}

const std::vector<std::string>& test_subjects() {
  static const std::vector<std::string> v = {"S9", "S11"};
  return v;
}

const std::vector<std::string>& subjects_for(Split split) {
  return split == Split::kTrain ? train_subjects() : test_subjects();
}

Corpus load_corpus(const std::string& root, Split split, int min_length,
                   LoadStats* stats) {
  if (!fs::is_directory(root)) {
    throw DataError("data directory not found: " + root);
  }
  Corpus corpus;
  corpus.split = split;
  LoadStats local;
  for (const auto& subject : subjects_for(split)) {
    const fs::path dir = fs::path(root) / subject;
    if (!fs::is_directory(dir)) continue;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const fs::path& p = entry.path();
      if (p.extension() != ".motion") continue;
      const std::string stem = p.stem().string();
      const std::string prefix = subject + "_";
      if (stem.rfind(prefix, 0) != 0) continue;
      const std::string action = stem.substr(prefix.size());
      MotionSequence seq = read_motion_file(p.string());
      if (seq.length() < min_length) {
        ++local.skipped_short;
        continue;
      }
      if (corpus.dim() != 0 && seq.dim() != corpus.dim()) {
        throw DataError("pose dimension mismatch in " + p.string() + ": " +
                        std::to_string(seq.dim()) + " vs corpus " +
                        std::to_string(corpus.dim()));
      }
      corpus.items.push_back({subject, action, std::move(seq)});
      ++local.loaded;
    }
  }
  std::sort(corpus.items.begin(), corpus.items.end(),
            [](const CorpusItem& a, const CorpusItem& b) {
              return std::tie(a.subject, a.action) <
                     std::tie(b.subject, b.action);
            });
  if (local.skipped_short > 0) {
    log_info("load_corpus: skipped " + std::to_string(local.skipped_short) +
             " sequence(s) shorter than " + std::to_string(min_length) +
             " frames");
  }
  if (corpus.items.empty()) {
    log_info("load_corpus: no usable sequences under " + root);
  }
  if (stats != nullptr) *stats = local;
  return corpus;
}

Corpus generate_synthetic_corpus(const SkeletonSpec& spec, int n_sequences,
                                 int frame_count, std::uint64_t seed,
                                 Split split, const SynthConfig& config) {
  spec.validate();
  if (n_sequences < 1) throw std::invalid_argument("n_sequences must be >= 1");
  if (frame_count < 3) throw std::invalid_argument("frame_count must be >= 3");

  const int d = spec.dim();
  const double two_pi = 2.0 * 3.14159265358979323846;
  Rng rng(seed);
  Corpus corpus;
  corpus.split = split;
  const auto& subject_pool = subjects_for(split);

  for (int k = 0; k < n_sequences; ++k) {
    MotionSequence seq;
    seq.frame_rate_hz = config.frame_rate_hz;
    seq.frames.resize(d, frame_count);
    for (int j = 0; j < d; ++j) {
      const double base = rng.uniform(-config.base_offset, config.base_offset);
      std::vector<double> amp(static_cast<size_t>(config.harmonics));
      std::vector<double> freq(static_cast<size_t>(config.harmonics));
      std::vector<double> phase(static_cast<size_t>(config.harmonics));
      for (int h = 0; h < config.harmonics; ++h) {
        amp[h] = config.amplitude * rng.uniform() /
                 static_cast<double>(config.harmonics);
        freq[h] = rng.uniform(config.min_frequency_hz,
                              config.max_frequency_hz);
        phase[h] = rng.uniform(0.0, two_pi);
      }
      // Drift only on the root joint's dims; scaled by amplitude so a zero
      // amplitude really freezes the pose.
      const bool root_dim = j < spec.dims_per_joint;
      const double drift = root_dim ? config.amplitude * config.drift_rate *
                                          rng.uniform(-1.0, 1.0)
                                    : 0.0;
      for (int t = 0; t < frame_count; ++t) {
        const double time = static_cast<double>(t) / config.frame_rate_hz;
        double v = base + drift * time;
        for (int h = 0; h < config.harmonics; ++h) {
          v += amp[h] * std::sin(two_pi * freq[h] * time + phase[h]);
        }
        seq.frames(j, t) = v;
      }
    }
    const std::string subject = subject_pool[k % subject_pool.size()];
    corpus.items.push_back(
        {subject, "synth" + std::to_string(k), std::move(seq)});
  }
  std::sort(corpus.items.begin(), corpus.items.end(),
            [](const CorpusItem& a, const CorpusItem& b) {
              return std::tie(a.subject, a.action) <
                     std::tie(b.subject, b.action);
            });
  return corpus;
}

double synthetic_step_bound(const SynthConfig& config) {
  // |sin(w(t+dt)) - sin(wt)| <= w*dt and the per-dim amplitudes sum to at
  // most `amplitude`; the root drift adds amplitude*drift_rate*dt.
  const double dt = 1.0 / config.frame_rate_hz;
  const double two_pi = 2.0 * 3.14159265358979323846;
  return config.amplitude *
         (two_pi * config.max_frequency_hz + config.drift_rate) * dt;
}

Normalizer fit_normalizer(const Corpus& corpus) {
  if (corpus.items.empty()) {
    throw DataError("cannot fit normalizer on an empty corpus");
  }
  const int d = corpus.dim();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sq_sum = Eigen::VectorXd::Zero(d);
  long total_frames = 0;
  for (const auto& item : corpus.items) {
    sum += item.sequence.frames.rowwise().sum();
    sq_sum += item.sequence.frames.array().square().matrix().rowwise().sum();
    total_frames += item.sequence.length();
  }
  Normalizer n;
  n.mean = sum / static_cast<double>(total_frames);
  const Eigen::ArrayXd variance =
      (sq_sum.array() / static_cast<double>(total_frames)) -
      n.mean.array().square();
  n.std = variance.max(0.0).sqrt().max(Normalizer::kStdFloor).matrix();
  return n;
}

MotionSequence apply_normalizer(const Normalizer& n, const MotionSequence& s) {
  if (s.dim() != n.mean.size()) {
    throw std::invalid_argument("normalizer dimension mismatch");
  }
  MotionSequence out;
  out.frame_rate_hz = s.frame_rate_hz;
  out.frames =
      (s.frames.colwise() - n.mean).array().colwise() / n.std.array();
  return out;
}

MotionSequence invert_normalizer(const Normalizer& n,
                                 const MotionSequence& s) {
  if (s.dim() != n.mean.size()) {
    throw std::invalid_argument("normalizer dimension mismatch");
  }
  MotionSequence out;
  out.frame_rate_hz = s.frame_rate_hz;
  out.frames =
      ((s.frames.array().colwise() * n.std.array()).matrix().colwise() +
       n.mean);
  return out;
}

void write_normalizer(const std::string& path, const Normalizer& n) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (Eigen::Index i = 0; i < n.mean.size(); ++i) {
    if (i > 0) out << ' ';
    out << format_double(n.mean[i]);
  }
  out << '\n';
  for (Eigen::Index i = 0; i < n.std.size(); ++i) {
    if (i > 0) out << ' ';
    out << format_double(n.std[i]);
  }
  out << '\n';
  if (!out) throw DataError("write failed: " + path);
}

Normalizer read_normalizer(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open normalizer file: " + path);
  std::string mean_line, std_line;
  if (!std::getline(in, mean_line) || !std::getline(in, std_line)) {
    throw DataError(path + ": expected two lines (means, stds)");
  }
  const auto mean_tokens = split_tokens(mean_line);
  const auto std_tokens = split_tokens(std_line);
  if (mean_tokens.empty() || mean_tokens.size() != std_tokens.size()) {
    throw DataError(path + ": means/stds length mismatch");
  }
  Normalizer n;
  n.mean.resize(static_cast<Eigen::Index>(mean_tokens.size()));
  n.std.resize(static_cast<Eigen::Index>(std_tokens.size()));
  try {
    for (size_t i = 0; i < mean_tokens.size(); ++i) {
      n.mean[static_cast<Eigen::Index>(i)] = parse_double(mean_tokens[i]);
      n.std[static_cast<Eigen::Index>(i)] = parse_double(std_tokens[i]);
    }
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  }
  return n;
}

std::vector<WindowTask> make_windows(const Corpus& corpus,
                                     int condition_length, int gap_length,
                                     int stride) {
  if (condition_length < 1 || gap_length < 1 || stride < 1) {
    throw std::invalid_argument("window parameters must be >= 1");
  }
  const int window = 2 * condition_length + gap_length;
  std::vector<WindowTask> out;
  // Corpus items are already sorted by (subject, action); window starts
  // ascend within each item, so the output order is deterministic.
  for (const auto& item : corpus.items) {
    const int T = item.sequence.length();
    for (int start = 0; start + window <= T; start += stride) {
      MotionSequence slab{item.sequence.frames.middleCols(start, window),
                          item.sequence.frame_rate_hz};
      WindowTask wt;
      wt.task = split_sequence(slab, condition_length,
                               condition_length + gap_length + 1);
      wt.subject = item.subject;
      wt.action = item.action;
      wt.window_start = start;
      out.push_back(std::move(wt));
    }
  }
  return out;
}

}  // namespace mib
