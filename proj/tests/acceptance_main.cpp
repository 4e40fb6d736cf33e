// Acceptance gate: exercises every shipped guarantee end to end and prints
// one PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mib/data.hpp"
#include "mib/eval.hpp"
#include "mib/losses.hpp"
#include "mib/model.hpp"
#include "mib/objective.hpp"
#include "mib/rng.hpp"
#include "mib/trainer.hpp"

using namespace mib;
namespace fs = std::filesystem;

namespace {

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

struct Gate {
  int failures = 0;
  int index = 0;

  void report(bool ok, const std::string& name, const std::string& detail) {
    ++index;
    std::cout << (ok ? "PASS" : "FAIL") << " [" << index << "/7] " << name
              << ": " << detail << "\n";
    std::cout.flush();
    if (!ok) ++failures;
  }
};

MotionSequence random_motion(Rng& rng, int d, int t) {
  MotionSequence s;
  s.frames.resize(d, t);
  for (int j = 0; j < t; ++j)
    for (int i = 0; i < d; ++i) s.frames(i, j) = rng.uniform(-1.0, 1.0);
  return s;
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// 1. Diversity/accuracy trade-off at desk scale.

struct PilotModels {
  ModelConfig config;
  TrainResult lambda0;
  TrainResult lambda5;
  double train0_s = 0.0;
  double train5_s = 0.0;
};

PilotModels train_pilot_pair() {
  PilotModels out;
  out.config.d = 51;
  out.config.hidden_size = 64;
  out.config.latent_size = 16;
  out.config.gap_length = 20;
  out.config.condition_length = 10;

  // 25 sequences x 215 frames, stride 25 -> 8 windows each = 200 windows.
  const Corpus corpus = generate_synthetic_corpus(standard_skeleton17(), 25,
                                                  215, 42, Split::kTrain);

  TrainConfig tc;
  tc.epochs = 200;
  tc.learning_rate = 1e-3;
  tc.batch_size = 16;
  tc.seed = 1;
  tc.window_stride = 25;
  tc.checkpoint_every = 1000;  // no intermediate saves

  tc.lambda = 0.0;
  {
    Timer t;
    out.lambda0 = train(corpus, out.config, tc);
    out.train0_s = t.seconds();
  }
  tc.lambda = 5.0;
  {
    Timer t;
    out.lambda5 = train(corpus, out.config, tc);
    out.train5_s = t.seconds();
  }
  return out;
}

void check_tradeoff(Gate& gate, const PilotModels& pilot) {
  const Corpus test = generate_synthetic_corpus(standard_skeleton17(), 6, 215,
                                                43, Split::kTest);
  const EvaluationReport r0 = evaluate(pilot.lambda0.params,
                                       pilot.lambda0.normalizer, pilot.config,
                                       test, 5, 7);
  const EvaluationReport r5 = evaluate(pilot.lambda5.params,
                                       pilot.lambda5.normalizer, pilot.config,
                                       test, 5, 7);
  const bool apd_up = r5.apd >= 1.2 * r0.apd;
  const bool ade_up = r5.ade >= r0.ade;
  const bool fast = pilot.train0_s <= 600.0 && pilot.train5_s <= 600.0;
  gate.report(apd_up && ade_up && fast, "diversity trade-off",
              "apd " + fmt(r0.apd) + " -> " + fmt(r5.apd) + " (ratio " +
                  fmt(r5.apd / r0.apd) + ", need >= 1.2), ade " + fmt(r0.ade) +
                  " -> " + fmt(r5.ade) + " (must not drop), 200-epoch runs " +
                  fmt(pilot.train0_s) + "s/" + fmt(pilot.train5_s) +
                  "s (limit 600s each)");
}

// ---------------------------------------------------------------------------
// 2. ade/apd against naive re-implementations.

double ade_oracle(const std::vector<MotionSequence>& samples,
                  const MotionSequence& gt) {
  double best = 1e300;
  for (const auto& s : samples) {
    double frame_sum = 0.0;
    for (int t = 0; t < gt.length(); ++t) {
      double sq = 0.0;
      for (int i = 0; i < gt.dim(); ++i) {
        const double diff = s.frames(i, t) - gt.frames(i, t);
        sq += diff * diff;
      }
      frame_sum += std::sqrt(sq);
    }
    best = std::min(best, frame_sum / gt.length());
  }
  return best;
}

double apd_oracle(const std::vector<MotionSequence>& samples) {
  const int k = static_cast<int>(samples.size());
  double acc = 0.0;
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      if (a == b) continue;
      double sq = 0.0;
      for (int t = 0; t < samples[static_cast<std::size_t>(a)].length(); ++t)
        for (int i = 0; i < samples[static_cast<std::size_t>(a)].dim(); ++i) {
          const double diff = samples[static_cast<std::size_t>(a)].frames(i, t) -
                              samples[static_cast<std::size_t>(b)].frames(i, t);
          sq += diff * diff;
        }
      acc += std::sqrt(sq);
    }
  return acc / (static_cast<double>(k) * (k - 1));
}

void check_metric_oracles(Gate& gate) {
  Timer timer;
  Rng rng(101);
  double worst_ade = 0.0, worst_apd = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(5));   // 2..6
    const int t = 1 + static_cast<int>(rng.below(10));  // 1..10
    const int d = 1 + static_cast<int>(rng.below(12));  // 1..12
    Rng mrng(rng.below(1u << 30));
    const MotionSequence gt = random_motion(mrng, d, t);
    std::vector<MotionSequence> samples;
    for (int i = 0; i < k; ++i) samples.push_back(random_motion(mrng, d, t));
    worst_ade = std::max(worst_ade,
                         std::abs(ade(samples, gt) - ade_oracle(samples, gt)));
    worst_apd = std::max(worst_apd, std::abs(apd(samples) - apd_oracle(samples)));
  }
  const double elapsed = timer.seconds();
  const bool ok = worst_ade < 1e-9 && worst_apd < 1e-9 && elapsed < 10.0;
  gate.report(ok, "metric oracle equivalence",
              "1000 random inputs (k<=6, t<=10, d<=12): max |ade diff| " +
                  fmt(worst_ade) + ", max |apd diff| " + fmt(worst_apd) +
                  " (tolerance 1e-9), " + fmt(elapsed) + "s (limit 10s)");
}

// ---------------------------------------------------------------------------
// 3. Analytic gradients of the composite objective vs central differences.

void check_gradients(Gate& gate) {
  Timer timer;
  ModelConfig c;
  c.d = 4;
  c.hidden_size = 8;
  c.latent_size = 3;
  c.gap_length = 5;
  c.condition_length = 2;

  Rng rng(201);
  ModelParams params = init_params(c, rng);
  std::vector<InterpolationTask> tasks;
  for (int i = 0; i < 2; ++i) {
    const MotionSequence seq = random_motion(rng, c.d, c.window_length());
    tasks.push_back(split_sequence(seq, c.condition_length,
                                   c.condition_length + c.gap_length + 1));
  }
  std::vector<const InterpolationTask*> batch{&tasks[0], &tasks[1]};
  Rng noise_rng(202);
  const StepNoise noise = draw_step_noise(c.latent_size, 2, noise_rng);

  ModelParams grads = zero_params(c);
  composite_objective(params, batch, noise, 5.0, 100.0, &grads);

  const double step = 1e-5;
  double worst = 0.0;
  std::string worst_at = "-";
  long total = 0;
  auto ptensors = param_tensors(params);
  auto gtensors = param_tensors(grads);
  for (std::size_t ti = 0; ti < ptensors.size(); ++ti) {
    for (Eigen::Index i = 0; i < ptensors[ti].size(); ++i) {
      double* slot = ptensors[ti].data + i;
      const double saved = *slot;
      *slot = saved + step;
      const double up =
          composite_objective(params, batch, noise, 5.0, 100.0, nullptr).total;
      *slot = saved - step;
      const double down =
          composite_objective(params, batch, noise, 5.0, 100.0, nullptr).total;
      *slot = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = gtensors[ti].data[i];
      // Relative error with a small absolute floor so that finite-difference
      // noise on near-zero entries is not amplified.
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      if (rel > worst) {
        worst = rel;
        worst_at = std::string(ptensors[ti].name) + "[" + std::to_string(i) + "]";
      }
      ++total;
    }
  }
  const double elapsed = timer.seconds();
  const bool ok = worst <= 1e-4 && elapsed < 60.0;
  gate.report(ok, "gradient correctness",
              "central differences (step 1e-5) over all " +
                  std::to_string(total) + " parameters: worst relative error " +
                  fmt(worst) + " at " + worst_at + " (tolerance 1e-4), " +
                  fmt(elapsed) + "s (limit 60s)");
}

// ---------------------------------------------------------------------------
// 4. Closed-form KL vs Monte Carlo.

void check_kl(Gate& gate) {
  Rng rng(301);
  double worst_rel = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 3 + static_cast<int>(rng.below(6));  // 3..8
    PosteriorParams post;
    post.mean.resize(dim);
    post.log_variance.resize(dim);
    for (int i = 0; i < dim; ++i) {
      post.mean[i] = rng.uniform(-2.0, 2.0);
      post.log_variance[i] = rng.uniform(-1.5, 1.5);
    }
    const double exact = kl_divergence(post);

    // z = mean + sigma*eps;  E_q[log q - log p] averaged over 1e6 draws.
    const Eigen::ArrayXd sigma = (0.5 * post.log_variance.array()).exp();
    double acc = 0.0;
    const int n = 1000000;
    for (int s = 0; s < n; ++s) {
      double term = 0.0;
      for (int i = 0; i < dim; ++i) {
        const double eps = rng.normal();
        const double z = post.mean[i] + sigma[i] * eps;
        term += 0.5 * (z * z - eps * eps - post.log_variance[i]);
      }
      acc += term;
    }
    const double mc = acc / n;
    worst_rel = std::max(worst_rel, std::abs(exact - mc) / std::abs(exact));
  }

  PosteriorParams standard;
  standard.mean = Eigen::VectorXd::Zero(8);
  standard.log_variance = Eigen::VectorXd::Zero(8);
  const double zero_kl = kl_divergence(standard);

  const bool ok = worst_rel < 0.01 && std::abs(zero_kl) <= 1e-12;
  gate.report(ok, "kl correctness",
              "20 posteriors vs 1e6-sample monte carlo: worst relative error " +
                  fmt(worst_rel) + " (tolerance 1%), standard normal kl " +
                  fmt(zero_kl) + " (|.| <= 1e-12)");
}

// ---------------------------------------------------------------------------
// 5. Boundary-coherence term reduces the boundary gap.

void check_coherence_effect(Gate& gate) {
  ModelConfig c;
  c.d = 51;
  c.hidden_size = 64;
  c.latent_size = 16;
  c.gap_length = 20;
  c.condition_length = 10;

  const Corpus corpus = generate_synthetic_corpus(standard_skeleton17(), 25,
                                                  215, 42, Split::kTrain);
  TrainConfig tc;
  tc.epochs = 60;
  tc.learning_rate = 1e-3;
  tc.lambda = 5.0;
  tc.batch_size = 16;
  tc.seed = 3;
  tc.window_stride = 25;
  tc.checkpoint_every = 1000;

  tc.coherence_weight = 1.0;
  const TrainResult with_term = train(corpus, c, tc);
  tc.coherence_weight = 0.0;
  const TrainResult without_term = train(corpus, c, tc);

  const Corpus test = generate_synthetic_corpus(standard_skeleton17(), 6, 215,
                                                43, Split::kTest);
  const EvaluationReport rw = evaluate(with_term.params, with_term.normalizer,
                                       c, test, 5, 7);
  const EvaluationReport ro = evaluate(without_term.params,
                                       without_term.normalizer, c, test, 5, 7);
  const bool ok = rw.mean_boundary_gap <= ro.mean_boundary_gap;
  gate.report(ok, "coherence effect",
              "equal epochs/seed: mean boundary gap " +
                  fmt(rw.mean_boundary_gap) + " with the boundary term vs " +
                  fmt(ro.mean_boundary_gap) + " without (must not exceed)");
}

// ---------------------------------------------------------------------------
// 6. Decoder shape and residual contracts.

void check_decode_contracts(Gate& gate) {
  ModelConfig c;  // standard: d=51, hidden 128, latent 32, gap 75, cond 25
  Rng rng(401);
  ModelParams p = init_params(c, rng);
  LatentSample z;
  z.z = rng.normal_vector(c.latent_size);
  const Eigen::VectorXd cond = rng.normal_vector(2 * c.hidden_size);
  Eigen::VectorXd last = rng.normal_vector(c.d);

  const MotionSequence out = decode(p, z, cond, last, c.gap_length);
  const bool shape_ok = out.length() == 75 && out.dim() == 51;

  p.dec_head.w.setZero();
  p.dec_head.b.setZero();
  const MotionSequence constant = decode(p, z, cond, last, c.gap_length);
  double max_dev = 0.0;
  for (int t = 0; t < constant.length(); ++t)
    max_dev = std::max(max_dev, (constant.pose(t) - last).cwiseAbs().maxCoeff());
  const bool residual_ok = max_dev == 0.0;

  gate.report(shape_ok && residual_ok, "decode contracts",
              "standard config decodes " + std::to_string(out.length()) +
                  " frames (want 75); zero output head deviates " +
                  fmt(max_dev) + " from the last start pose (want exactly 0)");
}

// ---------------------------------------------------------------------------
// 7. Byte-identical determinism for train/sample/eval.

void check_determinism(Gate& gate) {
  const fs::path dir = fs::temp_directory_path() / "mib_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  ModelConfig c;
  c.d = 51;
  c.hidden_size = 16;
  c.latent_size = 4;
  c.gap_length = 8;
  c.condition_length = 4;
  const Corpus corpus = generate_synthetic_corpus(standard_skeleton17(), 4, 70,
                                                  11, Split::kTrain);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 8;
  tc.seed = 5;
  tc.window_stride = 10;

  TrainOptions oa, ob;
  oa.checkpoint_path = (dir / "a.ckpt").string();
  oa.log_csv_path = (dir / "a.loss.csv").string();
  ob.checkpoint_path = (dir / "b.ckpt").string();
  ob.log_csv_path = (dir / "b.loss.csv").string();
  const TrainResult ta = train(corpus, c, tc, oa);
  train(corpus, c, tc, ob);
  const bool train_ok = !slurp(dir / "a.ckpt").empty() &&
                        slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt") &&
                        slurp(dir / "a.loss.csv") == slurp(dir / "b.loss.csv");

  Rng mrng(12);
  const MotionSequence seq = random_motion(mrng, c.d, c.window_length());
  const InterpolationTask task = split_sequence(
      seq, c.condition_length, c.condition_length + c.gap_length + 1);
  const SampleSet s1 = interpolate(ta.params, ta.normalizer, task, 3, 9);
  const SampleSet s2 = interpolate(ta.params, ta.normalizer, task, 3, 9);
  bool sample_ok = true;
  for (int i = 0; i < 3; ++i) {
    const fs::path pa = dir / ("sa_" + std::to_string(i) + ".motion");
    const fs::path pb = dir / ("sb_" + std::to_string(i) + ".motion");
    write_motion_file(pa.string(), s1.samples[static_cast<std::size_t>(i)]);
    write_motion_file(pb.string(), s2.samples[static_cast<std::size_t>(i)]);
    sample_ok = sample_ok && !slurp(pa).empty() && slurp(pa) == slurp(pb);
  }

  const Corpus test = generate_synthetic_corpus(standard_skeleton17(), 2, 70,
                                                13, Split::kTest);
  const EvaluationReport r1 = evaluate(ta.params, ta.normalizer, c, test, 2, 3);
  const EvaluationReport r2 = evaluate(ta.params, ta.normalizer, c, test, 2, 3);
  write_report_csv((dir / "r1.csv").string(), r1);
  write_report_csv((dir / "r2.csv").string(), r2);
  write_per_task_csv((dir / "t1.csv").string(), r1);
  write_per_task_csv((dir / "t2.csv").string(), r2);
  const bool eval_ok = !slurp(dir / "r1.csv").empty() &&
                       slurp(dir / "r1.csv") == slurp(dir / "r2.csv") &&
                       slurp(dir / "t1.csv") == slurp(dir / "t2.csv");

  gate.report(train_ok && sample_ok && eval_ok, "determinism",
              std::string("repeated runs byte-identical: checkpoints ") +
                  (train_ok ? "yes" : "NO") + ", sample files " +
                  (sample_ok ? "yes" : "NO") + ", reports " +
                  (eval_ok ? "yes" : "NO"));
}

}  // namespace

int main() {
  std::cout << "acceptance gate: stochastic motion in-betweening toolkit\n";
  Gate gate;
  try {
    const PilotModels pilot = train_pilot_pair();
    check_tradeoff(gate, pilot);
    check_metric_oracles(gate);
    check_gradients(gate);
    check_kl(gate);
    check_coherence_effect(gate);
    check_decode_contracts(gate);
    check_determinism(gate);
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << "\n";
    return 1;
  }
  std::cout << "acceptance: " << (7 - gate.failures) << "/7 criteria passed\n";
  return gate.failures == 0 ? 0 : 1;
}
