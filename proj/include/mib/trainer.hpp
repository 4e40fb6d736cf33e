#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mib/data.hpp"
#include "mib/losses.hpp"
#include "mib/model.hpp"

namespace mib {

struct TrainConfig {
  int epochs = 500;
  double learning_rate = 1e-3;
  double lambda = 5.0;  // weight of the diversity term; 0 disables it
  int batch_size = 16;
  std::uint64_t seed = 0;
  double cap = 100.0;             // ceiling on the diversity ratio
  double coherence_weight = 1.0;  // weight of the boundary term; 0 disables it
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int checkpoint_every = 50;  // epochs between checkpoint rewrites
  int window_stride = 25;     // training window stride over sequences

  void validate() const;
};

constexpr double kGradClipNorm = 5.0;

// Adam with bias correction. Moment tensors mirror the parameter tree and
// pair up by enumeration order.
class AdamOptimizer {
 public:
  AdamOptimizer(const ModelConfig& config, double learning_rate, double beta1,
                double beta2, double eps);
  void step(ModelParams& params, ModelParams& grads);
  long steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  ModelParams m_, v_;
};

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_gradients(ModelParams& grads, double max_norm);

struct TrainOptions {
  std::string checkpoint_path;  // rewritten periodically and at the end
  std::string log_csv_path;     // per-step loss CSV
};

struct TrainResult {
  ModelParams params;
  Normalizer normalizer;
  std::vector<LossBreakdown> log;  // one entry per optimizer step
};

// Full training run over sliding windows of the corpus. Deterministic for
// a given seed: parameter init, epoch shuffles and noise all derive from
// it. Throws DataError when the corpus yields no windows and
// NonFiniteLossError (with step diagnostics) when the objective or its
// gradients stop being finite.
TrainResult train(const Corpus& corpus, const ModelConfig& model_config,
                  const TrainConfig& train_config,
                  const TrainOptions& options = {});

// Versioned checkpoint container: a text header (magic "MICVAE1", config
// fields), then named tensor groups with shapes and little-endian 64-bit
// float payloads. The fitted normalizer rides along as two extra groups
// (norm.mean, norm.std) so sampling needs only this one file.
struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  Normalizer normalizer;
};

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const ModelConfig& config, const Normalizer& normalizer);
Checkpoint load_checkpoint(const std::string& path);

// Line-based `key = value` file; keys are exactly the TrainConfig and
// ModelConfig field names. Blank lines and #-comments are allowed,
// unknown keys are errors.
void parse_config_file(const std::string& path, ModelConfig* model,
                       TrainConfig* train);

// CSV columns: step,reconstruction,kl,diversity,coherence,total.
void write_loss_csv(const std::string& path,
                    const std::vector<LossBreakdown>& log);

}  // namespace mib
