#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "mib/motion.hpp"
#include "mib/rng.hpp"

namespace mib {

// Sizes of the sequence-conditioned variational model. gap_length and
// condition_length describe the task window the model is trained on.
struct ModelConfig {
  int d = 51;
  int hidden_size = 128;
  int latent_size = 32;
  int gap_length = 75;
  int condition_length = 25;

  int window_length() const { return 2 * condition_length + gap_length; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Gated recurrent cell, single-bias form:
//   r = sigmoid(wr x + ur h + br)
//   u = sigmoid(wu x + uu h + bu)
//   n = tanh(wn x + un (r . h) + bn)
//   h' = u . h + (1 - u) . n
struct GruParams {
  Eigen::MatrixXd wr, wu, wn;  // hidden x input
  Eigen::MatrixXd ur, uu, un;  // hidden x hidden
  Eigen::VectorXd br, bu, bn;  // hidden
};

struct AffineParams {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

// Parameter tree. Three groups:
//   condition: one GRU read forward over the start clip, one read backward
//              over the end clip; their final states concatenate into the
//              condition embedding (2*hidden).
//   encoder:   GRU over the target gap plus an affine head mapping
//              [final state ; condition] to (mean, log variance).
//   decoder:   affine map of [z ; condition] to the initial hidden state,
//              a GRU stepped on the previously emitted frame, and an
//              affine head emitting per-frame deltas.
struct ModelParams {
  GruParams cond_start, cond_end;
  GruParams enc_gru;
  AffineParams enc_head;
  AffineParams dec_init;
  GruParams dec_gru;
  AffineParams dec_head;
};

enum class ParamGroup { kCondition, kEncoder, kDecoder };

const std::vector<ParamGroup>& all_param_groups();
std::string param_group_name(ParamGroup g);

struct TensorRef {
  std::string name;
  double* data;
  Eigen::Index rows, cols;
  Eigen::Index size() const { return rows * cols; }
  Eigen::Map<Eigen::MatrixXd> map() const {
    return Eigen::Map<Eigen::MatrixXd>(data, rows, cols);
  }
};

// Fixed-order enumeration of every parameter tensor (or of one group).
// The order defines checkpoint layout and the optimizer state pairing.
std::vector<TensorRef> param_tensors(ModelParams& p);
std::vector<TensorRef> param_tensors(ModelParams& p, ParamGroup group);

ModelParams zero_params(const ModelConfig& config);
// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases,
// drawn in enumeration order so a seed pins the full parameter vector.
ModelParams init_params(const ModelConfig& config, Rng& rng);

long param_count(const ModelConfig& config);
bool params_all_finite(const ModelParams& p);
// Sizes implied by the tensors themselves.
int params_pose_dim(const ModelParams& p);
int params_hidden_size(const ModelParams& p);
int params_latent_size(const ModelParams& p);

// ---------------------------------------------------------------------
// Batched forward/backward passes. A "Frames" value is time-major: one
// d x batch matrix per frame. All backward functions accumulate into
// `grads` (and into d-inputs passed by reference) so multiple passes can
// share one gradient tree.
// ---------------------------------------------------------------------

using Frames = std::vector<Eigen::MatrixXd>;

// Stacks equally-shaped sequences into time-major batch frames.
Frames to_frames(const std::vector<const MotionSequence*>& batch);

struct GruStepCache {
  Eigen::MatrixXd x, h_prev, r, u, n, hr;
};

Eigen::MatrixXd gru_step(const GruParams& p, const Eigen::MatrixXd& x,
                         const Eigen::MatrixXd& h_prev, GruStepCache* cache);

// dh is the gradient on the step output. dx may be null when the input is
// data. dh_prev is overwritten, not accumulated.
void gru_step_backward(const GruParams& p, const GruStepCache& cache,
                       const Eigen::MatrixXd& dh, GruParams& grads,
                       Eigen::MatrixXd* dx, Eigen::MatrixXd& dh_prev);

struct GruSequenceCache {
  std::vector<GruStepCache> steps;
};

// Runs the cell over the frames (zero initial state) and returns the final
// hidden state.
Eigen::MatrixXd gru_encode(const GruParams& p, const Frames& inputs,
                           GruSequenceCache* cache);
void gru_encode_backward(const GruParams& p, const GruSequenceCache& cache,
                         const Eigen::MatrixXd& dh_final, GruParams& grads);

struct ConditionCache {
  GruSequenceCache start, end;
};

// [final state of the forward pass over start ; final state of the
// backward pass over end], shape (2*hidden) x batch.
Eigen::MatrixXd encode_condition_batch(const ModelParams& p,
                                       const Frames& start, const Frames& end,
                                       ConditionCache* cache);
void encode_condition_backward(const ModelParams& p,
                               const ConditionCache& cache,
                               const Eigen::MatrixXd& dcond,
                               ModelParams& grads);

constexpr double kLogVarClamp = 10.0;

struct PosteriorCache {
  GruSequenceCache gru;
  Eigen::MatrixXd head_in;     // [h_final ; cond]
  Eigen::MatrixXd raw_logvar;  // before clamping
};

// Diagonal-Gaussian posterior over the latent: GRU over the target frames,
// final state concatenated with the condition, one affine map to
// (mean, log variance). log variance is clamped to +-kLogVarClamp.
void posterior_batch(const ModelParams& p, const Frames& target,
                     const Eigen::MatrixXd& cond, Eigen::MatrixXd* mean,
                     Eigen::MatrixXd* log_variance, PosteriorCache* cache);
void posterior_backward(const ModelParams& p, const PosteriorCache& cache,
                        const Eigen::MatrixXd& dmean,
                        const Eigen::MatrixXd& dlogvar, ModelParams& grads,
                        Eigen::MatrixXd& dcond);

// z = mean + exp(log_variance / 2) . noise
Eigen::MatrixXd reparameterize_batch(const Eigen::MatrixXd& mean,
                                     const Eigen::MatrixXd& log_variance,
                                     const Eigen::MatrixXd& noise);
void reparameterize_backward(const Eigen::MatrixXd& log_variance,
                             const Eigen::MatrixXd& noise,
                             const Eigen::MatrixXd& dz, Eigen::MatrixXd& dmean,
                             Eigen::MatrixXd& dlogvar);

struct DecodeCache {
  Eigen::MatrixXd init_in;  // [z ; cond]
  Eigen::MatrixXd last_start;
  std::vector<GruStepCache> steps;
  std::vector<Eigen::MatrixXd> hidden;   // h_1 .. h_G
  std::vector<Eigen::MatrixXd> outputs;  // out_1 .. out_G
};

// Residual recurrent decoder. The GRU starts from an affine map of
// [z ; cond]; each step consumes the previously emitted frame and adds the
// head output to it, so zero head weights reproduce last_start everywhere.
std::vector<Eigen::MatrixXd> decode_batch(const ModelParams& p,
                                          const Eigen::MatrixXd& z,
                                          const Eigen::MatrixXd& cond,
                                          const Eigen::MatrixXd& last_start,
                                          int gap_length, DecodeCache* cache);
void decode_backward(const ModelParams& p, const DecodeCache& cache,
                     const std::vector<Eigen::MatrixXd>& doutputs,
                     ModelParams& grads, Eigen::MatrixXd* dz,
                     Eigen::MatrixXd& dcond);

// ---------------------------------------------------------------------
// Single-example layer used by sampling, evaluation and tests.
// ---------------------------------------------------------------------

struct PosteriorParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_variance;  // already clamped
};

PosteriorParams make_posterior_params(const Eigen::VectorXd& mean,
                                      const Eigen::VectorXd& log_variance);

enum class LatentOrigin { kPrior, kPosterior };

struct LatentSample {
  Eigen::VectorXd z;
  LatentOrigin origin = LatentOrigin::kPrior;
};

Eigen::VectorXd encode_condition(const ModelParams& p,
                                 const MotionSequence& start,
                                 const MotionSequence& end);
PosteriorParams posterior(const ModelParams& p, const MotionSequence& target,
                          const Eigen::VectorXd& condition);
LatentSample reparameterize(const PosteriorParams& post,
                            const Eigen::VectorXd& noise);
LatentSample sample_prior(int latent_size, Rng& rng);
MotionSequence decode(const ModelParams& p, const LatentSample& z,
                      const Eigen::VectorXd& condition,
                      const Pose& last_start_pose, int gap_length,
                      double frame_rate_hz = 50.0);

}  // namespace mib
