#include "mib/objective.hpp"

#include <cmath>
#include <stdexcept>

#include "mib/errors.hpp"

namespace mib {

StepNoise draw_step_noise(int latent_size, int batch_size, Rng& rng) {
  StepNoise noise;
  noise.eps.resize(latent_size, batch_size);
  noise.z1.resize(latent_size, batch_size);
  noise.z2.resize(latent_size, batch_size);
  for (int b = 0; b < batch_size; ++b) {
    noise.eps.col(b) = rng.normal_vector(latent_size);
    noise.z1.col(b) = rng.normal_vector(latent_size);
    noise.z2.col(b) = rng.normal_vector(latent_size);
    int tries = 0;
    while ((noise.z1.col(b) - noise.z2.col(b)).norm() <= 1e-8) {
      noise.z2.col(b) = rng.normal_vector(latent_size);
      if (++tries > 100) {
        throw std::runtime_error("prior latents keep coinciding");
      }
    }
  }
  return noise;
}

namespace {

struct BatchFrames {
  Frames start, end, target;
  Eigen::MatrixXd last_start;   // d x B
  Eigen::MatrixXd anchor_end;   // first end frame, d x B
};

BatchFrames collect_batch(const std::vector<const InterpolationTask*>& batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  std::vector<const MotionSequence*> starts, ends, targets;
  starts.reserve(batch.size());
  ends.reserve(batch.size());
  targets.reserve(batch.size());
  for (const InterpolationTask* t : batch) {
    if (!t->ground_truth.has_value()) {
      throw std::invalid_argument("training task lacks ground truth");
    }
    if (t->ground_truth->length() != t->gap_length) {
      throw std::invalid_argument("ground truth length != gap_length");
    }
    starts.push_back(&t->start);
    ends.push_back(&t->end);
    targets.push_back(&*t->ground_truth);
  }
  BatchFrames out;
  out.start = to_frames(starts);
  out.end = to_frames(ends);
  out.target = to_frames(targets);
  out.last_start = out.start.back();
  out.anchor_end = out.end.front();
  return out;
}

// Per-column squared Frobenius accumulation over a pass.
Eigen::RowVectorXd column_sq_norms(const std::vector<Eigen::MatrixXd>& a,
                                   const std::vector<Eigen::MatrixXd>& b) {
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(a.front().cols());
  for (size_t i = 0; i < a.size(); ++i) {
    acc += (a[i] - b[i]).array().square().matrix().colwise().sum();
  }
  return acc;
}

}  // namespace

LossBreakdown composite_objective(
    const ModelParams& params,
    const std::vector<const InterpolationTask*>& batch, const StepNoise& noise,
    double lambda, double cap, ModelParams* grads, double coherence_weight) {
  if (!(cap > 0.0)) throw std::invalid_argument("cap must be positive");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (!(coherence_weight >= 0.0)) {
    throw std::invalid_argument("coherence_weight must be >= 0");
  }
  const BatchFrames data = collect_batch(batch);
  const int gap = static_cast<int>(data.target.size());
  const Eigen::Index d = data.last_start.rows();
  const Eigen::Index bsz = data.last_start.cols();
  const double inv_b = 1.0 / static_cast<double>(bsz);
  const bool want_grads = grads != nullptr;

  ConditionCache cond_cache;
  const Eigen::MatrixXd cond = encode_condition_batch(
      params, data.start, data.end, want_grads ? &cond_cache : nullptr);

  PosteriorCache post_cache;
  Eigen::MatrixXd mean, logvar;
  posterior_batch(params, data.target, cond, &mean, &logvar,
                  want_grads ? &post_cache : nullptr);

  const Eigen::MatrixXd z_rec = reparameterize_batch(mean, logvar, noise.eps);

  DecodeCache cache_rec, cache_1, cache_2;
  const auto out_rec = decode_batch(params, z_rec, cond, data.last_start, gap,
                                    want_grads ? &cache_rec : nullptr);
  const auto out_1 = decode_batch(params, noise.z1, cond, data.last_start, gap,
                                  want_grads ? &cache_1 : nullptr);
  const auto out_2 = decode_batch(params, noise.z2, cond, data.last_start, gap,
                                  want_grads ? &cache_2 : nullptr);

  // Reconstruction: per-element mean over frames and dims.
  const double denom = static_cast<double>(gap) * static_cast<double>(d);
  const Eigen::RowVectorXd recon_vec =
      column_sq_norms(out_rec, data.target) / denom;
  const double recon = recon_vec.mean();

  // KL against the standard normal prior.
  const Eigen::RowVectorXd kl_vec =
      0.5 * (mean.array().square() + logvar.array().exp() - 1.0 -
             logvar.array())
                .colwise()
                .sum();
  const double kl = kl_vec.mean();

  // Diversity ratio per element, capped.
  const Eigen::RowVectorXd out_dist =
      column_sq_norms(out_1, out_2).array().sqrt();
  const Eigen::RowVectorXd latent_dist =
      (noise.z1 - noise.z2).colwise().norm();
  if ((latent_dist.array() <= 1e-8).any()) {
    throw std::invalid_argument("coincident prior latents in step noise");
  }
  const Eigen::RowVectorXd ratio =
      (out_dist.array() / latent_dist.array()).min(cap);
  const double diversity = ratio.mean();

  // Boundary coherence, averaged over the three decode passes.
  const std::vector<const std::vector<Eigen::MatrixXd>*> passes = {
      &out_rec, &out_1, &out_2};
  Eigen::RowVectorXd coh_vec = Eigen::RowVectorXd::Zero(bsz);
  for (const auto* pass : passes) {
    coh_vec += (pass->front() - data.last_start)
                   .array()
                   .square()
                   .matrix()
                   .colwise()
                   .sum();
    coh_vec += (pass->back() - data.anchor_end)
                   .array()
                   .square()
                   .matrix()
                   .colwise()
                   .sum();
  }
  coh_vec /= static_cast<double>(passes.size());
  const double coherence = coh_vec.mean();

  if (!std::isfinite(recon) || !std::isfinite(kl) || !std::isfinite(diversity) ||
      !std::isfinite(coherence)) {
    throw NonFiniteLossError(
        "non-finite objective term (reconstruction=" + std::to_string(recon) +
        " kl=" + std::to_string(kl) + " diversity=" + std::to_string(diversity) +
        " coherence=" + std::to_string(coherence) + ")");
  }
  LossBreakdown loss =
      total_loss(recon, kl, diversity, coherence_weight * coherence, lambda);
  loss.coherence = coherence;
  if (!want_grads) return loss;

  // ----- backward -----
  const double coh_scale =
      coherence_weight * 2.0 * inv_b / static_cast<double>(passes.size());

  std::vector<Eigen::MatrixXd> d_rec(static_cast<size_t>(gap));
  for (int i = 0; i < gap; ++i) {
    d_rec[i] = (out_rec[i] - data.target[i]) * (2.0 * inv_b / denom);
  }
  d_rec.front() += coh_scale * (out_rec.front() - data.last_start);
  d_rec.back() += coh_scale * (out_rec.back() - data.anchor_end);

  // Active diversity columns get -lambda * d(ratio)/d(out); capped or
  // coincident-output columns contribute nothing.
  Eigen::RowVectorXd div_scale = Eigen::RowVectorXd::Zero(bsz);
  for (Eigen::Index b = 0; b < bsz; ++b) {
    const double n = out_dist[b];
    const double m = latent_dist[b];
    if (n > 0.0 && n / m < cap) div_scale[b] = -lambda * inv_b / (n * m);
  }
  std::vector<Eigen::MatrixXd> d_1(static_cast<size_t>(gap));
  std::vector<Eigen::MatrixXd> d_2(static_cast<size_t>(gap));
  for (int i = 0; i < gap; ++i) {
    const Eigen::MatrixXd scaled =
        (out_1[i] - out_2[i]).array().rowwise() * div_scale.array();
    d_1[i] = scaled;
    d_2[i] = -scaled;
  }
  d_1.front() += coh_scale * (out_1.front() - data.last_start);
  d_1.back() += coh_scale * (out_1.back() - data.anchor_end);
  d_2.front() += coh_scale * (out_2.front() - data.last_start);
  d_2.back() += coh_scale * (out_2.back() - data.anchor_end);

  Eigen::MatrixXd dcond = Eigen::MatrixXd::Zero(cond.rows(), cond.cols());
  Eigen::MatrixXd dz_rec = Eigen::MatrixXd::Zero(z_rec.rows(), z_rec.cols());
  decode_backward(params, cache_rec, d_rec, *grads, &dz_rec, dcond);
  decode_backward(params, cache_1, d_1, *grads, nullptr, dcond);
  decode_backward(params, cache_2, d_2, *grads, nullptr, dcond);

  Eigen::MatrixXd dmean = mean * inv_b;  // KL term
  Eigen::MatrixXd dlogvar =
      (0.5 * inv_b) * (logvar.array().exp() - 1.0).matrix();
  reparameterize_backward(logvar, noise.eps, dz_rec, dmean, dlogvar);
  posterior_backward(params, post_cache, dmean, dlogvar, *grads, dcond);
  encode_condition_backward(params, cond_cache, dcond, *grads);

  return loss;
}

}  // namespace mib
