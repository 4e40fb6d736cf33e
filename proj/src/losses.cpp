#include "mib/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace mib {

double reconstruction_loss(const MotionSequence& pred,
                           const MotionSequence& gt) {
  if (pred.length() != gt.length() || pred.dim() != gt.dim()) {
    throw std::invalid_argument("reconstruction_loss shape mismatch");
  }
  return (pred.frames - gt.frames).array().square().mean();
}

double kl_divergence(const PosteriorParams& post) {
  if (!post.mean.allFinite() || !post.log_variance.allFinite()) {
    throw std::invalid_argument("kl_divergence: non-finite posterior");
  }
  const Eigen::ArrayXd mu2 = post.mean.array().square();
  const Eigen::ArrayXd var = post.log_variance.array().exp();
  return 0.5 * (mu2 + var - 1.0 - post.log_variance.array()).sum();
}

double diversity_loss(const MotionSequence& out1, const MotionSequence& out2,
                      const LatentSample& z1, const LatentSample& z2,
                      double cap) {
  if (out1.length() != out2.length() || out1.dim() != out2.dim()) {
    throw std::invalid_argument("diversity_loss output shape mismatch");
  }
  if (z1.z.size() != z2.z.size()) {
    throw std::invalid_argument("diversity_loss latent size mismatch");
  }
  if (!(cap > 0.0)) throw std::invalid_argument("cap must be positive");
  const double latent_dist = (z1.z - z2.z).norm();
  if (latent_dist <= 1e-8) {
    throw std::invalid_argument(
        "diversity_loss: coincident latents (sampling bug)");
  }
  const double output_dist = (out1.frames - out2.frames).norm();
  return std::min(output_dist / latent_dist, cap);
}

double coherence_loss(const InterpolationTask& task,
                      const MotionSequence& pred) {
  if (pred.length() != task.gap_length || pred.length() < 1) {
    throw std::invalid_argument("coherence_loss: prediction length mismatch");
  }
  const Pose anchor_start = task.start.pose(task.start.length() - 1);
  const Pose anchor_end = task.end.pose(0);
  const double d_first = pose_distance(anchor_start, pred.pose(0));
  const double d_last = pose_distance(pred.pose(pred.length() - 1),
                                      anchor_end);
  return d_first * d_first + d_last * d_last;
}

LossBreakdown total_loss(double reconstruction, double kl, double diversity,
                         double coherence, double lambda) {
  if (!std::isfinite(reconstruction) || !std::isfinite(kl) ||
      !std::isfinite(diversity) || !std::isfinite(coherence) ||
      !std::isfinite(lambda)) {
    throw std::invalid_argument("total_loss: non-finite term");
  }
  LossBreakdown out;
  out.reconstruction = reconstruction;
  out.kl = kl;
  out.diversity = diversity;
  out.coherence = coherence;
  out.lambda = lambda;
  out.total = (reconstruction + kl) - lambda * diversity + coherence;
  return out;
}

}  // namespace mib
