#pragma once

#include "mib/model.hpp"
#include "mib/motion.hpp"

namespace mib {

// Per-term values of one training objective evaluation.
// total = (reconstruction + kl) - lambda * diversity + coherence.
struct LossBreakdown {
  double reconstruction = 0.0;
  double kl = 0.0;
  double diversity = 0.0;
  double coherence = 0.0;
  double total = 0.0;
  double lambda = 0.0;
};

// Mean over frames and dims of the squared difference.
double reconstruction_loss(const MotionSequence& pred,
                           const MotionSequence& gt);

// Closed form for a diagonal Gaussian against the standard normal:
// 0.5 * sum(mean^2 + var - 1 - log var).
double kl_divergence(const PosteriorParams& post);

// min(cap, |flatten(out1) - flatten(out2)| / |z1 - z2|). The latents must
// be distinct; coincident latents indicate a sampling bug and throw.
double diversity_loss(const MotionSequence& out1, const MotionSequence& out2,
                      const LatentSample& z1, const LatentSample& z2,
                      double cap);

// Squared boundary mismatch: D^2(last start frame, first predicted frame)
// + D^2(last predicted frame, first end frame).
double coherence_loss(const InterpolationTask& task,
                      const MotionSequence& pred);

LossBreakdown total_loss(double reconstruction, double kl, double diversity,
                         double coherence, double lambda);

}  // namespace mib
