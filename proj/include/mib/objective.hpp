#pragma once

#include <vector>

#include "mib/losses.hpp"
#include "mib/model.hpp"
#include "mib/rng.hpp"

namespace mib {

// Noise consumed by one training step: posterior reparameterization noise
// and two prior latents per batch element (one column each).
struct StepNoise {
  Eigen::MatrixXd eps;
  Eigen::MatrixXd z1;
  Eigen::MatrixXd z2;
};

// Draws the step noise in a pinned order (per element: eps, z1, z2) and
// guarantees z1/z2 are distinct per column.
StepNoise draw_step_noise(int latent_size, int batch_size, Rng& rng);

// One evaluation of the full training objective on a batch of tasks:
//   - posterior pass over the ground-truth gap, reparameterized decode,
//     reconstruction + KL;
//   - two prior-latent decodes feeding the diversity ratio;
//   - boundary coherence averaged over the three decode passes.
// Every sequence in the batch must share the same geometry and carry a
// ground truth. When grads is non-null, analytic gradients of the batch
// mean are accumulated into it.
//
// coherence_weight scales the boundary term in the total (0 ablates it);
// the breakdown always reports the unweighted measurement.
LossBreakdown composite_objective(
    const ModelParams& params,
    const std::vector<const InterpolationTask*>& batch, const StepNoise& noise,
    double lambda, double cap, ModelParams* grads,
    double coherence_weight = 1.0);

}  // namespace mib
