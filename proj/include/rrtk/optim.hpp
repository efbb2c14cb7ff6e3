#pragma once

#include <utility>
#include <vector>

#include "rrtk/nn.hpp"
#include "rrtk/tensor.hpp"

namespace rrtk {

struct RegistrationConfig {
  double lambda_smooth = 0.1; // weight of the displacement-gradient penalty
  double step_size = 0.5;     // initial step, halved on energy increase
  int iterations = 200;
  double stop_tol = 1e-6; // on the gradient norm

  void validate() const;
};

struct EnergyTrace {
  std::vector<double> energy;
  std::vector<double> grad_norm;
};

// E(u) = sum_x (moving(x + u(x)) - fixed(x))^2
//      + lambda * sum_x |forward-diff grad u(x)|^2
// with edge clamping in the resampler; all FP ops routed through ctx.
double energy(const Tensor& moving, const Tensor& fixed, const Tensor& warp,
              const RegistrationConfig& cfg, RRContext& ctx);

// Analytic gradient of `energy` with respect to the displacement field.
Tensor energy_gradient(const Tensor& moving, const Tensor& fixed,
                       const Tensor& warp, const RegistrationConfig& cfg,
                       RRContext& ctx);

// Gradient descent from u = 0 with backtracking step halving on energy
// increase. Stops at the iteration cap, at grad-norm < stop_tol, or when no
// step length decreases the energy. Throws PipelineError (with the
// iteration index) if the energy turns NaN or infinite.
std::pair<Tensor, EnergyTrace>
register_images(const Tensor& moving, const Tensor& fixed,
                const RegistrationConfig& cfg, RRContext& ctx);

} // namespace rrtk
