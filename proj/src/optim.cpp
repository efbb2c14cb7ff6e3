#include "rrtk/optim.hpp"

#include <cmath>
#include <string>

#include "rrtk/errors.hpp"

namespace rrtk {

void RegistrationConfig::validate() const {
  if (!(lambda_smooth >= 0.0) || !std::isfinite(lambda_smooth))
    throw ValidationError("registration: lambda_smooth must be >= 0");
  if (!(step_size > 0.0) || !std::isfinite(step_size))
    throw ValidationError("registration: step_size must be > 0");
  if (iterations <= 0)
    throw ValidationError("registration: iterations must be > 0");
  if (!(stop_tol >= 0.0))
    throw ValidationError("registration: stop_tol must be >= 0");
}

namespace {

void check_pair(const Tensor& moving, const Tensor& fixed) {
  if (moving.shape.size() != 4 || moving.shape[0] != 1)
    throw ValidationError("registration: images must be [1, D, H, W]");
  require_same_shape(moving.shape, fixed.shape, "registration images");
}

std::size_t warp_channels(const Tensor& moving) {
  return moving.shape[1] == 1 ? 2 : 3;
}

struct Clamped {
  std::size_t i0, i1;
  double frac;
  bool free; // derivative wrt this coordinate is nonzero
};

Clamped split_pos(double p, std::size_t dim) {
  Clamped c;
  double pc = p;
  const double hi = static_cast<double>(dim - 1);
  bool clamped = false;
  if (!(pc >= 0.0)) {
    pc = 0.0;
    clamped = true;
  }
  if (pc > hi) {
    pc = hi;
    clamped = true;
  }
  const double fl = std::floor(pc);
  c.i0 = static_cast<std::size_t>(fl);
  c.i1 = c.i0 + 1 < dim ? c.i0 + 1 : c.i0;
  c.frac = pc - fl;
  c.free = !clamped && c.i1 != c.i0;
  return c;
}

// Smoothness term sum_x |forward-diff grad u|^2 accumulated through ctx.
double smoothness(const Tensor& warp, RRContext& ctx) {
  const std::size_t wc = warp.shape[0], d = warp.shape[1], h = warp.shape[2],
                    w = warp.shape[3];
  double acc = 0.0;
  for (std::size_t c = 0; c < wc; ++c)
    for (std::size_t z = 0; z < d; ++z)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          if (z + 1 < d) {
            const double dv = ctx.sub(warp.at(c, z + 1, y, x),
                                      warp.at(c, z, y, x));
            acc = ctx.add(acc, ctx.mul(dv, dv));
          }
          if (y + 1 < h) {
            const double dv = ctx.sub(warp.at(c, z, y + 1, x),
                                      warp.at(c, z, y, x));
            acc = ctx.add(acc, ctx.mul(dv, dv));
          }
          if (x + 1 < w) {
            const double dv = ctx.sub(warp.at(c, z, y, x + 1),
                                      warp.at(c, z, y, x));
            acc = ctx.add(acc, ctx.mul(dv, dv));
          }
        }
  return acc;
}

} // namespace

double energy(const Tensor& moving, const Tensor& fixed, const Tensor& warp,
              const RegistrationConfig& cfg, RRContext& ctx) {
  check_pair(moving, fixed);
  cfg.validate();
  const Tensor warped = resample(moving, warp, ctx);
  double e_int = 0.0;
  for (std::size_t i = 0; i < warped.size(); ++i) {
    const double r = ctx.sub(warped.data[i], fixed.data[i]);
    e_int = ctx.add(e_int, ctx.mul(r, r));
  }
  if (cfg.lambda_smooth == 0.0)
    return e_int;
  return ctx.add(e_int, ctx.mul(cfg.lambda_smooth, smoothness(warp, ctx)));
}

Tensor energy_gradient(const Tensor& moving, const Tensor& fixed,
                       const Tensor& warp, const RegistrationConfig& cfg,
                       RRContext& ctx) {
  check_pair(moving, fixed);
  cfg.validate();
  const std::size_t wc = warp.shape[0], d = warp.shape[1], h = warp.shape[2],
                    w = warp.shape[3];
  if (wc != warp_channels(moving) || warp.shape[1] != moving.shape[1] ||
      warp.shape[2] != moving.shape[2] || warp.shape[3] != moving.shape[3])
    throw ValidationError("registration: warp shape mismatch");

  Tensor grad(warp.shape);
  const auto lerp = [&ctx](double a, double b, double f) {
    return ctx.add(a, ctx.mul(f, ctx.sub(b, a)));
  };

  // Intensity term: 2 r(x) * dI/dp, with the same lerp chain as resample.
  for (std::size_t z = 0; z < d; ++z)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t off = (z * h + y) * w + x;
        const double uz = wc == 3 ? warp.data[off] : 0.0;
        const double uy = warp.data[(wc - 2) * d * h * w + off];
        const double ux = warp.data[(wc - 1) * d * h * w + off];
        const double pz =
            wc == 3 ? ctx.add(static_cast<double>(z), uz) : 0.0;
        const double py = ctx.add(static_cast<double>(y), uy);
        const double px = ctx.add(static_cast<double>(x), ux);

        const Clamped cz = split_pos(pz, d);
        const Clamped cy = split_pos(py, h);
        const Clamped cx = split_pos(px, w);

        const double v000 = moving.at(0, cz.i0, cy.i0, cx.i0);
        const double v001 = moving.at(0, cz.i0, cy.i0, cx.i1);
        const double v010 = moving.at(0, cz.i0, cy.i1, cx.i0);
        const double v011 = moving.at(0, cz.i0, cy.i1, cx.i1);

        const double c00 = lerp(v000, v001, cx.frac);
        const double c01 = lerp(v010, v011, cx.frac);
        const double c0 = lerp(c00, c01, cy.frac);

        double value, gx, gy, gz = 0.0;
        if (d == 1) {
          value = c0;
          gx = lerp(ctx.sub(v001, v000), ctx.sub(v011, v010), cy.frac);
          gy = ctx.sub(c01, c00);
        } else {
          const double v100 = moving.at(0, cz.i1, cy.i0, cx.i0);
          const double v101 = moving.at(0, cz.i1, cy.i0, cx.i1);
          const double v110 = moving.at(0, cz.i1, cy.i1, cx.i0);
          const double v111 = moving.at(0, cz.i1, cy.i1, cx.i1);
          const double c10 = lerp(v100, v101, cx.frac);
          const double c11 = lerp(v110, v111, cx.frac);
          const double c1 = lerp(c10, c11, cy.frac);
          value = lerp(c0, c1, cz.frac);
          gx = lerp(lerp(ctx.sub(v001, v000), ctx.sub(v011, v010), cy.frac),
                    lerp(ctx.sub(v101, v100), ctx.sub(v111, v110), cy.frac),
                    cz.frac);
          gy = lerp(ctx.sub(c01, c00), ctx.sub(c11, c10), cz.frac);
          gz = ctx.sub(c1, c0);
        }

        const double r = ctx.sub(value, fixed.data[off]);
        const double two_r = ctx.mul(2.0, r);
        if (wc == 3 && cz.free)
          grad.data[off] = ctx.mul(two_r, gz);
        if (cy.free)
          grad.data[(wc - 2) * d * h * w + off] = ctx.mul(two_r, gy);
        if (cx.free)
          grad.data[(wc - 1) * d * h * w + off] = ctx.mul(two_r, gx);
      }

  // Smoothness term: each forward difference dv contributes +-2 lambda dv.
  if (cfg.lambda_smooth > 0.0) {
    const double two_lambda = 2.0 * cfg.lambda_smooth;
    for (std::size_t c = 0; c < wc; ++c)
      for (std::size_t z = 0; z < d; ++z)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) {
            const auto scatter = [&](std::size_t z2, std::size_t y2,
                                     std::size_t x2) {
              const double dv =
                  ctx.sub(warp.at(c, z2, y2, x2), warp.at(c, z, y, x));
              const double t = ctx.mul(two_lambda, dv);
              grad.at(c, z2, y2, x2) = ctx.add(grad.at(c, z2, y2, x2), t);
              grad.at(c, z, y, x) = ctx.sub(grad.at(c, z, y, x), t);
            };
            if (z + 1 < d)
              scatter(z + 1, y, x);
            if (y + 1 < h)
              scatter(z, y + 1, x);
            if (x + 1 < w)
              scatter(z, y, x + 1);
          }
  }
  return grad;
}

std::pair<Tensor, EnergyTrace>
register_images(const Tensor& moving, const Tensor& fixed,
                const RegistrationConfig& cfg, RRContext& ctx) {
  check_pair(moving, fixed);
  cfg.validate();

  Tensor warp({warp_channels(moving), moving.shape[1], moving.shape[2],
               moving.shape[3]});
  EnergyTrace trace;
  double e = energy(moving, fixed, warp, cfg, ctx);

  for (int it = 0; it < cfg.iterations; ++it) {
    if (!std::isfinite(e))
      throw PipelineError("registration diverged at iteration " +
                          std::to_string(it));
    const Tensor grad = energy_gradient(moving, fixed, warp, cfg, ctx);
    double gsq = 0.0;
    for (const double g : grad.data)
      gsq = ctx.add(gsq, ctx.mul(g, g));
    const double gnorm = ctx.sqrt(gsq);

    trace.energy.push_back(e);
    trace.grad_norm.push_back(gnorm);
    if (gnorm < cfg.stop_tol)
      break;

    double step = cfg.step_size;
    Tensor trial(warp.shape);
    double e_trial = 0.0;
    bool accepted = false;
    for (int halving = 0; halving < 24; ++halving) {
      for (std::size_t i = 0; i < warp.size(); ++i)
        trial.data[i] = ctx.sub(warp.data[i], ctx.mul(step, grad.data[i]));
      e_trial = energy(moving, fixed, trial, cfg, ctx);
      if (std::isnan(e_trial))
        throw PipelineError("registration diverged at iteration " +
                            std::to_string(it));
      if (e_trial <= e) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted)
      break; // no step decreases the energy
    warp = std::move(trial);
    e = e_trial;
  }
  return {std::move(warp), std::move(trace)};
}

} // namespace rrtk
