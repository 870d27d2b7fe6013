#pragma once

// Small models used only by the tests.

#include "zest/model.hpp"

namespace zest::fixtures {

/// Identity sigma^2 = h(x) with a flat sieve at `level` on [-4, 4].
inline DiffusionFamily flat_family(double level, SieveDescriptor d = {-4.0, 4.0, 16, 0.25, 4.0, 1.0}) {
  return {identity_sigma2, d.v_lo, SieveFunction::constant(d, level)};
}

/// dX = -theta x dt + sigma dW with constant sigma^2.
inline ModelSpec ou_const(double theta0 = 1.0, double s2 = 1.0) {
  ModelSpec m = models::ou(theta0);
  m.diffusion = flat_family(s2);
  return m;
}

/// S = 0 (theta is a dummy parameter), sigma^2 = 1: Brownian motion.
inline ModelSpec brownian() {
  ModelSpec m;
  m.name = "brownian";
  m.space = {Vec::Constant(1, -1.0), Vec::Constant(1, 1.0), Vec::Constant(1, 0.0)};
  m.drift.s = [](State, const Vec&) { return 0.0; };
  m.drift.s_dot = [](State, const Vec&, Eigen::Ref<Vec> out) { out[0] = 0.0; };
  m.drift.envelope = [](State) { return 1.0; };
  m.drift.lip_x = 1.0;
  m.diffusion = flat_family(1.0);
  return m;
}

/// AR(1) with constant variance.
inline ModelSpec ar1_const(double theta0 = 0.5, double s2 = 1.0) {
  ModelSpec m = models::ar1(theta0);
  SieveDescriptor d = models::ar1_sieve();
  m.diffusion = flat_family(s2, d);
  return m;
}

}  // namespace zest::fixtures
