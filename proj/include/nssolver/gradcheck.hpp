#pragma once

#include "nssolver/autodiff.hpp"

#include <functional>
#include <string>
#include <vector>

namespace nss::ad {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst;  // "param(row, col)" of the worst coordinate
  int checked = 0;
};

// Central finite differences against the tape gradient. loss_fn must build a
// fresh tape over the store's current values and return the scalar loss Var
// (gradients are taken when a buffer is supplied). Coordinates are sampled
// uniformly over all parameters, max_coords per call.
GradCheckReport finite_difference_check(
    ParameterStore& store,
    const std::function<double(GradBuffer*)>& loss_fn, Rng& rng,
    int max_coords = 64, double epsilon = 1e-5);

// Runs every autodiff op in isolation on randomized shapes and returns the
// worst relative error seen across all of them.
GradCheckReport check_all_ops(std::uint64_t seed);

}  // namespace nss::ad
