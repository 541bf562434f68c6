#pragma once

#include "nssolver/autodiff.hpp"

#include <vector>

namespace nss::ad {

// Adam moment buffers; beta1 = 0.9, beta2 = 0.999, eps = 1e-8
struct AdamState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(const ParameterStore& store);
};

// Bias-corrected Adam step with decoupled weight decay. Parameters whose
// group is absent from active_groups are left untouched (an empty list
// means every group is active).
void adam_step(ParameterStore& store, const GradBuffer& grads,
               AdamState& state, double lr, double weight_decay = 0.0,
               const std::vector<int>& active_groups = {});

// halves every `halve_every` epochs
double lr_at_epoch(double base_lr, int epoch, int halve_every);

}  // namespace nss::ad
