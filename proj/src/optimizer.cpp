#include "nssolver/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace nss::ad {

AdamState::AdamState(const ParameterStore& store) {
  m.reserve(store.size());
  v.reserve(store.size());
  for (int i = 0; i < store.size(); ++i) {
    const Mat& p = store.at(i).value;
    m.emplace_back(Mat::Zero(p.rows(), p.cols()));
    v.emplace_back(Mat::Zero(p.rows(), p.cols()));
  }
}

void adam_step(ParameterStore& store, const GradBuffer& grads,
               AdamState& state, double lr, double weight_decay,
               const std::vector<int>& active_groups) {
  state.t += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (int i = 0; i < store.size(); ++i) {
    Parameter& p = store.at(i);
    if (!active_groups.empty() &&
        std::find(active_groups.begin(), active_groups.end(), p.group) ==
            active_groups.end())
      continue;
    const Mat& g = grads.at(i);
    // fused in place: these buffers are large, temporaries would dominate
    state.m[i].array() =
        state.beta1 * state.m[i].array() + (1.0 - state.beta1) * g.array();
    state.v[i].array() = state.beta2 * state.v[i].array() +
                         (1.0 - state.beta2) * g.array().square();
    p.value.array() -=
        lr * ((state.m[i].array() / bc1) /
                  ((state.v[i].array() / bc2).sqrt() + state.eps) +
              weight_decay * p.value.array());
  }
}

double lr_at_epoch(double base_lr, int epoch, int halve_every) {
  if (halve_every <= 0) return base_lr;
  return base_lr * std::pow(0.5, epoch / halve_every);
}

}  // namespace nss::ad
