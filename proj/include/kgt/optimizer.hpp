#pragma once

#include <cmath>
#include <string>

#include "kgt/tape.hpp"

namespace kgt {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline void validate_adam_config(const AdamConfig& cfg) {
  if (cfg.learning_rate <= 0.0) throw ConfigError("train.learning_rate must be positive");
  if (cfg.beta1 <= 0.0 || cfg.beta1 >= 1.0) throw ConfigError("train.beta1 must be in (0,1)");
  if (cfg.beta2 <= 0.0 || cfg.beta2 >= 1.0) throw ConfigError("train.beta2 must be in (0,1)");
  if (cfg.eps <= 0.0) throw ConfigError("train.eps must be positive");
}

template <typename S>
struct AdamState {
  using Mat = typename ParameterSet<S>::Mat;
  std::vector<Mat> m, v;
  long step = 0;

  explicit AdamState(const ParameterSet<S>& params) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m.push_back(Mat::Zero(params.value(i).rows(), params.value(i).cols()));
      v.push_back(Mat::Zero(params.value(i).rows(), params.value(i).cols()));
    }
  }
};

// Standard Adam with bias correction over the whole registry; parameters with
// zero gradient still decay their moments.
template <typename S>
void adam_step(ParameterSet<S>& params, const GradientSet<S>& grads, AdamState<S>& state,
               const AdamConfig& cfg) {
  if (grads.size() != params.size())
    throw NumericError("adam_step: gradient registry does not match parameters");
  state.step += 1;
  auto b1 = static_cast<S>(cfg.beta1);
  auto b2 = static_cast<S>(cfg.beta2);
  auto lr = static_cast<S>(cfg.learning_rate);
  auto eps = static_cast<S>(cfg.eps);
  S c1 = S(1) - static_cast<S>(std::pow(cfg.beta1, static_cast<double>(state.step)));
  S c2 = S(1) - static_cast<S>(std::pow(cfg.beta2, static_cast<double>(state.step)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = grads.value(i);
    if (g.rows() != params.value(i).rows() || g.cols() != params.value(i).cols())
      throw NumericError("adam_step: gradient shape mismatch for '" + params.names()[i] + "'");
    if (!g.allFinite())
      throw NumericError("adam_step: non-finite gradient for '" + params.names()[i] + "'");
    state.m[i] = b1 * state.m[i] + (S(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (S(1) - b2) * g.cwiseProduct(g);
    params.value(i).array() -=
        lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + eps);
    if (!params.value(i).allFinite())
      throw NumericError("adam_step: parameter '" + params.names()[i] + "' became non-finite");
  }
}

}  // namespace kgt
