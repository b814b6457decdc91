// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "nitcg/optim.h"

#include <cmath>

#include "nitcg/error.h"

namespace nitcg::ad {

const Tensor& ParameterSet::get(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw InputError("no parameter named '" + name + "'");
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::size_t ParameterSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

Tensor& ParameterSet::add_parameter(std::string name, Tensor value) {
  if (name.empty()) throw InputError("parameter name must be nonempty");
  for (const auto& p : params_) {
    if (p.name == name) throw InputError("duplicate parameter name '" + name + "'");
  }
  value.set_requires_grad(true);
  params_.push_back({std::move(name), std::move(value)});
  return params_.back().tensor;
}

Tensor ParameterSet::param(std::size_t index) const {
  const Tensor& t = params_.at(index).tensor;
  return frozen_ ? t.detach() : t;
}

Tensor randn(const Shape& shape, float stddev, std::mt19937_64& rng, bool requires_grad) {
  std::normal_distribution<float> dist(0.0f, stddev);
  std::vector<float> values(numel(shape));
  for (auto& v : values) v = dist(rng);
  return Tensor::from(shape, std::move(values), requires_grad);
}

AdamState AdamState::for_parameters(const std::vector<Parameter>& params, double beta1,
                                    double beta2, double eps) {
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
    throw InputError("Adam betas must lie in (0, 1)");
  }
  if (!(eps > 0.0)) throw InputError("Adam eps must be positive");
  AdamState s;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.size(), 0.0f);
    s.v.emplace_back(p.tensor.size(), 0.0f);
  }
  return s;
}

void adam_step(std::vector<Parameter>& params, AdamState& state, double lr) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("Adam state tracks " + std::to_string(state.m.size()) +
                     " parameters, model has " + std::to_string(params.size()));
  }
  if (lr < 0.0) throw InputError("learning rate must be nonnegative");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].tensor.has_grad()) {
      throw InputError("parameter '" + params[k].name + "' has no gradient");
    }
    if (state.m[k].size() != params[k].tensor.size()) {
      throw ShapeError("Adam buffers for '" + params[k].name + "' do not match its shape");
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto value = params[k].tensor.mutable_data();
    const auto grad = params[k].tensor.grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      if (lr == 0.0) continue;
      const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + state.eps);
      value[i] = static_cast<float>(value[i] - update);
    }
  }
}

}  // namespace nitcg::ad
