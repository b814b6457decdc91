// Copyright 2026 The nitcg Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NITCG_OPTIM_H_
#define NITCG_OPTIM_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nitcg/tensor.h"

namespace nitcg::ad {

struct Parameter {
  std::string name;
  Tensor tensor;  // requires_grad = true
};

// Owns a named parameter list. Subclasses register parameters in their
// constructor; names are unique within one module.
class ParameterSet {
 public:
  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }

  const Tensor& get(const std::string& name) const;
  void zero_grad();
  std::size_t parameter_count() const;

  // When frozen, param() hands out detached copies so no gradient reaches
  // the stored tensors.
  void set_frozen(bool frozen) { frozen_ = frozen; }
  bool frozen() const { return frozen_; }

 protected:
  Tensor& add_parameter(std::string name, Tensor value);
  Tensor param(std::size_t index) const;

 private:
  std::vector<Parameter> params_;
  bool frozen_ = false;
};

// RAII helper around ParameterSet::set_frozen.
class FreezeGuard {
 public:
  explicit FreezeGuard(ParameterSet& set) : set_(set), previous_(set.frozen()) {
    set_.set_frozen(true);
  }
  ~FreezeGuard() { set_.set_frozen(previous_); }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  ParameterSet& set_;
  bool previous_;
};

// Zero-mean Gaussian tensor.
Tensor randn(const Shape& shape, float stddev, std::mt19937_64& rng, bool requires_grad = true);

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  // Zero moments shaped after `params`.
  static AdamState for_parameters(const std::vector<Parameter>& params, double beta1,
                                  double beta2, double eps = 1e-8);
};

// Bias-corrected Adam update of every parameter from its accumulated grad.
// Throws if a parameter has no gradient buffer or the state does not match.
void adam_step(std::vector<Parameter>& params, AdamState& state, double lr);

}  // namespace nitcg::ad

#endif  // NITCG_OPTIM_H_
