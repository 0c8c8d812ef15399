#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "qexpand/autograd.hpp"

namespace qexpand {

template <typename T>
struct AdamState {
  Tensor<T> m;  // first moment
  Tensor<T> v;  // second moment
  long step = 0;
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

// Adam over a fixed parameter set. Weight decay enters as a classic L2
// gradient contribution (decay * value).
template <typename T>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::vector<Parameter<T>*> params) : params_(std::move(params)) {
    for (auto* p : params_) {
      AdamState<T> s;
      s.m = Tensor<T>::zeros(p->value.shape);
      s.v = Tensor<T>::zeros(p->value.shape);
      states_.push_back(std::move(s));
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  void step(T lr, T weight_decay = T(0)) {
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      Parameter<T>& p = *params_[pi];
      AdamState<T>& s = states_[pi];
      ++s.step;
      const T bc1 = T(1) - std::pow(s.beta1, T(s.step));
      const T bc2 = T(1) - std::pow(s.beta2, T(s.step));
      for (std::size_t i = 0; i < p.value.numel(); ++i) {
        const T g = p.grad.data[i] + weight_decay * p.value.data[i];
        s.m.data[i] = s.beta1 * s.m.data[i] + (T(1) - s.beta1) * g;
        s.v.data[i] = s.beta2 * s.v.data[i] + (T(1) - s.beta2) * g * g;
        const T mhat = s.m.data[i] / bc1;
        const T vhat = s.v.data[i] / bc2;
        p.value.data[i] -= lr * mhat / (std::sqrt(vhat) + s.eps);
      }
    }
  }

  const std::vector<AdamState<T>>& states() const { return states_; }
  const std::vector<Parameter<T>*>& params() const { return params_; }

 private:
  std::vector<Parameter<T>*> params_;
  std::vector<AdamState<T>> states_;
};

}  // namespace qexpand
