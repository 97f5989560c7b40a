#pragma once

#include "srn/param_store.hpp"

namespace srn {

// Adaptive moment estimation over every array in a ParamStore.
class Adam {
 public:
  struct Options {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam() = default;
  explicit Adam(Options opt) : opt_(opt) {}

  // Arrays in `grads` without a matching parameter are an error; parameters
  // without a gradient are left untouched.
  void step(ParamStore& params, const ParamStore& grads);
  std::size_t steps_taken() const noexcept { return t_; }
  const Options& options() const noexcept { return opt_; }

 private:
  Options opt_;
  ParamStore m_, v_;
  std::size_t t_ = 0;
};

}  // namespace srn
