#pragma once

#include "icdm/autodiff.hpp"
#include "icdm/types.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace icdm {

/// Uniform Glorot initialization: entries in +-sqrt(6 / (rows + cols)).
Matrix xavier_init(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

/// Adaptive-moment optimizer over a fixed tensor list. Moments are lazily
/// shaped on the first step; grads are zeroed after each update.
class AdamOptimizer {
 public:
  struct Options {
    Scalar learning_rate = Scalar(1e-3);
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar epsilon = Scalar(1e-8);
  };

  AdamOptimizer() = default;
  explicit AdamOptimizer(Options opt) : opt_(opt) {}

  void step(std::span<Tensor2* const> params);
  long long steps_taken() const { return step_; }
  const Options& options() const { return opt_; }

 private:
  struct Moments {
    Matrix m, v;
  };
  Options opt_;
  long long step_ = 0;
  std::vector<Moments> moments_;
};

/// Central finite differences on `probes` randomly chosen scalar parameters.
/// `eval(with_grad)` must deterministically compute the scalar objective;
/// with_grad=true must additionally accumulate gradients into the tensors.
/// Returns the maximum relative error across probes.
double grad_check(std::span<Tensor2* const> params,
                  const std::function<Scalar(bool with_grad)>& eval, int probes,
                  std::uint64_t seed, Scalar step = Scalar(1e-4));

}  // namespace icdm
