#include "icdm/optim.hpp"

#include <cmath>
#include <random>

namespace icdm {

Matrix xavier_init(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  if (rows <= 0 || cols <= 0) throw UsageError("xavier_init: dimensions must be positive");
  const Scalar bound = std::sqrt(Scalar(6) / Scalar(rows + cols));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Scalar> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

void AdamOptimizer::step(std::span<Tensor2* const> params) {
  if (moments_.empty()) {
    moments_.resize(params.size());
    for (size_t k = 0; k < params.size(); ++k) {
      moments_[k].m = Matrix::Zero(params[k]->rows(), params[k]->cols());
      moments_[k].v = Matrix::Zero(params[k]->rows(), params[k]->cols());
    }
  }
  if (moments_.size() != params.size()) {
    throw UsageError("AdamOptimizer: parameter list changed between steps");
  }
  ++step_;
  const Scalar bc1 = Scalar(1) - std::pow(opt_.beta1, Scalar(step_));
  const Scalar bc2 = Scalar(1) - std::pow(opt_.beta2, Scalar(step_));
  for (size_t k = 0; k < params.size(); ++k) {
    Tensor2& p = *params[k];
    if (!p.requires_grad) continue;
    Moments& mo = moments_[k];
    mo.m = opt_.beta1 * mo.m + (Scalar(1) - opt_.beta1) * p.grad;
    mo.v = opt_.beta2 * mo.v.array().matrix() +
           (Scalar(1) - opt_.beta2) * p.grad.array().square().matrix();
    p.value.array() -= opt_.learning_rate * (mo.m.array() / bc1) /
                       ((mo.v.array() / bc2).sqrt() + opt_.epsilon);
    p.zero_grad();
  }
}

double grad_check(std::span<Tensor2* const> params,
                  const std::function<Scalar(bool with_grad)>& eval, int probes,
                  std::uint64_t seed, Scalar step) {
  for (Tensor2* p : params) p->zero_grad();
  eval(true);

  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  std::int64_t total_entries = 0;
  for (Tensor2* p : params) {
    analytic.push_back(p->grad);
    total_entries += p->value.size();
  }
  if (total_entries == 0) throw UsageError("grad_check: no parameters");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> pick(0, total_entries - 1);
  double max_rel = 0.0;
  for (int probe = 0; probe < probes; ++probe) {
    std::int64_t flat = pick(rng);
    size_t k = 0;
    while (flat >= params[k]->value.size()) {
      flat -= params[k]->value.size();
      ++k;
    }
    Scalar* entry = params[k]->value.data() + flat;
    const Scalar saved = *entry;
    *entry = saved + step;
    const Scalar up = eval(false);
    *entry = saved - step;
    const Scalar down = eval(false);
    *entry = saved;

    const double numeric = (static_cast<double>(up) - static_cast<double>(down)) /
                           (2.0 * static_cast<double>(step));
    const double exact = static_cast<double>(*(analytic[k].data() + flat));
    const double denom = std::max({std::abs(numeric), std::abs(exact), 1e-6});
    max_rel = std::max(max_rel, std::abs(numeric - exact) / denom);
  }
  for (size_t k = 0; k < params.size(); ++k) params[k]->grad = analytic[k];
  return max_rel;
}

}  // namespace icdm
