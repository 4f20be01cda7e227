#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "ecgdnn/tensor.hpp"

namespace testing {

template <typename T>
ecgdnn::Tensor<T> random_tensor(const ecgdnn::Shape& shape, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  ecgdnn::Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(normal(rng));
  return t;
}

inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Max relative error between `analytic` and the central difference of
/// `loss` with respect to every entry of `param` (or `max_checks` evenly
/// spaced entries).
inline double gradient_check(ecgdnn::Tensor<double>& param, const ecgdnn::Tensor<double>& analytic,
                             const std::function<double()>& loss, std::size_t max_checks = 0,
                             double h = 1e-5) {
  const std::size_t n = param.size();
  const std::size_t step = max_checks == 0 || max_checks >= n ? 1 : n / max_checks;
  double worst = 0.0;
  for (std::size_t i = 0; i < n; i += step) {
    const double saved = param[i];
    param[i] = saved + h;
    const double up = loss();
    param[i] = saved - h;
    const double down = loss();
    param[i] = saved;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * h), 1e-7));
  }
  return worst;
}

/// Scalar probe sum(w * y) for a fixed random weight tensor w.
inline double probe(const ecgdnn::Tensor<double>& y, const ecgdnn::Tensor<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

}  // namespace testing
