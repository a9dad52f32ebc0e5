#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <vector>

#include <boost/math/special_functions/legendre.hpp>

namespace gnclosed {

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// n-point Gauss-Legendre rule, cached per n.
inline const GaussRule& gauss_legendre_rule(int n) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  GaussRule r;
  // Non-negative zeros in ascending order; zero itself is present for odd n.
  const auto zeros = boost::math::legendre_p_zeros<double>(n);
  auto weight = [n](double x) {
    const double dp = boost::math::legendre_p_prime<double>(n, x);
    return 2.0 / ((1.0 - x * x) * dp * dp);
  };
  for (auto z = zeros.rbegin(); z != zeros.rend(); ++z) {
    if (*z == 0.0) continue;
    r.nodes.push_back(-*z);
    r.weights.push_back(weight(*z));
  }
  for (double z : zeros) {
    r.nodes.push_back(z);
    r.weights.push_back(weight(z));
  }
  return cache.emplace(n, std::move(r)).first->second;
}

// Tensor-product Gauss-Legendre over [x1, x2] x [y1, y2].
template <class F>
double gauss_legendre_2d(F&& f, double x1, double x2, double y1, double y2, int n = 33) {
  const auto& r = gauss_legendre_rule(n);
  const double hx = 0.5 * (x2 - x1), mx = 0.5 * (x1 + x2);
  const double hy = 0.5 * (y2 - y1), my = 0.5 * (y1 + y2);
  double sum = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    const double x = mx + hx * r.nodes[i];
    double row = 0.0;
    for (std::size_t j = 0; j < r.nodes.size(); ++j) row += r.weights[j] * f(x, my + hy * r.nodes[j]);
    sum += r.weights[i] * row;
  }
  return sum * hx * hy;
}

}  // namespace gnclosed
