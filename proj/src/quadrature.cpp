#include "twist/quadrature.hpp"

#include <cmath>

#include "twist/errors.hpp"
#include "twist/phase_core.hpp"

namespace twist {

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw UsageError("gauss_legendre: n must be >= 1");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  // Roots are symmetric; Newton on P_n from the Chebyshev-like initial guess.
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

QuadratureRule composite_gauss_legendre(double lo, double hi, int panels, int n) {
  if (panels < 1) throw UsageError("composite_gauss_legendre: panels must be >= 1");
  if (!(lo < hi)) throw UsageError("composite_gauss_legendre: need lo < hi");
  const QuadratureRule base = gauss_legendre(n);
  QuadratureRule rule;
  rule.nodes.reserve(static_cast<std::size_t>(panels) * n);
  rule.weights.reserve(static_cast<std::size_t>(panels) * n);
  const double width = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * width;
    const double half = 0.5 * width;
    for (int i = 0; i < n; ++i) {
      rule.nodes.push_back(a + half * (base.nodes[i] + 1.0));
      rule.weights.push_back(half * base.weights[i]);
    }
  }
  return rule;
}

}  // namespace twist
