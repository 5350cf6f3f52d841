#pragma once

#include <cstddef>
#include <vector>

namespace twist {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const noexcept { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(int n);

/// `panels` equal sub-intervals of [lo, hi], each carrying an n-point
/// Gauss-Legendre rule. Nodes are increasing.
QuadratureRule composite_gauss_legendre(double lo, double hi, int panels, int n);

}  // namespace twist
