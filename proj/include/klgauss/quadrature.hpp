#pragma once

#include "klgauss/potential.hpp"

#include <functional>
#include <vector>

namespace klgauss {

/// Gauss-Hermite rule for the standard normal weight: sum_k w_k f(z_k)
/// approximates E f(Z), Z ~ N(0,1). Exact for polynomials of degree <= 2k-1.
struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Golub-Welsch construction. Throws std::invalid_argument for order < 1.
HermiteRule gauss_hermite(int order);

/// Tensor-product node set in R^dim: columns of `nodes` are standard normal
/// abscissae, `weights` sum to one. Also used to hold Monte-Carlo draws with
/// uniform weights so both estimators share one code path.
struct NodeSet {
  Matrix nodes;    // dim x count
  Vector weights;  // count

  int dim() const { return static_cast<int>(nodes.rows()); }
  int size() const { return static_cast<int>(nodes.cols()); }
};

/// Tensor Gauss-Hermite nodes of the given per-axis order in dim dimensions.
NodeSet tensor_gauss_hermite(int dim, int order);

/// Largest per-axis order <= requested whose tensor rule has at most
/// max_nodes points (never below 2).
int capped_order(int dim, int requested, long max_nodes = 200000);

/// Standard normal draws with uniform weights, reproducible from the seed.
NodeSet monte_carlo_nodes(int dim, int count, unsigned long long seed);

/// Axis-aligned box [lo, hi].
struct Box {
  Vector lo;
  Vector hi;
  int dim() const { return static_cast<int>(lo.size()); }
  bool overlaps(const Box& other) const;
  Box hull(const Box& other) const;
};

/// Merges boxes until the collection is pairwise disjoint (overlapping boxes
/// are replaced by their bounding box).
std::vector<Box> merge_boxes(std::vector<Box> boxes);

/// Result of tensorized composite Simpson integration.
struct GridIntegral {
  double log_value = 0.0;        // log of the integral (exp-domain integrands)
  double value = 0.0;            // exp(log_value), or the integral itself (linear)
  double error_estimate = 0.0;   // |S_h - S_2h| in the units of `value`
  double boundary_ratio = 0.0;   // max integrand on box faces / peak integrand
  long evaluations = 0;
};

/// Integrates exp(log_f) over a union of disjoint boxes with step <= `step`
/// on every axis. Computed relative to the peak of log_f on the grid, so
/// very small or large integrals stay representable. dim <= 3.
GridIntegral integrate_exp(const std::vector<Box>& boxes, double step,
                           const std::function<double(const Vector&)>& log_f);

/// Integrates a plain (bounded, nonnegative or signed) integrand.
GridIntegral integrate(const std::vector<Box>& boxes, double step,
                       const std::function<double(const Vector&)>& f);

}  // namespace klgauss
