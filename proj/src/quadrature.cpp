#include "klgauss/quadrature.hpp"

#include "klgauss/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace klgauss {

HermiteRule gauss_hermite(int order) {
  if (order < 1) throw std::invalid_argument("Gauss-Hermite order must be >= 1");
  HermiteRule rule;
  if (order == 1) {
    rule.nodes = {0.0};
    rule.weights = {1.0};
    return rule;
  }
  // Jacobi matrix of the probabilists' Hermite recurrence.
  Vector diag = Vector::Zero(order);
  Vector sub(order - 1);
  for (int k = 1; k < order; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Matrix> eig;
  eig.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (eig.info() != Eigen::Success) throw std::runtime_error("Golub-Welsch eigen solve failed");

  rule.nodes.resize(order);
  rule.weights.resize(order);
  double total = 0.0;
  for (int k = 0; k < order; ++k) {
    rule.nodes[k] = eig.eigenvalues()[k];
    const double v0 = eig.eigenvectors()(0, k);
    rule.weights[k] = v0 * v0;
    total += rule.weights[k];
  }
  // Symmetrize: the exact rule is symmetric about zero.
  for (int k = 0; k < order / 2; ++k) {
    const int j = order - 1 - k;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[k]);
    const double w = 0.5 * (rule.weights[j] + rule.weights[k]);
    rule.nodes[k] = -x;
    rule.nodes[j] = x;
    rule.weights[k] = rule.weights[j] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  for (double& w : rule.weights) w /= total;
  return rule;
}

NodeSet tensor_gauss_hermite(int dim, int order) {
  if (dim < 1) throw std::invalid_argument("tensor rule dimension must be positive");
  const HermiteRule rule = gauss_hermite(order);
  long count = 1;
  for (int i = 0; i < dim; ++i) count *= order;
  NodeSet out;
  out.nodes.resize(dim, count);
  out.weights.resize(count);
  std::vector<int> idx(dim, 0);
  for (long c = 0; c < count; ++c) {
    double w = 1.0;
    for (int i = 0; i < dim; ++i) {
      out.nodes(i, c) = rule.nodes[idx[i]];
      w *= rule.weights[idx[i]];
    }
    out.weights[c] = w;
    for (int i = 0; i < dim; ++i) {
      if (++idx[i] < order) break;
      idx[i] = 0;
    }
  }
  return out;
}

int capped_order(int dim, int requested, long max_nodes) {
  int order = std::max(2, requested);
  auto count = [dim](int k) {
    double c = 1.0;
    for (int i = 0; i < dim; ++i) c *= k;
    return c;
  };
  while (order > 2 && count(order) > static_cast<double>(max_nodes)) --order;
  return order;
}

NodeSet monte_carlo_nodes(int dim, int count, unsigned long long seed) {
  if (dim < 1 || count < 1) throw std::invalid_argument("Monte-Carlo node set needs dim, count >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  NodeSet out;
  out.nodes.resize(dim, count);
  for (int c = 0; c < count; ++c)
    for (int i = 0; i < dim; ++i) out.nodes(i, c) = normal(rng);
  out.weights = Vector::Constant(count, 1.0 / count);
  return out;
}

bool Box::overlaps(const Box& other) const {
  for (int i = 0; i < dim(); ++i) {
    if (hi[i] < other.lo[i] || other.hi[i] < lo[i]) return false;
  }
  return true;
}

Box Box::hull(const Box& other) const {
  return Box{lo.cwiseMin(other.lo), hi.cwiseMax(other.hi)};
}

std::vector<Box> merge_boxes(std::vector<Box> boxes) {
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < boxes.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < boxes.size(); ++j) {
        if (boxes[i].overlaps(boxes[j])) {
          boxes[i] = boxes[i].hull(boxes[j]);
          boxes.erase(boxes.begin() + static_cast<long>(j));
          merged = true;
          break;
        }
      }
    }
  }
  return boxes;
}

namespace {

constexpr long kMaxGridPoints = 60'000'000;

struct BoxGrid {
  std::vector<int> intervals;  // per axis, multiple of 4
  std::vector<double> h;
  long points = 1;
};

BoxGrid layout(const Box& box, double step) {
  BoxGrid g;
  for (int i = 0; i < box.dim(); ++i) {
    const double width = box.hi[i] - box.lo[i];
    if (!(width > 0.0)) throw std::invalid_argument("integration box has empty extent");
    int n = static_cast<int>(std::ceil(width / step));
    n = std::max(4, (n + 3) / 4 * 4);
    g.intervals.push_back(n);
    g.h.push_back(width / n);
    g.points *= (n + 1);
  }
  return g;
}

// Composite Simpson weight (without the h/3 factor) of node k on n intervals.
double simpson_weight(int k, int n) {
  if (k == 0 || k == n) return 1.0;
  return (k % 2 == 1) ? 4.0 : 2.0;
}

// Fine and coarse (every other node) Simpson weights for one point.
void point_weights(const std::vector<int>& idx, const BoxGrid& g, double& fine, double& coarse) {
  fine = 1.0;
  coarse = 1.0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const int n = g.intervals[a];
    fine *= simpson_weight(idx[a], n) * g.h[a] / 3.0;
    if (idx[a] % 2 == 1) {
      coarse = 0.0;
    } else {
      coarse *= simpson_weight(idx[a] / 2, n / 2) * 2.0 * g.h[a] / 3.0;
    }
  }
}

template <class Eval>
GridIntegral integrate_impl(const std::vector<Box>& boxes, double step, bool exp_domain,
                            const Eval& eval) {
  if (boxes.empty()) throw std::invalid_argument("no integration boxes");
  if (!(step > 0.0)) throw std::invalid_argument("grid step must be positive");
  const int dim = boxes.front().dim();
  if (dim > 3) throw std::invalid_argument("grid quadrature supports dimension <= 3");

  std::vector<BoxGrid> grids;
  long total = 0;
  for (const auto& b : boxes) {
    if (b.dim() != dim) throw std::invalid_argument("integration boxes differ in dimension");
    grids.push_back(layout(b, step));
    total += grids.back().points;
  }
  if (total > kMaxGridPoints) throw std::invalid_argument("integration grid too large");

  // Evaluate every grid value once.
  std::vector<std::vector<double>> values(boxes.size());
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const BoxGrid& g = grids[b];
    values[b].resize(static_cast<std::size_t>(g.points));
    const std::size_t chunk = 4096;
    const std::size_t chunks = (static_cast<std::size_t>(g.points) + chunk - 1) / chunk;
    parallel_for(chunks, [&](std::size_t c) {
      std::vector<int> idx(dim);
      Vector x(dim);
      const std::size_t end = std::min<std::size_t>((c + 1) * chunk, g.points);
      for (std::size_t p = c * chunk; p < end; ++p) {
        std::size_t rem = p;
        for (int a = 0; a < dim; ++a) {
          idx[a] = static_cast<int>(rem % (g.intervals[a] + 1));
          rem /= (g.intervals[a] + 1);
          x[a] = boxes[b].lo[a] + idx[a] * g.h[a];
        }
        values[b][p] = eval(x);
      }
    });
  }

  double peak = -std::numeric_limits<double>::infinity();
  if (exp_domain) {
    for (const auto& v : values)
      for (double lv : v) peak = std::max(peak, lv);
    if (!std::isfinite(peak)) throw std::runtime_error("integrand vanishes on the whole grid");
  } else {
    peak = 0.0;
    for (const auto& v : values)
      for (double fv : v) peak = std::max(peak, std::abs(fv));
  }

  double fine_sum = 0.0, coarse_sum = 0.0, boundary = 0.0;
  std::vector<int> idx(dim);
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const BoxGrid& g = grids[b];
    for (long p = 0; p < g.points; ++p) {
      long rem = p;
      bool on_face = false;
      for (int a = 0; a < dim; ++a) {
        idx[a] = static_cast<int>(rem % (g.intervals[a] + 1));
        rem /= (g.intervals[a] + 1);
        on_face = on_face || idx[a] == 0 || idx[a] == g.intervals[a];
      }
      const double raw = values[b][static_cast<std::size_t>(p)];
      const double f = exp_domain ? std::exp(raw - peak) : raw;
      double wf, wc;
      point_weights(idx, g, wf, wc);
      fine_sum += wf * f;
      coarse_sum += wc * f;
      if (on_face) boundary = std::max(boundary, exp_domain ? f : std::abs(f));
    }
  }

  GridIntegral out;
  out.evaluations = total;
  if (exp_domain) {
    if (!(fine_sum > 0.0)) throw std::runtime_error("non-positive exp-domain integral");
    out.log_value = std::log(fine_sum) + peak;
    out.value = std::exp(out.log_value);
    out.error_estimate = std::abs(fine_sum - coarse_sum) * std::exp(peak);
    out.boundary_ratio = boundary;
  } else {
    out.value = fine_sum;
    out.log_value = fine_sum > 0.0 ? std::log(fine_sum) : -std::numeric_limits<double>::infinity();
    out.error_estimate = std::abs(fine_sum - coarse_sum);
    out.boundary_ratio = peak > 0.0 ? boundary / peak : 0.0;
  }
  return out;
}

}  // namespace

GridIntegral integrate_exp(const std::vector<Box>& boxes, double step,
                           const std::function<double(const Vector&)>& log_f) {
  return integrate_impl(boxes, step, true, log_f);
}

GridIntegral integrate(const std::vector<Box>& boxes, double step,
                       const std::function<double(const Vector&)>& f) {
  return integrate_impl(boxes, step, false, f);
}

}  // namespace klgauss
