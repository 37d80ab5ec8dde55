#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mfpca/errors.hpp"

namespace mfpca {

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

// Quadrature grid on [0, 1]: strictly increasing points with trapezoid
// weights. All operators and functions in this library are discretized on
// such a grid; inner products are quadrature sums.
class Grid {
 public:
  // Uniform grid with n >= 3 points, endpoints exactly 0 and 1.
  static GridPtr uniform(int n) {
    if (n < 3) throw std::invalid_argument("Grid::uniform: need at least 3 points");
    Eigen::VectorXd pts(n);
    for (int i = 0; i < n; ++i) pts[i] = static_cast<double>(i) / (n - 1);
    pts[0] = 0.0;
    pts[n - 1] = 1.0;
    return GridPtr(new Grid(std::move(pts)));
  }

  static GridPtr from_points(std::vector<double> points) {
    Eigen::VectorXd pts = Eigen::Map<Eigen::VectorXd>(points.data(), static_cast<Eigen::Index>(points.size()));
    return GridPtr(new Grid(std::move(pts)));
  }

  const Eigen::VectorXd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  int size() const { return static_cast<int>(points_.size()); }

  // Index of the grid point nearest to t (ties to the lower index).
  int nearest(double t) const {
    const double* begin = points_.data();
    const double* end = begin + points_.size();
    const double* it = std::lower_bound(begin, end, t);
    if (it == begin) return 0;
    if (it == end) return size() - 1;
    int hi = static_cast<int>(it - begin);
    int lo = hi - 1;
    return (t - points_[lo] <= points_[hi] - t) ? lo : hi;
  }

  // First index with point >= t (for window scans).
  int lower_index(double t) const {
    const double* begin = points_.data();
    return static_cast<int>(std::lower_bound(begin, begin + points_.size(), t) - begin);
  }

 private:
  explicit Grid(Eigen::VectorXd pts) : points_(std::move(pts)) {
    const int n = size();
    if (n < 3) throw std::invalid_argument("Grid: need at least 3 points");
    for (int i = 1; i < n; ++i) {
      if (!(points_[i] > points_[i - 1])) throw std::invalid_argument("Grid: points must be strictly increasing");
    }
    if (std::abs(points_[0]) > 1e-12 || std::abs(points_[n - 1] - 1.0) > 1e-12) {
      throw std::invalid_argument("Grid: domain must be [0, 1]");
    }
    weights_.resize(n);
    weights_[0] = 0.5 * (points_[1] - points_[0]);
    for (int i = 1; i + 1 < n; ++i) weights_[i] = 0.5 * (points_[i + 1] - points_[i - 1]);
    weights_[n - 1] = 0.5 * (points_[n - 1] - points_[n - 2]);
    if (std::abs(weights_.sum() - 1.0) > 1e-12) {
      throw NumericalError("Grid: quadrature weights do not sum to 1");
    }
  }

  Eigen::VectorXd points_;
  Eigen::VectorXd weights_;
};

inline bool same_grid(const GridPtr& a, const GridPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return a->size() == b->size() && a->points() == b->points();
}

inline void require_same_grid(const GridPtr& a, const GridPtr& b, const char* where) {
  if (!same_grid(a, b)) throw std::invalid_argument(std::string(where) + ": operands live on different grids");
}

// A function sampled at the grid points.
struct GridFunction {
  GridPtr grid;
  Eigen::VectorXd values;

  GridFunction() = default;
  GridFunction(GridPtr g, Eigen::VectorXd v) : grid(std::move(g)), values(std::move(v)) {
    if (!grid) throw std::invalid_argument("GridFunction: null grid");
    if (values.size() != grid->size()) throw std::invalid_argument("GridFunction: value count does not match grid");
  }

  // Piecewise-linear evaluation; t is clamped to [0, 1].
  double at(double t) const {
    const Eigen::VectorXd& p = grid->points();
    const int n = grid->size();
    if (t <= p[0]) return values[0];
    if (t >= p[n - 1]) return values[n - 1];
    int hi = grid->lower_index(t);
    if (hi == 0) return values[0];
    int lo = hi - 1;
    double u = (t - p[lo]) / (p[hi] - p[lo]);
    return (1.0 - u) * values[lo] + u * values[hi];
  }
};

// Quadrature inner product <f, g> = sum_i w_i f(t_i) g(t_i).
inline double weighted_inner(const GridFunction& f, const GridFunction& g) {
  require_same_grid(f.grid, g.grid, "weighted_inner");
  return (f.values.array() * g.values.array() * f.grid->weights().array()).sum();
}

inline double weighted_norm(const GridFunction& f) {
  return std::sqrt(std::max(0.0, weighted_inner(f, f)));
}

}  // namespace mfpca
