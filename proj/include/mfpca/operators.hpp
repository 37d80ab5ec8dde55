#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mfpca/errors.hpp"
#include "mfpca/grid.hpp"

namespace mfpca {

// Relative asymmetry tolerated by the symmetric-operator routines.
inline constexpr double kSymmetryTol = 1e-8;

// Integral operator discretized on a grid: (Af)(s_i) = sum_j w_j K(s_i, t_j) f(t_j).
class DiscretizedOperator {
 public:
  DiscretizedOperator() = default;
  DiscretizedOperator(GridPtr grid, Eigen::MatrixXd kernel) : grid_(std::move(grid)), kernel_(std::move(kernel)) {
    if (!grid_) throw std::invalid_argument("DiscretizedOperator: null grid");
    if (kernel_.rows() != grid_->size() || kernel_.cols() != grid_->size()) {
      throw std::invalid_argument("DiscretizedOperator: kernel shape does not match grid");
    }
  }

  static DiscretizedOperator zero(GridPtr grid) {
    const int n = grid->size();
    return DiscretizedOperator(std::move(grid), Eigen::MatrixXd::Zero(n, n));
  }

  const GridPtr& grid() const { return grid_; }
  const Eigen::MatrixXd& kernel() const { return kernel_; }
  Eigen::MatrixXd& kernel() { return kernel_; }

  DiscretizedOperator& operator+=(const DiscretizedOperator& o) {
    require_same_grid(grid_, o.grid_, "operator+=");
    kernel_ += o.kernel_;
    return *this;
  }
  DiscretizedOperator& operator-=(const DiscretizedOperator& o) {
    require_same_grid(grid_, o.grid_, "operator-=");
    kernel_ -= o.kernel_;
    return *this;
  }
  DiscretizedOperator& operator*=(double c) {
    kernel_ *= c;
    return *this;
  }

  friend DiscretizedOperator operator+(DiscretizedOperator a, const DiscretizedOperator& b) { return a += b; }
  friend DiscretizedOperator operator-(DiscretizedOperator a, const DiscretizedOperator& b) { return a -= b; }
  friend DiscretizedOperator operator*(double c, DiscretizedOperator a) { return a *= c; }

  // K += c * f f^T for a function on the same grid.
  void add_outer(const GridFunction& f, double c) {
    require_same_grid(grid_, f.grid, "add_outer");
    kernel_.noalias() += c * f.values * f.values.transpose();
  }

 private:
  GridPtr grid_;
  Eigen::MatrixXd kernel_;
};

namespace detail {

inline void require_symmetric_kernel(const Eigen::MatrixXd& K, const char* where) {
  const double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
  const double asym = (K - K.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * scale) {
    throw std::invalid_argument(std::string(where) + ": kernel is not symmetric (max asymmetry " +
                                std::to_string(asym) + ")");
  }
}

// Weighted symmetric form M = D^{1/2} K D^{1/2}; its eigenvalues equal
// those of the quadrature operator and its eigenvectors map back to
// quadrature-orthonormal functions via D^{-1/2}. Symmetrization happens after
// the diagonal scaling: scaling first computes M_ij and M_ji with different
// rounding orders, and that last-ulp asymmetry is enough to stall the QR
// iteration on kernels with large clusters of equal eigenvalues.
inline Eigen::MatrixXd weighted_form(const DiscretizedOperator& op) {
  const Eigen::VectorXd d = op.grid()->weights().cwiseSqrt();
  const Eigen::MatrixXd W = d.asDiagonal() * op.kernel() * d.asDiagonal();
  return 0.5 * (W + W.transpose());
}

// Symmetric eigensolve with a deterministic fallback. The QR iteration can
// (rarely) fail to converge when almost the whole spectrum is one numerically
// equal cluster -- discretized projectors are exactly that shape, with n - m
// eigenvalues at the rounding level. One-sided Jacobi is slower but free of
// that failure mode: for a symmetric matrix the singular triplets are
// eigenpairs up to sign, and the sign is the orientation of the left against
// the right singular vector.
struct SymmetricEigen {
  Eigen::VectorXd values;  // ascending, matching SelfAdjointEigenSolver
  Eigen::MatrixXd vectors;
};

inline SymmetricEigen symmetric_eigensolve(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() == Eigen::Success) return {es.eigenvalues(), es.eigenvectors()};

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Index n = M.rows();
  Eigen::VectorXd vals(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double orient = svd.matrixU().col(i).dot(svd.matrixV().col(i));
    vals[i] = orient < 0.0 ? -svd.singularValues()[i] : svd.singularValues()[i];
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return vals[a] < vals[b]; });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = vals[order[static_cast<std::size_t>(i)]];
    out.vectors.col(i) = svd.matrixU().col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace detail

// Operator composition (A B)(s, t) = sum_j w_j A(s, u_j) B(u_j, t).
inline DiscretizedOperator compose(const DiscretizedOperator& a, const DiscretizedOperator& b) {
  require_same_grid(a.grid(), b.grid(), "compose");
  Eigen::MatrixXd K = a.kernel() * a.grid()->weights().asDiagonal() * b.kernel();
  return DiscretizedOperator(a.grid(), std::move(K));
}

// Operator norm (largest absolute eigenvalue) of a symmetric operator.
inline double op_norm(const DiscretizedOperator& op) {
  detail::require_symmetric_kernel(op.kernel(), "op_norm");
  const Eigen::MatrixXd M = detail::weighted_form(op);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  if (es.info() == Eigen::Success) {
    const Eigen::VectorXd& ev = es.eigenvalues();
    return std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));
  }
  // Largest singular value of a symmetric matrix is its operator norm.
  return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()[0];
}

// Hilbert-Schmidt norm of a symmetric operator: Frobenius norm of the
// weighted form, i.e. the l2 norm of the operator's eigenvalues.
inline double hs_norm(const DiscretizedOperator& op) {
  detail::require_symmetric_kernel(op.kernel(), "hs_norm");
  return detail::weighted_form(op).norm();
}

// Leading part of a symmetric operator's spectrum. Eigenvalues are
// non-increasing; eigenfunctions are quadrature-orthonormal, each flipped so
// its value at the grid point of maximum absolute value is positive.
struct EigenSystem {
  GridPtr grid;
  Eigen::VectorXd eigenvalues;
  std::vector<GridFunction> eigenfunctions;

  int size() const { return static_cast<int>(eigenvalues.size()); }
};

inline EigenSystem eigendecompose(const DiscretizedOperator& op, int m) {
  const int n = op.grid()->size();
  if (m < 1 || m > n) throw std::invalid_argument("eigendecompose: m out of range");
  detail::require_symmetric_kernel(op.kernel(), "eigendecompose");

  const detail::SymmetricEigen es = detail::symmetric_eigensolve(detail::weighted_form(op));

  const Eigen::VectorXd inv_d = op.grid()->weights().cwiseSqrt().cwiseInverse();
  EigenSystem out;
  out.grid = op.grid();
  out.eigenvalues.resize(m);
  out.eigenfunctions.reserve(m);
  for (int k = 0; k < m; ++k) {
    const int src = n - 1 - k;  // ascending order from the solver
    out.eigenvalues[k] = es.values[src];
    Eigen::VectorXd f = es.vectors.col(src).cwiseProduct(inv_d);
    GridFunction gf(op.grid(), std::move(f));
    const double nrm = weighted_norm(gf);
    if (nrm <= 0.0) throw NumericalError("eigendecompose: degenerate eigenvector");
    gf.values /= nrm;
    int arg = 0;
    gf.values.cwiseAbs().maxCoeff(&arg);
    if (gf.values[arg] < 0.0) gf.values = -gf.values;
    out.eigenfunctions.push_back(std::move(gf));
  }
  return out;
}

}  // namespace mfpca
