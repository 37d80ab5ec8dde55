#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "mfpca/errors.hpp"
#include "mfpca/operators.hpp"

namespace mfpca {

// Rank selection for a single source's FPCA.
struct RankRule {
  enum class Kind { fixed, fve };
  Kind kind = Kind::fve;
  int m = 0;         // for fixed
  double tau = 0.95; // for fve

  static RankRule fixed(int m) {
    if (m < 1) throw std::invalid_argument("RankRule::fixed: m must be >= 1");
    RankRule r;
    r.kind = Kind::fixed;
    r.m = m;
    return r;
  }
  static RankRule fve(double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("RankRule::fve: tau must be in (0, 1)");
    RankRule r;
    r.kind = Kind::fve;
    r.tau = tau;
    return r;
  }
};

// Per-source FPCA result: leading eigenpairs of the smoothed covariance and
// the projector onto their span.
struct SourceFPCA {
  std::string source_id;
  long n = 0;
  EigenSystem eigensystem;
  int m = 0;
  DiscretizedOperator projector;
  double sigma2 = 0.0;
};

// P = sum_{nu <= m} phi_nu (x) phi_nu.
inline DiscretizedOperator build_projector(const EigenSystem& es, int m) {
  if (m < 1 || m > static_cast<int>(es.eigenfunctions.size())) {
    throw std::invalid_argument("build_projector: m out of range");
  }
  DiscretizedOperator P = DiscretizedOperator::zero(es.grid);
  for (int nu = 0; nu < m; ++nu) P.add_outer(es.eigenfunctions[nu], 1.0);
  return P;
}

// Eigendecompose a smoothed covariance and select the rank. Negative
// eigenvalues (smoothing artifacts) are clamped to zero for the variance
// fractions and never enter the projector: a fixed rank is truncated to the
// number of positive eigenvalues.
inline SourceFPCA fit_fpca(const DiscretizedOperator& G_hat, const RankRule& rule) {
  const int g = G_hat.grid()->size();
  EigenSystem full = eigendecompose(G_hat, g);

  // Eigenvalues at the solver's noise floor are not signal: count a value as
  // positive only relative to the spectral scale.
  const double scale = std::max(std::abs(full.eigenvalues[0]), std::abs(full.eigenvalues[g - 1]));
  const double tol = 1e-12 * scale;
  int positives = 0;
  double total = 0.0;
  for (int i = 0; i < g; ++i) {
    if (full.eigenvalues[i] > tol) {
      ++positives;
      total += full.eigenvalues[i];
    }
  }
  if (positives == 0 || total <= 0.0) {
    throw NumericalError("fit_fpca: covariance has no positive eigenvalues (no signal)");
  }

  int m = 0;
  if (rule.kind == RankRule::Kind::fixed) {
    m = std::min(rule.m, positives);
  } else {
    double cum = 0.0;
    for (int i = 0; i < positives; ++i) {
      cum += full.eigenvalues[i];
      if (cum / total >= rule.tau) {
        m = i + 1;
        break;
      }
    }
    if (m == 0) m = positives;
  }

  SourceFPCA out;
  out.m = m;
  out.eigensystem.grid = full.grid;
  out.eigensystem.eigenvalues = full.eigenvalues.head(m);
  out.eigensystem.eigenfunctions.assign(full.eigenfunctions.begin(), full.eigenfunctions.begin() + m);
  out.projector = build_projector(out.eigensystem, m);
  return out;
}

}  // namespace mfpca
