#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mfpca/errors.hpp"
#include "mfpca/operators.hpp"
#include "mfpca/spectral.hpp"

namespace mfpca {

// Eigenvalues below this threshold do not count toward numerical rank.
inline constexpr double kRankTol = 1e-8;
// Idempotency tolerance required of projectors entering the pooled average.
inline constexpr double kProjectorTol = 1e-6;

struct WeightedProjector {
  DiscretizedOperator projector;
  long n = 0;
};

// Sample-size-weighted average of per-source projectors:
// P_w = (1/n_t) sum_k n_k P^[k].
inline DiscretizedOperator pooled_projection(const std::vector<WeightedProjector>& sources) {
  if (sources.empty()) throw std::invalid_argument("pooled_projection: no sources");
  long n_t = 0;
  for (const auto& s : sources) {
    if (s.n < 1) throw std::invalid_argument("pooled_projection: sample sizes must be positive");
    require_same_grid(sources.front().projector.grid(), s.projector.grid(), "pooled_projection");
    const double idem = op_norm(compose(s.projector, s.projector) - s.projector);
    if (idem > kProjectorTol) {
      throw std::invalid_argument("pooled_projection: input is not a projector (idempotency defect " +
                                  std::to_string(idem) + ")");
    }
    n_t += s.n;
  }
  DiscretizedOperator acc = DiscretizedOperator::zero(sources.front().projector.grid());
  for (const auto& s : sources) {
    acc.kernel() += (static_cast<double>(s.n) / static_cast<double>(n_t)) * s.projector.kernel();
  }
  return acc;
}

// Rule for choosing the shared rank from the spectrum of P_w.
struct SharedRankRule {
  enum class Kind { gap, threshold, fixed };
  Kind kind = Kind::gap;
  double tau = 0.75;  // threshold rule
  int m = 0;          // fixed rule

  static SharedRankRule gap() { return SharedRankRule{}; }
  static SharedRankRule threshold(double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("SharedRankRule::threshold: tau must be in (0, 1]");
    SharedRankRule r;
    r.kind = Kind::threshold;
    r.tau = tau;
    return r;
  }
  static SharedRankRule fixed(int m) {
    if (m < 1) throw std::invalid_argument("SharedRankRule::fixed: m must be >= 1");
    SharedRankRule r;
    r.kind = Kind::fixed;
    r.m = m;
    return r;
  }
};

// Shared rank m_s from a descending spectrum of the pooled projector.
// gap rule: the index after which the spectrum drops the most, searched
// within the first m_min positions; if even the largest drop is below 1e-3
// (all sources alike), falls back to m_min.
inline int shared_rank(const std::vector<double>& spectrum, int m_min, const SharedRankRule& rule) {
  if (spectrum.empty()) throw std::invalid_argument("shared_rank: empty spectrum");
  if (m_min < 1) throw std::invalid_argument("shared_rank: m_min must be >= 1");
  if (static_cast<int>(spectrum.size()) < m_min) {
    throw std::invalid_argument("shared_rank: spectrum shorter than m_min");
  }
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    if (spectrum[i] < -1e-8 || spectrum[i] > 1.0 + 1e-8) {
      throw std::invalid_argument("shared_rank: spectrum values must lie in [0, 1]");
    }
    if (i > 0 && spectrum[i] > spectrum[i - 1] + 1e-12) {
      throw std::invalid_argument("shared_rank: spectrum must be non-increasing");
    }
  }
  switch (rule.kind) {
    case SharedRankRule::Kind::fixed:
      return rule.m;
    case SharedRankRule::Kind::threshold: {
      int count = 0;
      for (double v : spectrum) {
        if (v >= rule.tau) ++count;
      }
      if (count < 1) throw NumericalError("shared_rank: no eigenvalue reaches the threshold");
      return count;
    }
    case SharedRankRule::Kind::gap: {
      int best_j = m_min;
      double best_gap = 1e-3;
      for (int j = 1; j < m_min; ++j) {
        const double gap = spectrum[j - 1] - spectrum[j];
        if (gap > best_gap) {
          best_gap = gap;
          best_j = j;
        }
      }
      return best_j;
    }
  }
  throw std::logic_error("shared_rank: unreachable");
}

struct SharedProjection {
  DiscretizedOperator P_s;
  EigenSystem spectrum;
};

// Projector onto the top-m_s eigenspace of the pooled projector P_w. The
// returned spectrum holds the full eigendecomposition of P_w (scree data).
inline SharedProjection shared_projection(const DiscretizedOperator& P_w, int m_s) {
  if (m_s < 1) throw std::invalid_argument("shared_projection: m_s must be >= 1");
  const int g = P_w.grid()->size();
  EigenSystem full = eigendecompose(P_w, g);
  int numerical_rank = 0;
  for (int i = 0; i < g; ++i) {
    if (full.eigenvalues[i] > kRankTol) ++numerical_rank;
  }
  if (m_s > numerical_rank) {
    throw NumericalError("shared_projection: m_s = " + std::to_string(m_s) +
                         " exceeds the numerical rank " + std::to_string(numerical_rank) + " of P_w");
  }
  SharedProjection out;
  out.P_s = DiscretizedOperator::zero(P_w.grid());
  for (int nu = 0; nu < m_s; ++nu) out.P_s.add_outer(full.eigenfunctions[nu], 1.0);
  out.spectrum = std::move(full);
  return out;
}

// Projector onto the residual subspace of one source: the part of range(P~)
// orthogonal to the shared subspace. T = P~ (id - P_s) P~ expands to
// P~ P~ - P~ P_s P~, avoiding any grid representation of the identity.
// The top (m_k - m_s) eigenvalues of T must sit at 1 and the next away from
// 1; a 0.5 cut separates the two clusters.
inline DiscretizedOperator residual_projector(const DiscretizedOperator& P_tilde, const DiscretizedOperator& P_s,
                                              int m_k, int m_s) {
  if (m_k <= m_s) throw std::invalid_argument("residual_projector: requires m_k > m_s");
  require_same_grid(P_tilde.grid(), P_s.grid(), "residual_projector");
  DiscretizedOperator T = compose(P_tilde, P_tilde) - compose(compose(P_tilde, P_s), P_tilde);
  // The two matrix products are evaluated in different association orders,
  // so symmetrize the round-off away before decomposition.
  T.kernel() = 0.5 * (T.kernel() + T.kernel().transpose()).eval();

  const int m_p = m_k - m_s;
  const int g = T.grid()->size();
  const int want = std::min(m_p + 1, g);
  EigenSystem es = eigendecompose(T, want);
  const double kept = es.eigenvalues[m_p - 1];
  const double next = (want > m_p) ? es.eigenvalues[m_p] : 0.0;
  if (kept < 0.5 || next >= 0.5) {
    throw NumericalError("residual_projector: ill-separated residual spectrum (eigenvalue " +
                         std::to_string(m_p) + " = " + std::to_string(kept) + ", eigenvalue " +
                         std::to_string(m_p + 1) + " = " + std::to_string(next) + ")");
  }
  DiscretizedOperator P_d = DiscretizedOperator::zero(T.grid());
  for (int nu = 0; nu < m_p; ++nu) P_d.add_outer(es.eigenfunctions[nu], 1.0);
  return P_d;
}

// Source-specific projector: top-m_p eigenspace of G_p = P_d G~ P_d.
inline DiscretizedOperator source_specific_subspace(const DiscretizedOperator& G_tilde,
                                                    const DiscretizedOperator& P_d, int m_p) {
  if (m_p < 1) throw std::invalid_argument("source_specific_subspace: m_p must be >= 1");
  require_same_grid(G_tilde.grid(), P_d.grid(), "source_specific_subspace");
  DiscretizedOperator G_p = compose(compose(P_d, G_tilde), P_d);
  G_p.kernel() = 0.5 * (G_p.kernel() + G_p.kernel().transpose()).eval();
  EigenSystem es = eigendecompose(G_p, m_p);
  if (es.eigenvalues[m_p - 1] <= 1e-10) {
    throw NumericalError("source_specific_subspace: eigenvalue " + std::to_string(m_p) + " of G_p is " +
                         std::to_string(es.eigenvalues[m_p - 1]) + " (degenerate specific subspace)");
  }
  DiscretizedOperator P_p = DiscretizedOperator::zero(G_p.grid());
  for (int nu = 0; nu < m_p; ++nu) P_p.add_outer(es.eigenfunctions[nu], 1.0);
  return P_p;
}

// Refined per-source projector P = P_s + P_p; requires the two parts to be
// orthogonal. The orthogonality measure is the largest singular value of
// P_s P_p, computed through the symmetric product P_s P_p P_s.
inline DiscretizedOperator refined_projection(const DiscretizedOperator& P_s, const DiscretizedOperator& P_p) {
  require_same_grid(P_s.grid(), P_p.grid(), "refined_projection");
  const double cross = std::sqrt(std::max(0.0, op_norm(compose(compose(P_s, P_p), P_s))));
  if (cross > 1e-6) {
    throw NumericalError("refined_projection: shared and specific parts are not orthogonal (|P_s P_p| = " +
                         std::to_string(cross) + ")");
  }
  return P_s + P_p;
}

// Assumption-2 eigengap diagnostic: d = 1 - |(1/n_t) sum_k n_k P_p^[k]|_op,
// clamped to [0, 1]. Sources without a specific part contribute zero
// operators (their weight still enters n_t).
inline double eigengap_d(const std::vector<WeightedProjector>& private_projectors) {
  if (private_projectors.empty()) throw std::invalid_argument("eigengap_d: no projectors");
  long n_t = 0;
  for (const auto& s : private_projectors) {
    if (s.n < 1) throw std::invalid_argument("eigengap_d: sample sizes must be positive");
    require_same_grid(private_projectors.front().projector.grid(), s.projector.grid(), "eigengap_d");
    n_t += s.n;
  }
  DiscretizedOperator acc = DiscretizedOperator::zero(private_projectors.front().projector.grid());
  for (const auto& s : private_projectors) {
    acc.kernel() += (static_cast<double>(s.n) / static_cast<double>(n_t)) * s.projector.kernel();
  }
  return std::clamp(1.0 - op_norm(acc), 0.0, 1.0);
}

// One source's inputs to the integration step.
struct SourceInput {
  std::string source_id;
  long n = 0;
  int m = 0;
  DiscretizedOperator projector;   // P~^[k], rank m
  DiscretizedOperator covariance;  // smoothed G~^[k]
};

struct SourceDecomposition {
  std::string source_id;
  std::optional<DiscretizedOperator> P_d;
  std::optional<DiscretizedOperator> P_p;
  DiscretizedOperator P_refined;
};

struct IntegrationResult {
  DiscretizedOperator P_w;
  EigenSystem P_w_spectrum;
  int m_s = 0;
  DiscretizedOperator P_s;
  std::vector<SourceDecomposition> per_source;
};

// Full integration pass over fitted sources: pooled projector, shared rank,
// shared projector, and per-source residual/specific/refined projectors.
// Sources whose rank equals m_s carry no specific part; their refined
// projector is P_s itself.
inline IntegrationResult integrate_sources(const std::vector<SourceInput>& sources, const SharedRankRule& rule) {
  if (sources.empty()) throw std::invalid_argument("integrate_sources: no sources");
  std::vector<WeightedProjector> wp;
  wp.reserve(sources.size());
  int m_min = sources.front().m;
  for (const auto& s : sources) {
    if (s.m < 1) throw std::invalid_argument("integrate_sources: source rank must be >= 1");
    m_min = std::min(m_min, s.m);
    wp.push_back(WeightedProjector{s.projector, s.n});
  }

  IntegrationResult out;
  out.P_w = pooled_projection(wp);

  {
    const int g = out.P_w.grid()->size();
    EigenSystem probe = eigendecompose(out.P_w, g);
    std::vector<double> spectrum(probe.eigenvalues.data(), probe.eigenvalues.data() + g);
    for (double& v : spectrum) v = std::clamp(v, 0.0, 1.0);
    out.m_s = shared_rank(spectrum, m_min, rule);
  }
  if (out.m_s > m_min) {
    throw NumericalError("integrate_sources: selected shared rank " + std::to_string(out.m_s) +
                         " exceeds the smallest source rank " + std::to_string(m_min));
  }

  SharedProjection sp = shared_projection(out.P_w, out.m_s);
  out.P_s = std::move(sp.P_s);
  out.P_w_spectrum = std::move(sp.spectrum);

  out.per_source.reserve(sources.size());
  for (const auto& s : sources) {
    SourceDecomposition dec;
    dec.source_id = s.source_id;
    if (s.m > out.m_s) {
      dec.P_d = residual_projector(s.projector, out.P_s, s.m, out.m_s);
      dec.P_p = source_specific_subspace(s.covariance, *dec.P_d, s.m - out.m_s);
      dec.P_refined = refined_projection(out.P_s, *dec.P_p);
    } else {
      dec.P_refined = out.P_s;
    }
    out.per_source.push_back(std::move(dec));
  }
  return out;
}

}  // namespace mfpca
