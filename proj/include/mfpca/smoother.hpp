#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mfpca/errors.hpp"
#include "mfpca/grid.hpp"
#include "mfpca/operators.hpp"
#include "mfpca/rng.hpp"

namespace mfpca {

// Longitudinal observations of one subject: Y_ij observed at time T_ij.
struct SubjectRecord {
  std::string subject_id;
  std::vector<double> times;
  std::vector<double> values;
};

struct SourceSample {
  std::string source_id;
  std::vector<SubjectRecord> subjects;

  std::size_t total_observations() const {
    std::size_t n = 0;
    for (const auto& s : subjects) n += s.times.size();
    return n;
  }
};

// One off-diagonal product of centered observations from a single subject:
// c = (Y_ij - mu(s)) (Y_il - mu(t)) with s = T_ij, t = T_il, j != l.
// subject is the index of the subject within its source sample; it is the
// blocking unit for cross-validation.
struct RawCovPoint {
  double s;
  double t;
  double c;
  int subject;
};

// Number of times a singular local fit doubles its bandwidth before failing.
inline constexpr int kMaxWidenings = 3;
// Relative determinant threshold below which a local design is singular.
inline constexpr double kSingularTol = 1e-10;
// Two CV scores tie when they differ by no more than this fraction of the
// mean squared response; ties resolve to the larger bandwidth.
inline constexpr double kCvTieTol = 1e-9;

namespace detail {

inline double epanechnikov(double u) {
  const double v = 1.0 - u * u;
  return v > 0.0 ? 0.75 * v : 0.0;
}

// --- 1-D binned local-linear machinery -----------------------------------
//
// Raw observations are pooled into the Voronoi cells of the grid points.
// Each cell keeps (count, sum t, sum y); the local-linear fit then runs on
// the cell centroids with weight kernel * count. Because the fit is exact
// for linear functions and a cell's centroid response is the average of its
// responses, binning preserves exact reproduction of constant and linear
// data while reducing the design size from O(raw points) to O(grid).

struct Bins1D {
  GridPtr grid;
  Eigen::ArrayXd W, St, Sy;

  explicit Bins1D(GridPtr g)
      : grid(std::move(g)),
        W(Eigen::ArrayXd::Zero(grid->size())),
        St(Eigen::ArrayXd::Zero(grid->size())),
        Sy(Eigen::ArrayXd::Zero(grid->size())) {}

  void add(double t, double y) {
    const int b = grid->nearest(t);
    W[b] += 1.0;
    St[b] += t;
    Sy[b] += y;
  }

  void add(const Bins1D& o) {
    W += o.W;
    St += o.St;
    Sy += o.Sy;
  }
};

// Local-linear fit at t0 from 1-D bins. Returns NaN when the design is
// singular at the given bandwidth (callers widen or error).
inline double ll1_try(const Bins1D& bins, double t0, double h) {
  const Eigen::VectorXd& p = bins.grid->points();
  const int n = bins.grid->size();
  double maxgap = 0.0;
  for (int i = 1; i < n; ++i) maxgap = std::max(maxgap, p[i] - p[i - 1]);
  const int lo = bins.grid->lower_index(t0 - h - maxgap);
  double S0 = 0, S1 = 0, S2 = 0, R0 = 0, R1 = 0;
  for (int i = lo; i < n && p[i] <= t0 + h + maxgap; ++i) {
    const double w = bins.W[i];
    if (w <= 0.0) continue;
    const double u = (bins.St[i] / w - t0) / h;
    const double k = epanechnikov(u);
    if (k <= 0.0) continue;
    const double kw = k * w;
    S0 += kw;
    S1 += kw * u;
    S2 += kw * u * u;
    R0 += k * bins.Sy[i];
    R1 += k * bins.Sy[i] * u;
  }
  const double det = S0 * S2 - S1 * S1;
  if (!(S0 > 0.0) || !(det > kSingularTol * S0 * S2) || !(det > 1e-300)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return (S2 * R0 - S1 * R1) / det;
}

inline double ll1_fit(const Bins1D& bins, double t0, double h, const char* what) {
  for (int w = 0; w <= kMaxWidenings; ++w) {
    const double v = ll1_try(bins, t0, h * static_cast<double>(1 << w));
    if (!std::isnan(v)) return v;
  }
  throw NumericalError(std::string(what) + ": singular local fit at t = " + std::to_string(t0) +
                       " (too few distinct times in window)");
}

// --- 2-D binned local-linear machinery -----------------------------------

struct Bins2D {
  GridPtr grid;
  Eigen::ArrayXd W, Ss, St, Sc;

  explicit Bins2D(GridPtr g)
      : grid(std::move(g)),
        W(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(grid->size()) * grid->size())),
        Ss(Eigen::ArrayXd::Zero(W.size())),
        St(Eigen::ArrayXd::Zero(W.size())),
        Sc(Eigen::ArrayXd::Zero(W.size())) {}

  void add(const RawCovPoint& p) {
    const int g = grid->size();
    const Eigen::Index b = static_cast<Eigen::Index>(grid->nearest(p.s)) * g + grid->nearest(p.t);
    W[b] += 1.0;
    Ss[b] += p.s;
    St[b] += p.t;
    Sc[b] += p.c;
  }

  void add(const Bins2D& o) {
    W += o.W;
    Ss += o.Ss;
    St += o.St;
    Sc += o.Sc;
  }
};

// Local-linear plane fit at (a, b); NaN on singular design.
inline double ll2_try(const Bins2D& bins, double a, double b, double h) {
  const Eigen::VectorXd& p = bins.grid->points();
  const int g = bins.grid->size();
  double maxgap = 0.0;
  for (int i = 1; i < g; ++i) maxgap = std::max(maxgap, p[i] - p[i - 1]);
  const int slo = bins.grid->lower_index(a - h - maxgap);
  const int tlo = bins.grid->lower_index(b - h - maxgap);
  double S00 = 0, S10 = 0, S01 = 0, S20 = 0, S11 = 0, S02 = 0;
  double R0 = 0, R1 = 0, R2 = 0;
  for (int i = slo; i < g && p[i] <= a + h + maxgap; ++i) {
    const Eigen::Index row = static_cast<Eigen::Index>(i) * g;
    for (int j = tlo; j < g && p[j] <= b + h + maxgap; ++j) {
      const double w = bins.W[row + j];
      if (w <= 0.0) continue;
      const double us = (bins.Ss[row + j] / w - a) / h;
      const double ks = epanechnikov(us);
      if (ks <= 0.0) continue;
      const double ut = (bins.St[row + j] / w - b) / h;
      const double kt = epanechnikov(ut);
      if (kt <= 0.0) continue;
      const double k = ks * kt;
      const double kw = k * w;
      S00 += kw;
      S10 += kw * us;
      S01 += kw * ut;
      S20 += kw * us * us;
      S11 += kw * us * ut;
      S02 += kw * ut * ut;
      const double kc = k * bins.Sc[row + j];
      R0 += kc;
      R1 += kc * us;
      R2 += kc * ut;
    }
  }
  const double det = S00 * (S20 * S02 - S11 * S11) - S10 * (S10 * S02 - S11 * S01) +
                     S01 * (S10 * S11 - S20 * S01);
  if (!(S00 > 0.0) || !(det > kSingularTol * S00 * S20 * S02) || !(det > 1e-300)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double det0 = R0 * (S20 * S02 - S11 * S11) - S10 * (R1 * S02 - S11 * R2) +
                      S01 * (R1 * S11 - S20 * R2);
  return det0 / det;
}

inline double ll2_fit(const Bins2D& bins, double a, double b, double h, const char* what) {
  for (int w = 0; w <= kMaxWidenings; ++w) {
    const double v = ll2_try(bins, a, b, h * static_cast<double>(1 << w));
    if (!std::isnan(v)) return v;
  }
  throw NumericalError(std::string(what) + ": singular local fit at (" + std::to_string(a) + ", " +
                       std::to_string(b) + ") after bandwidth widening");
}

inline double ll2_fit_or_nan(const Bins2D& bins, double a, double b, double h) {
  for (int w = 0; w <= kMaxWidenings; ++w) {
    const double v = ll2_try(bins, a, b, h * static_cast<double>(1 << w));
    if (!std::isnan(v)) return v;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

// Deterministic subject-blocked fold assignment: subjects (identified by
// index 0..num_subjects-1 in order of first appearance) are shuffled with
// the derived stream of `seed` and dealt round-robin into `folds` folds.
// Exposed so callers can reproduce the exact CV partition.
inline std::vector<int> cv_fold_assignment(int num_subjects, int folds, std::uint64_t seed) {
  if (num_subjects < 1) throw std::invalid_argument("cv_fold_assignment: no subjects");
  if (folds < 2) throw std::invalid_argument("cv_fold_assignment: need at least 2 folds");
  std::vector<int> order(num_subjects);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::substream(seed, 0xF01D, 0);
  for (int i = num_subjects - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<int> fold(num_subjects);
  for (int i = 0; i < num_subjects; ++i) fold[order[i]] = i % folds;
  return fold;
}

// Local-linear estimate of the mean function on the grid, pooling all
// observations of the sample. Epanechnikov kernel; singular local designs
// widen the bandwidth up to kMaxWidenings doublings before failing.
inline GridFunction estimate_mean(const SourceSample& sample, const GridPtr& grid, double bandwidth) {
  if (bandwidth <= 0.0) throw std::invalid_argument("estimate_mean: bandwidth must be positive");
  std::size_t total = sample.total_observations();
  if (total < 2) throw std::invalid_argument("estimate_mean: need at least 2 observations");
  detail::Bins1D bins(grid);
  for (const auto& subj : sample.subjects) {
    if (subj.times.size() != subj.values.size()) {
      throw DataError("estimate_mean: subject '" + subj.subject_id + "' has mismatched times/values");
    }
    for (std::size_t j = 0; j < subj.times.size(); ++j) bins.add(subj.times[j], subj.values[j]);
  }
  Eigen::VectorXd out(grid->size());
  for (int i = 0; i < grid->size(); ++i) {
    out[i] = detail::ll1_fit(bins, grid->points()[i], bandwidth, "estimate_mean");
  }
  return GridFunction(grid, std::move(out));
}

// All off-diagonal products of centered observations, subject by subject in
// input order. Subjects with fewer than 2 observations contribute nothing.
// Diagonal pairs (j == l) are excluded: their expectation carries the
// measurement-error variance on top of the covariance surface.
inline std::vector<RawCovPoint> raw_covariance_points(const SourceSample& sample, const GridFunction& mean) {
  std::size_t count = 0;
  for (const auto& subj : sample.subjects) {
    const std::size_t n = subj.times.size();
    if (n >= 2) count += n * (n - 1);
  }
  std::vector<RawCovPoint> points;
  points.reserve(count);
  for (int si = 0; si < static_cast<int>(sample.subjects.size()); ++si) {
    const auto& subj = sample.subjects[si];
    const std::size_t n = subj.times.size();
    if (n < 2) continue;
    std::vector<double> resid(n);
    for (std::size_t j = 0; j < n; ++j) resid[j] = subj.values[j] - mean.at(subj.times[j]);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t l = 0; l < n; ++l) {
        if (j == l) continue;
        points.push_back(RawCovPoint{subj.times[j], subj.times[l], resid[j] * resid[l], si});
      }
    }
  }
  return points;
}

namespace detail {

// Canonical binning: points are grouped by cell (counting sort) and sorted
// by value within each cell before accumulation, so the resulting sums are
// bitwise-independent of the input order.
inline Bins2D bin_canonical(std::vector<RawCovPoint>&& points, const GridPtr& grid) {
  const int g = grid->size();
  const std::size_t nbins = static_cast<std::size_t>(g) * g;
  std::vector<std::uint32_t> bin_of(points.size());
  std::vector<std::size_t> count(nbins + 1, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::uint32_t b = static_cast<std::uint32_t>(grid->nearest(points[i].s)) * g + grid->nearest(points[i].t);
    bin_of[i] = b;
    ++count[b + 1];
  }
  std::partial_sum(count.begin(), count.end(), count.begin());
  std::vector<RawCovPoint> sorted(points.size());
  {
    std::vector<std::size_t> cursor(count.begin(), count.end() - 1);
    for (std::size_t i = 0; i < points.size(); ++i) sorted[cursor[bin_of[i]]++] = points[i];
  }
  points.clear();
  points.shrink_to_fit();
  const auto value_less = [](const RawCovPoint& a, const RawCovPoint& b) {
    if (a.s != b.s) return a.s < b.s;
    if (a.t != b.t) return a.t < b.t;
    if (a.c != b.c) return a.c < b.c;
    return a.subject < b.subject;
  };
  Bins2D bins(grid);
  for (std::size_t b = 0; b < nbins; ++b) {
    const std::size_t lo = count[b], hi = count[b + 1];
    if (lo == hi) continue;
    std::sort(sorted.begin() + lo, sorted.begin() + hi, value_less);
    for (std::size_t i = lo; i < hi; ++i) {
      bins.W[b] += 1.0;
      bins.Ss[b] += sorted[i].s;
      bins.St[b] += sorted[i].t;
      bins.Sc[b] += sorted[i].c;
    }
  }
  return bins;
}

}  // namespace detail

// Local-linear surface estimate of the covariance kernel on grid x grid.
// Only the upper triangle is fitted; the lower triangle is mirrored, so the
// output kernel is exactly symmetric (the raw point set itself is symmetric
// in (s, t)).
inline DiscretizedOperator smooth_covariance(std::vector<RawCovPoint> points, const GridPtr& grid,
                                             double bandwidth) {
  if (bandwidth <= 0.0) throw std::invalid_argument("smooth_covariance: bandwidth must be positive");
  if (points.size() < 6) throw std::invalid_argument("smooth_covariance: need at least 6 raw points");
  const detail::Bins2D bins = detail::bin_canonical(std::move(points), grid);
  const int g = grid->size();
  Eigen::MatrixXd K(g, g);
  for (int i = 0; i < g; ++i) {
    for (int j = i; j < g; ++j) {
      const double v = detail::ll2_fit(bins, grid->points()[i], grid->points()[j], bandwidth, "smooth_covariance");
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return DiscretizedOperator(grid, std::move(K));
}

// Subject-blocked K-fold cross-validation over a bandwidth ladder for the
// covariance smoother. The score of a candidate is the mean squared
// prediction error over held-out raw points (capped per fold by a seeded
// reservoir subsample); candidates whose scores tie within kCvTieTol of the
// best resolve to the larger bandwidth. A candidate whose local fits stay
// singular after widening scores infinity.
inline double select_bandwidth(const std::vector<RawCovPoint>& points, const std::vector<double>& candidates,
                               int folds, std::uint64_t seed, GridPtr grid = nullptr,
                               std::size_t eval_cap_per_fold = 4000) {
  if (candidates.empty()) throw std::invalid_argument("select_bandwidth: empty candidate list");
  for (double h : candidates) {
    if (h <= 0.0) throw std::invalid_argument("select_bandwidth: candidate bandwidths must be positive");
  }
  if (points.empty()) throw std::invalid_argument("select_bandwidth: no raw points");
  if (!grid) grid = Grid::uniform(101);

  // Subject ids -> dense indices in order of first appearance.
  std::unordered_map<int, int> subject_index;
  for (const auto& p : points) subject_index.emplace(p.subject, static_cast<int>(subject_index.size()));
  const int nsubj = static_cast<int>(subject_index.size());
  const int eff_folds = std::min(folds, nsubj);
  if (eff_folds < 2) throw std::invalid_argument("select_bandwidth: need at least 2 subjects for blocked CV");
  const std::vector<int> fold_of_subject = cv_fold_assignment(nsubj, eff_folds, seed);

  // Per-fold bin totals, accumulated in input order (CV scores are a
  // deterministic function of the point list, folds and seed).
  std::vector<detail::Bins2D> fold_bins;
  fold_bins.reserve(eff_folds);
  for (int f = 0; f < eff_folds; ++f) fold_bins.emplace_back(grid);
  for (const auto& p : points) fold_bins[fold_of_subject[subject_index.at(p.subject)]].add(p);

  // Complement bins: everything except the held-out fold.
  std::vector<detail::Bins2D> train_bins;
  train_bins.reserve(eff_folds);
  for (int f = 0; f < eff_folds; ++f) {
    detail::Bins2D acc(grid);
    for (int u = 0; u < eff_folds; ++u) {
      if (u != f) acc.add(fold_bins[u]);
    }
    train_bins.push_back(std::move(acc));
  }

  // Held-out evaluation points: seeded reservoir per fold.
  std::vector<std::vector<RawCovPoint>> eval(eff_folds);
  std::vector<std::size_t> seen(eff_folds, 0);
  std::vector<Rng> rngs;
  rngs.reserve(eff_folds);
  for (int f = 0; f < eff_folds; ++f) rngs.push_back(Rng::substream(seed, 0xE7A1, static_cast<std::uint64_t>(f)));
  for (const auto& p : points) {
    const int f = fold_of_subject[subject_index.at(p.subject)];
    if (eval[f].size() < eval_cap_per_fold) {
      eval[f].push_back(p);
    } else {
      const std::uint64_t j = rngs[f].below(++seen[f] + eval_cap_per_fold);
      if (j < eval_cap_per_fold) eval[f][static_cast<std::size_t>(j)] = p;
    }
  }

  double response_scale = 0.0;
  std::size_t neval = 0;
  for (int f = 0; f < eff_folds; ++f) {
    for (const auto& p : eval[f]) {
      response_scale += p.c * p.c;
      ++neval;
    }
  }
  if (neval == 0) throw std::invalid_argument("select_bandwidth: no evaluation points");
  response_scale /= static_cast<double>(neval);

  double best_score = std::numeric_limits<double>::infinity();
  double best_h = candidates.front();
  for (double h : candidates) {
    double sse = 0.0;
    bool ok = true;
    for (int f = 0; f < eff_folds && ok; ++f) {
      for (const auto& p : eval[f]) {
        const double pred = detail::ll2_fit_or_nan(train_bins[f], p.s, p.t, h);
        if (std::isnan(pred)) {
          ok = false;
          break;
        }
        const double r = pred - p.c;
        sse += r * r;
      }
    }
    const double score = ok ? sse / static_cast<double>(neval) : std::numeric_limits<double>::infinity();
    const double tie = kCvTieTol * std::max(response_scale, 1e-300);
    if (score < best_score - tie || (score <= best_score + tie && h > best_h)) {
      best_score = std::min(score, best_score);
      best_h = h;
    }
  }
  if (!std::isfinite(best_score)) {
    throw NumericalError("select_bandwidth: all candidate bandwidths produced singular fits");
  }
  return best_h;
}

// Same blocked-CV scheme for the 1-D mean smoother.
inline double select_mean_bandwidth(const SourceSample& sample, const std::vector<double>& candidates,
                                    int folds, std::uint64_t seed, GridPtr grid = nullptr,
                                    std::size_t eval_cap_per_fold = 4000) {
  if (candidates.empty()) throw std::invalid_argument("select_mean_bandwidth: empty candidate list");
  for (double h : candidates) {
    if (h <= 0.0) throw std::invalid_argument("select_mean_bandwidth: candidate bandwidths must be positive");
  }
  if (!grid) grid = Grid::uniform(101);
  const int nsubj = static_cast<int>(sample.subjects.size());
  const int eff_folds = std::min(folds, nsubj);
  if (eff_folds < 2) throw std::invalid_argument("select_mean_bandwidth: need at least 2 subjects");
  const std::vector<int> fold_of = cv_fold_assignment(nsubj, eff_folds, seed);

  std::vector<detail::Bins1D> fold_bins;
  fold_bins.reserve(eff_folds);
  for (int f = 0; f < eff_folds; ++f) fold_bins.emplace_back(grid);
  struct Obs {
    double t, y;
  };
  std::vector<std::vector<Obs>> eval(eff_folds);
  std::vector<std::size_t> seen(eff_folds, 0);
  std::vector<Rng> rngs;
  rngs.reserve(eff_folds);
  for (int f = 0; f < eff_folds; ++f) rngs.push_back(Rng::substream(seed, 0xE7A2, static_cast<std::uint64_t>(f)));
  for (int si = 0; si < nsubj; ++si) {
    const auto& subj = sample.subjects[si];
    const int f = fold_of[si];
    for (std::size_t j = 0; j < subj.times.size(); ++j) {
      fold_bins[f].add(subj.times[j], subj.values[j]);
      if (eval[f].size() < eval_cap_per_fold) {
        eval[f].push_back(Obs{subj.times[j], subj.values[j]});
      } else {
        const std::uint64_t r = rngs[f].below(++seen[f] + eval_cap_per_fold);
        if (r < eval_cap_per_fold) eval[f][static_cast<std::size_t>(r)] = Obs{subj.times[j], subj.values[j]};
      }
    }
  }

  std::vector<detail::Bins1D> train_bins;
  train_bins.reserve(eff_folds);
  for (int f = 0; f < eff_folds; ++f) {
    detail::Bins1D acc(grid);
    for (int u = 0; u < eff_folds; ++u) {
      if (u != f) acc.add(fold_bins[u]);
    }
    train_bins.push_back(std::move(acc));
  }

  double response_scale = 0.0;
  std::size_t neval = 0;
  for (int f = 0; f < eff_folds; ++f) {
    for (const auto& o : eval[f]) {
      response_scale += o.y * o.y;
      ++neval;
    }
  }
  if (neval == 0) throw std::invalid_argument("select_mean_bandwidth: no evaluation points");
  response_scale /= static_cast<double>(neval);

  double best_score = std::numeric_limits<double>::infinity();
  double best_h = candidates.front();
  for (double h : candidates) {
    double sse = 0.0;
    bool ok = true;
    for (int f = 0; f < eff_folds && ok; ++f) {
      for (const auto& o : eval[f]) {
        double pred = std::numeric_limits<double>::quiet_NaN();
        for (int w = 0; w <= kMaxWidenings && std::isnan(pred); ++w) {
          pred = detail::ll1_try(train_bins[f], o.t, h * static_cast<double>(1 << w));
        }
        if (std::isnan(pred)) {
          ok = false;
          break;
        }
        const double r = pred - o.y;
        sse += r * r;
      }
    }
    const double score = ok ? sse / static_cast<double>(neval) : std::numeric_limits<double>::infinity();
    const double tie = kCvTieTol * std::max(response_scale, 1e-300);
    if (score < best_score - tie || (score <= best_score + tie && h > best_h)) {
      best_score = std::min(score, best_score);
      best_h = h;
    }
  }
  if (!std::isfinite(best_score)) {
    throw NumericalError("select_mean_bandwidth: all candidate bandwidths produced singular fits");
  }
  return best_h;
}

// Measurement-error variance: smooth the squared centered observations along
// the diagonal and integrate the excess over the fitted covariance diagonal.
// Negative estimates truncate to zero.
inline double estimate_error_variance(const SourceSample& sample, const GridFunction& mean,
                                      const DiscretizedOperator& cov, double bandwidth) {
  if (bandwidth <= 0.0) throw std::invalid_argument("estimate_error_variance: bandwidth must be positive");
  require_same_grid(mean.grid, cov.grid(), "estimate_error_variance");
  const GridPtr& grid = cov.grid();
  detail::Bins1D bins(grid);
  std::size_t total = 0;
  for (const auto& subj : sample.subjects) {
    for (std::size_t j = 0; j < subj.times.size(); ++j) {
      const double r = subj.values[j] - mean.at(subj.times[j]);
      bins.add(subj.times[j], r * r);
      ++total;
    }
  }
  if (total < 2) throw std::invalid_argument("estimate_error_variance: need at least 2 observations");
  double acc = 0.0;
  for (int i = 0; i < grid->size(); ++i) {
    const double v = detail::ll1_fit(bins, grid->points()[i], bandwidth, "estimate_error_variance");
    acc += grid->weights()[i] * (v - cov.kernel()(i, i));
  }
  return std::max(0.0, acc);
}

// Default geometric bandwidth ladder for cross-validation.
inline std::vector<double> default_bandwidth_ladder() {
  std::vector<double> out;
  for (double h = 0.05; h <= 0.4 + 1e-12; h *= 1.5) out.push_back(h);
  return out;
}

}  // namespace mfpca
