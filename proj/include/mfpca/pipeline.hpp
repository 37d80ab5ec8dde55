#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "mfpca/grid.hpp"
#include "mfpca/smoother.hpp"
#include "mfpca/spectral.hpp"

namespace mfpca {

// How bandwidths are chosen for one source fit.
struct BandwidthPolicy {
  bool cv = true;
  double fixed_h = 0.0;

  static BandwidthPolicy cross_validated() { return BandwidthPolicy{}; }
  static BandwidthPolicy fixed(double h) {
    if (h <= 0.0) throw std::invalid_argument("BandwidthPolicy::fixed: bandwidth must be positive");
    return BandwidthPolicy{false, h};
  }
};

struct PipelineOptions {
  BandwidthPolicy bandwidth;
  std::vector<double> ladder = default_bandwidth_ladder();
  int cv_folds = 10;
  std::size_t cv_eval_cap = 2000;
  RankRule rank_rule = RankRule::fve(0.95);
};

// Everything estimated from one source: mean, covariance, noise level and
// the FPCA of the covariance.
struct FittedSource {
  SourceFPCA fpca;
  DiscretizedOperator covariance;
  GridFunction mean;
  double mean_bandwidth = 0.0;
  double cov_bandwidth = 0.0;
};

// mean -> raw products -> covariance surface -> noise variance -> FPCA.
// cv_seed drives only the cross-validation partitions and subsampling.
inline FittedSource fit_source(const SourceSample& sample, const GridPtr& grid, const PipelineOptions& options,
                               std::uint64_t cv_seed) {
  FittedSource out;
  out.mean_bandwidth = options.bandwidth.cv
                           ? select_mean_bandwidth(sample, options.ladder, options.cv_folds,
                                                   derive_seed(cv_seed, 1, 0), grid, options.cv_eval_cap)
                           : options.bandwidth.fixed_h;
  out.mean = estimate_mean(sample, grid, out.mean_bandwidth);

  std::vector<RawCovPoint> points = raw_covariance_points(sample, out.mean);
  out.cov_bandwidth = options.bandwidth.cv
                          ? select_bandwidth(points, options.ladder, options.cv_folds,
                                             derive_seed(cv_seed, 2, 0), grid, options.cv_eval_cap)
                          : options.bandwidth.fixed_h;
  out.covariance = smooth_covariance(std::move(points), grid, out.cov_bandwidth);

  // The diagonal-difference noise estimate carries an O(h^2) curvature bias,
  // so its own smoothing step is capped below the surface bandwidth.
  const double sigma2 =
      estimate_error_variance(sample, out.mean, out.covariance, std::min(out.cov_bandwidth, 0.05));
  out.fpca = fit_fpca(out.covariance, options.rank_rule);
  out.fpca.source_id = sample.source_id;
  out.fpca.n = static_cast<long>(sample.subjects.size());
  out.fpca.sigma2 = sigma2;
  return out;
}

}  // namespace mfpca
