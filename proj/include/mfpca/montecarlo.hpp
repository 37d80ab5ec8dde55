#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mfpca/errors.hpp"
#include "mfpca/integrate.hpp"
#include "mfpca/pipeline.hpp"
#include "mfpca/simulate.hpp"

namespace mfpca {

enum class Estimator { multi, oracle1 };

struct EstimatorSet {
  bool multi = true;
  bool oracle1 = true;
};

struct MonteCarloOptions {
  PipelineOptions pipeline;  // rank_rule is ignored: simulation fixes true ranks
  SharedRankRule shared_rule;
  EstimatorSet estimators;
  int jobs = 1;
};

struct MetricRow {
  std::string scenario;
  std::vector<long> n;  // per-source sample sizes
  int N = 0;
  std::string target;     // shared | specific | entire
  std::string estimator;  // multi | oracle1
  std::string norm;       // op | hs
  double mean = 0.0;
  double sd = 0.0;
  int M = 0;
  int excluded = 0;
};

// Compact, locale-independent float formatting for CSV output.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return std::string(buf);
}

struct MetricsTable {
  std::vector<MetricRow> rows;

  // Columns are fixed at three sources; scenarios with fewer leave the
  // trailing sample-size fields empty.
  std::string to_csv() const {
    std::ostringstream os;
    os << "scenario,n1,n2,n3,N,target,estimator,norm,mean,sd,M,excluded\n";
    for (const auto& r : rows) {
      os << r.scenario;
      for (std::size_t k = 0; k < 3; ++k) {
        os << ',';
        if (k < r.n.size()) os << r.n[k];
      }
      os << ',' << r.N << ',' << r.target << ',' << r.estimator << ',' << r.norm << ','
         << format_double(r.mean) << ',' << format_double(r.sd) << ',' << r.M << ',' << r.excluded << '\n';
    }
    return os.str();
  }
};

namespace detail {

// 12 metrics per replicate: target (shared, specific, entire) x estimator
// (multi, oracle1) x norm (op, hs).
struct ReplicateOutcome {
  bool ok = false;
  std::string error;
  std::array<double, 12> value{};
  Eigen::VectorXd pooled_spectrum;  // for scree output, first replicate only
};

inline int metric_index(int target, int estimator, int norm) { return target * 4 + estimator * 2 + norm; }

struct ReplicateArtifacts {
  std::vector<FittedSource> fitted;
  IntegrationResult integration;
};

// One full replicate: generate every source, fit the pipeline with the true
// ranks, integrate, and face the result off against the population truth.
inline ReplicateOutcome run_replicate(const ScenarioConfig& config, const PopulationOperators& pop,
                                      const MonteCarloOptions& options, int replicate,
                                      ReplicateArtifacts* keep = nullptr) {
  ReplicateOutcome out;
  try {
    const std::size_t K = config.sources.size();
    std::vector<FittedSource> fitted;
    fitted.reserve(K);
    std::vector<SourceInput> inputs;
    inputs.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
      const SourceSpec& spec = config.sources[k];
      Rng rng = Rng::substream(config.seed, 2 * static_cast<std::uint64_t>(replicate), k);
      const SourceSample sample = generate_source(spec, config.grid, rng);
      PipelineOptions popt = options.pipeline;
      popt.rank_rule = RankRule::fixed(spec.rank());
      const std::uint64_t cv_seed = derive_seed(config.seed, 2 * static_cast<std::uint64_t>(replicate) + 1, k);
      fitted.push_back(fit_source(sample, config.grid, popt, cv_seed));
      inputs.push_back(SourceInput{spec.source_id, static_cast<long>(sample.subjects.size()), fitted[k].fpca.m,
                                   fitted[k].fpca.projector, fitted[k].covariance});
    }

    IntegrationResult integration = integrate_sources(inputs, options.shared_rule);

    const DiscretizedOperator zero = DiscretizedOperator::zero(config.grid);
    const DiscretizedOperator& true_Ps = pop.P_s;
    const DiscretizedOperator& true_Pp1 = pop.P_p[0];
    const DiscretizedOperator true_P1 = pop.P_s + pop.P_p[0];

    const auto record = [&out](int target, int estimator, const DiscretizedOperator& est,
                               const DiscretizedOperator& truth) {
      const DiscretizedOperator diff = est - truth;
      out.value[metric_index(target, estimator, 0)] = op_norm(diff);
      out.value[metric_index(target, estimator, 1)] = hs_norm(diff);
    };

    if (options.estimators.multi) {
      const SourceDecomposition& dec1 = integration.per_source[0];
      const DiscretizedOperator& est_Pp1 = dec1.P_p ? *dec1.P_p : zero;
      record(0, 0, integration.P_s, true_Ps);
      record(1, 0, est_Pp1, true_Pp1);
      record(2, 0, dec1.P_refined, true_P1);
    }
    if (options.estimators.oracle1) {
      const OracleProjectors oracle = oracle_single_source(fitted[0].fpca, config.sources[0].shared_indices);
      record(0, 1, oracle.P_s, true_Ps);
      record(1, 1, oracle.P_p, true_Pp1);
      record(2, 1, oracle.P_s + oracle.P_p, true_P1);
    }

    out.pooled_spectrum = integration.P_w_spectrum.eigenvalues;
    if (keep) {
      keep->fitted = std::move(fitted);
      keep->integration = std::move(integration);
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

}  // namespace detail

struct MonteCarloResult {
  MetricsTable table;
  int excluded = 0;
  std::vector<std::string> errors;        // one message per excluded replicate
  Eigen::VectorXd first_pooled_spectrum;  // spectrum of P_w from replicate 0
};

// Monte Carlo study over M replicates. Replicates are independent and may
// run on a worker pool; every replicate writes into its own slot of a
// preallocated buffer, so the aggregate is byte-identical for any job
// count. More than 5% failed replicates aborts the run.
inline MonteCarloResult run_monte_carlo(const ScenarioConfig& config, int M, const MonteCarloOptions& options) {
  if (M < 1) throw std::invalid_argument("run_monte_carlo: M must be >= 1");
  validate_config(config);
  const PopulationOperators pop = population_operators(config);

  std::vector<detail::ReplicateOutcome> outcomes(static_cast<std::size_t>(M));
  const int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    for (int r = 0; r < M; ++r) outcomes[static_cast<std::size_t>(r)] = detail::run_replicate(config, pop, options, r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&]() {
        for (;;) {
          const int r = next.fetch_add(1);
          if (r >= M) return;
          outcomes[static_cast<std::size_t>(r)] = detail::run_replicate(config, pop, options, r);
        }
      });
    }
    for (auto& t : workers) t.join();
  }

  MonteCarloResult result;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++result.excluded;
      result.errors.push_back(o.error);
    }
  }
  const int kept = M - result.excluded;
  if (result.excluded > 0.05 * M || kept == 0) {
    throw NumericalError("run_monte_carlo: " + std::to_string(result.excluded) + " of " + std::to_string(M) +
                         " replicates failed (first error: " + (result.errors.empty() ? "" : result.errors.front()) +
                         ")");
  }
  for (const auto& o : outcomes) {
    if (o.ok) {
      result.first_pooled_spectrum = o.pooled_spectrum;
      break;
    }
  }

  std::vector<long> sizes;
  int N = 0;
  for (const auto& src : config.sources) {
    sizes.push_back(src.n);
    N = src.N;
  }

  static const char* kTargets[] = {"shared", "specific", "entire"};
  static const char* kEstimators[] = {"multi", "oracle1"};
  static const char* kNorms[] = {"op", "hs"};
  for (int t = 0; t < 3; ++t) {
    for (int e = 0; e < 2; ++e) {
      if ((e == 0 && !options.estimators.multi) || (e == 1 && !options.estimators.oracle1)) continue;
      for (int nrm = 0; nrm < 2; ++nrm) {
        double sum = 0.0;
        for (const auto& o : outcomes) {
          if (o.ok) sum += o.value[detail::metric_index(t, e, nrm)];
        }
        const double mean = sum / kept;
        double ss = 0.0;
        for (const auto& o : outcomes) {
          if (o.ok) {
            const double dev = o.value[detail::metric_index(t, e, nrm)] - mean;
            ss += dev * dev;
          }
        }
        const double sd = kept > 1 ? std::sqrt(ss / (kept - 1)) : 0.0;
        result.table.rows.push_back(MetricRow{config.name, sizes, N, kTargets[t], kEstimators[e], kNorms[nrm],
                                              mean, sd, M, result.excluded});
      }
    }
  }
  return result;
}

}  // namespace mfpca
