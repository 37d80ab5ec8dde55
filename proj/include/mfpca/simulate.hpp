#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mfpca/errors.hpp"
#include "mfpca/grid.hpp"
#include "mfpca/operators.hpp"
#include "mfpca/rng.hpp"
#include "mfpca/smoother.hpp"
#include "mfpca/spectral.hpp"

namespace mfpca {

// Fourier basis on [0,1]: phi_1 = 1, even indices are sines, odd indices
// (>= 3) are cosines; all orthonormal in L2[0,1].
inline double fourier_basis(int nu, double t) {
  if (nu < 1) throw std::invalid_argument("fourier_basis: index must be >= 1");
  if (nu == 1) return 1.0;
  const double sqrt2 = std::numbers::sqrt2;
  if (nu % 2 == 0) return sqrt2 * std::sin(nu * std::numbers::pi * t);
  return sqrt2 * std::cos((nu - 1) * std::numbers::pi * t);
}

// A unit-norm function expressed in the Fourier basis.
struct EigenfunctionRecipe {
  std::vector<std::pair<int, double>> terms;  // (fourier index, coefficient)

  double evaluate(double t) const {
    double v = 0.0;
    for (const auto& [nu, c] : terms) v += c * fourier_basis(nu, t);
    return v;
  }
};

inline GridFunction recipe_on_grid(const EigenfunctionRecipe& recipe, const GridPtr& grid) {
  Eigen::VectorXd values(grid->size());
  for (int i = 0; i < grid->size(); ++i) values[i] = recipe.evaluate(grid->points()[i]);
  return GridFunction(grid, std::move(values));
}

// Exact inner product of two recipes via Fourier orthonormality.
inline double recipe_inner(const EigenfunctionRecipe& a, const EigenfunctionRecipe& b) {
  double v = 0.0;
  for (const auto& [nu_a, c_a] : a.terms) {
    for (const auto& [nu_b, c_b] : b.terms) {
      if (nu_a == nu_b) v += c_a * c_b;
    }
  }
  return v;
}

// One source of a synthetic scenario. shared_indices are 1-based positions
// (within the descending eigenvalue order) of the eigenfunctions spanning
// the shared subspace.
struct SourceSpec {
  std::string source_id;
  std::vector<double> eigenvalues;
  std::vector<EigenfunctionRecipe> recipes;
  double sigma2 = 0.0;
  long n = 0;
  int N = 0;
  std::vector<int> shared_indices;

  int rank() const { return static_cast<int>(recipes.size()); }
};

struct ScenarioConfig {
  std::string name;
  std::vector<SourceSpec> sources;
  GridPtr grid;
  std::uint64_t seed = 0;
};

namespace detail {

inline DiscretizedOperator projector_from_recipes(const std::vector<EigenfunctionRecipe>& recipes,
                                                  const std::vector<int>& which, const GridPtr& grid) {
  DiscretizedOperator P = DiscretizedOperator::zero(grid);
  for (int idx : which) P.add_outer(recipe_on_grid(recipes[idx - 1], grid), 1.0);
  return P;
}

}  // namespace detail

// Structural validation of a scenario: orthonormal recipes, positive
// descending eigenvalues, consistent shared index sets, and identical
// shared subspaces across sources.
inline void validate_config(const ScenarioConfig& config) {
  if (config.sources.empty()) throw std::invalid_argument("ScenarioConfig: no sources");
  if (!config.grid) throw std::invalid_argument("ScenarioConfig: no grid");
  for (const auto& src : config.sources) {
    if (src.eigenvalues.size() != src.recipes.size()) {
      throw std::invalid_argument("SourceSpec '" + src.source_id + "': eigenvalue/recipe count mismatch");
    }
    if (src.recipes.empty()) throw std::invalid_argument("SourceSpec '" + src.source_id + "': no components");
    if (src.n < 1 || src.N < 1) throw std::invalid_argument("SourceSpec '" + src.source_id + "': n and N must be positive");
    if (src.sigma2 < 0.0) throw std::invalid_argument("SourceSpec '" + src.source_id + "': negative noise variance");
    for (std::size_t i = 0; i < src.eigenvalues.size(); ++i) {
      if (src.eigenvalues[i] <= 0.0) throw std::invalid_argument("SourceSpec '" + src.source_id + "': eigenvalues must be positive");
      if (i > 0 && src.eigenvalues[i] > src.eigenvalues[i - 1]) {
        throw std::invalid_argument("SourceSpec '" + src.source_id + "': eigenvalues must be descending");
      }
    }
    for (std::size_t i = 0; i < src.recipes.size(); ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        const double want = (i == j) ? 1.0 : 0.0;
        if (std::abs(recipe_inner(src.recipes[i], src.recipes[j]) - want) > 1e-10) {
          throw std::invalid_argument("SourceSpec '" + src.source_id + "': recipes are not orthonormal");
        }
      }
    }
    for (int idx : src.shared_indices) {
      if (idx < 1 || idx > src.rank()) {
        throw std::invalid_argument("SourceSpec '" + src.source_id + "': shared index out of range");
      }
    }
  }
  const auto& first = config.sources.front();
  const DiscretizedOperator P_s0 =
      detail::projector_from_recipes(first.recipes, first.shared_indices, config.grid);
  for (std::size_t k = 1; k < config.sources.size(); ++k) {
    const auto& src = config.sources[k];
    if (src.shared_indices.size() != first.shared_indices.size()) {
      throw std::invalid_argument("ScenarioConfig: shared dimensions differ across sources");
    }
    const DiscretizedOperator P_sk = detail::projector_from_recipes(src.recipes, src.shared_indices, config.grid);
    if (op_norm(P_sk - P_s0) > 1e-8) {
      throw std::invalid_argument("ScenarioConfig: shared subspaces differ between source '" +
                                  first.source_id + "' and '" + src.source_id + "'");
    }
  }
}

// Karhunen-Loeve sampler: per subject, N uniform times, Gaussian scores
// with variances lambda_nu, Gaussian measurement errors with variance
// sigma2. Draw order is pinned (times, then scores, then errors) so output
// is a pure function of the rng stream.
inline SourceSample generate_source(const SourceSpec& spec, const GridPtr& grid, Rng& rng) {
  (void)grid;  // generation is grid-free; the parameter fixes the call shape
  SourceSample sample;
  sample.source_id = spec.source_id;
  sample.subjects.reserve(static_cast<std::size_t>(spec.n));
  const int m = spec.rank();
  const double sigma = std::sqrt(spec.sigma2);
  std::vector<double> scores(m);
  for (long i = 0; i < spec.n; ++i) {
    SubjectRecord subj;
    subj.subject_id = std::to_string(i + 1);
    subj.times.resize(spec.N);
    subj.values.resize(spec.N);
    for (int j = 0; j < spec.N; ++j) subj.times[j] = rng.uniform();
    for (int nu = 0; nu < m; ++nu) scores[nu] = std::sqrt(spec.eigenvalues[nu]) * rng.normal();
    for (int j = 0; j < spec.N; ++j) {
      double y = 0.0;
      for (int nu = 0; nu < m; ++nu) y += scores[nu] * spec.recipes[nu].evaluate(subj.times[j]);
      if (sigma > 0.0) y += sigma * rng.normal();
      subj.values[j] = y;
    }
    sample.subjects.push_back(std::move(subj));
  }
  return sample;
}

// Analytic population objects of a scenario, assembled exactly from the
// recipes on the grid.
struct PopulationOperators {
  std::vector<DiscretizedOperator> G;    // covariances
  std::vector<DiscretizedOperator> P;    // rank-m_k projectors
  DiscretizedOperator P_s;               // shared projector
  std::vector<DiscretizedOperator> P_p;  // source-specific projectors
};

inline PopulationOperators population_operators(const ScenarioConfig& config) {
  validate_config(config);
  PopulationOperators out;
  const GridPtr& grid = config.grid;
  for (const auto& src : config.sources) {
    DiscretizedOperator G = DiscretizedOperator::zero(grid);
    DiscretizedOperator P = DiscretizedOperator::zero(grid);
    DiscretizedOperator P_p = DiscretizedOperator::zero(grid);
    for (int nu = 1; nu <= src.rank(); ++nu) {
      const GridFunction f = recipe_on_grid(src.recipes[nu - 1], grid);
      G.add_outer(f, src.eigenvalues[nu - 1]);
      P.add_outer(f, 1.0);
      if (std::find(src.shared_indices.begin(), src.shared_indices.end(), nu) == src.shared_indices.end()) {
        P_p.add_outer(f, 1.0);
      }
    }
    out.G.push_back(std::move(G));
    out.P.push_back(std::move(P));
    out.P_p.push_back(std::move(P_p));
  }
  out.P_s = detail::projector_from_recipes(config.sources.front().recipes,
                                           config.sources.front().shared_indices, grid);
  return out;
}

// Single-source comparator: splits one source's estimated eigenfunctions
// into shared and specific parts using supplied (true) indices.
struct OracleProjectors {
  DiscretizedOperator P_s;
  DiscretizedOperator P_p;  // zero operator when the index set covers 1..m
};

inline OracleProjectors oracle_single_source(const SourceFPCA& fpca, const std::vector<int>& shared_indices) {
  const int m = fpca.m;
  std::vector<bool> shared(static_cast<std::size_t>(m) + 1, false);
  for (int idx : shared_indices) {
    if (idx < 1 || idx > m) {
      throw std::invalid_argument("oracle_single_source: shared index " + std::to_string(idx) +
                                  " outside 1.." + std::to_string(m));
    }
    shared[static_cast<std::size_t>(idx)] = true;
  }
  OracleProjectors out{DiscretizedOperator::zero(fpca.eigensystem.grid),
                       DiscretizedOperator::zero(fpca.eigensystem.grid)};
  for (int nu = 1; nu <= m; ++nu) {
    (shared[static_cast<std::size_t>(nu)] ? out.P_s : out.P_p)
        .add_outer(fpca.eigensystem.eigenfunctions[nu - 1], 1.0);
  }
  return out;
}

// --- Built-in scenarios ----------------------------------------------------

// Measurement-error variance used by the example1 scenario when sampling
// (the source construction itself does not fix one).
inline constexpr double kExample1Sigma2 = 0.1;

namespace detail {

inline EigenfunctionRecipe single(int nu) { return EigenfunctionRecipe{{{nu, 1.0}}}; }

inline EigenfunctionRecipe blend(int nu_a, double c_a, int nu_b, double c_b) {
  return EigenfunctionRecipe{{{nu_a, c_a}, {nu_b, c_b}}};
}

inline void apply_overrides(ScenarioConfig& config, const std::vector<long>& n_override, int N_override) {
  if (!n_override.empty()) {
    if (n_override.size() != config.sources.size()) {
      throw std::invalid_argument("scenario '" + config.name + "': expected " +
                                  std::to_string(config.sources.size()) + " sample sizes");
    }
    for (std::size_t k = 0; k < config.sources.size(); ++k) config.sources[k].n = n_override[k];
  }
  if (N_override > 0) {
    for (auto& src : config.sources) src.N = N_override;
  }
}

}  // namespace detail

// Two rotated sources with identical eigenvalues (1, 1/4, 1/9); the shared
// subspace is span{phi_2, phi_3} and each source has one specific direction.
inline ScenarioConfig make_example1(const GridPtr& grid, std::uint64_t seed,
                                    const std::vector<long>& n_override = {}, int N_override = 0) {
  ScenarioConfig config;
  config.name = "example1";
  config.grid = grid;
  config.seed = seed;

  SourceSpec s1;
  s1.source_id = "1";
  s1.eigenvalues = {1.0, 0.25, 1.0 / 9.0};
  s1.recipes = {detail::single(1), detail::single(2), detail::single(3)};
  s1.sigma2 = kExample1Sigma2;
  s1.n = 200;
  s1.N = 25;
  s1.shared_indices = {2, 3};

  const double r = 1.0 / std::numbers::sqrt2;
  SourceSpec s2;
  s2.source_id = "2";
  s2.eigenvalues = {1.0, 0.25, 1.0 / 9.0};
  s2.recipes = {detail::blend(4, r, 5, r), detail::single(3), detail::single(2)};
  s2.sigma2 = kExample1Sigma2;
  s2.n = 200;
  s2.N = 25;
  s2.shared_indices = {2, 3};

  config.sources = {std::move(s1), std::move(s2)};
  detail::apply_overrides(config, n_override, N_override);
  validate_config(config);
  return config;
}

// Three-source benchmark: sources share span{phi_2, phi_3}; source 1 adds
// the constant direction, source 2 two rotated sine/cosine blends, source 3
// one differently rotated blend.
inline ScenarioConfig make_sim3src(const GridPtr& grid, std::uint64_t seed,
                                   const std::vector<long>& n_override = {}, int N_override = 0) {
  ScenarioConfig config;
  config.name = "sim3src";
  config.grid = grid;
  config.seed = seed;

  SourceSpec s1;
  s1.source_id = "1";
  s1.eigenvalues = {24.0, 12.0, 6.0};
  s1.recipes = {detail::single(1), detail::single(2), detail::single(3)};
  s1.sigma2 = 0.49;
  s1.n = 100;
  s1.N = 50;
  s1.shared_indices = {2, 3};

  const double theta = std::numbers::pi / 4.0;
  SourceSpec s2;
  s2.source_id = "2";
  s2.eigenvalues = {12.0, 10.0, 8.0, 4.0};
  s2.recipes = {detail::single(3), detail::blend(4, std::sin(theta), 5, std::cos(theta)), detail::single(2),
                detail::blend(6, std::sin(theta), 7, std::cos(theta))};
  s2.sigma2 = 0.16;
  s2.n = 400;
  s2.N = 50;
  s2.shared_indices = {1, 3};

  const double omega = std::numbers::pi / 3.0;
  SourceSpec s3;
  s3.source_id = "3";
  s3.eigenvalues = {20.0, 10.0, 5.0};
  s3.recipes = {detail::blend(4, std::sin(omega), 5, std::cos(omega)), detail::single(2), detail::single(3)};
  s3.sigma2 = 0.16;
  s3.n = 400;
  s3.N = 50;
  s3.shared_indices = {2, 3};

  config.sources = {std::move(s1), std::move(s2), std::move(s3)};
  detail::apply_overrides(config, n_override, N_override);
  validate_config(config);
  return config;
}

inline ScenarioConfig make_scenario(const std::string& name, const GridPtr& grid, std::uint64_t seed,
                                    const std::vector<long>& n_override = {}, int N_override = 0) {
  if (name == "example1") return make_example1(grid, seed, n_override, N_override);
  if (name == "sim3src") return make_sim3src(grid, seed, n_override, N_override);
  throw std::invalid_argument("unknown scenario '" + name + "' (available: example1, sim3src)");
}

}  // namespace mfpca
