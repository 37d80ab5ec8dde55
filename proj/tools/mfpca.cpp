// Command-line front end: scenario simulation studies, model fitting on
// long-format CSV data, and scree inspection of the pooled projector.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "mfpca/io.hpp"
#include "mfpca/montecarlo.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;
constexpr const char* kToolVersion = "0.1.0";

// --- flag parsing ------------------------------------------------------------

// "gap" | "threshold:0.9" | "fixed:2"
mfpca::SharedRankRule parse_rank_rule(const std::string& text) {
  if (text == "gap") return mfpca::SharedRankRule::gap();
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  try {
    if (head == "threshold" && !arg.empty()) return mfpca::SharedRankRule::threshold(std::stod(arg));
    if (head == "fixed" && !arg.empty()) return mfpca::SharedRankRule::fixed(std::stoi(arg));
  } catch (const std::exception&) {
    // fall through to the usage error below
  }
  throw std::invalid_argument("--rank-rule: expected gap, threshold:<tau> or fixed:<m>, got '" + text + "'");
}

struct MsMode {
  enum class Kind { automatic, fixed, equal_rank };
  Kind kind = Kind::automatic;
  int m = 0;
};

// "auto" | "fixed:2" | "equal-rank"
MsMode parse_ms(const std::string& text) {
  if (text == "auto") return MsMode{};
  if (text == "equal-rank") return MsMode{MsMode::Kind::equal_rank, 0};
  const auto colon = text.find(':');
  if (text.substr(0, colon) == "fixed" && colon != std::string::npos) {
    try {
      const int m = std::stoi(text.substr(colon + 1));
      if (m >= 1) return MsMode{MsMode::Kind::fixed, m};
    } catch (const std::exception&) {
    }
  }
  throw std::invalid_argument("--ms: expected auto, fixed:<m> or equal-rank, got '" + text + "'");
}

// "cv" | "fixed:0.1"
mfpca::BandwidthPolicy parse_bandwidth(const std::string& text) {
  if (text == "cv") return mfpca::BandwidthPolicy::cross_validated();
  const auto colon = text.find(':');
  if (text.substr(0, colon) == "fixed" && colon != std::string::npos) {
    try {
      return mfpca::BandwidthPolicy::fixed(std::stod(text.substr(colon + 1)));
    } catch (const std::exception&) {
    }
  }
  throw std::invalid_argument("--bandwidth: expected cv or fixed:<h>, got '" + text + "'");
}

// "100,400,400"
std::vector<long> parse_sizes(const std::string& text) {
  std::vector<long> sizes;
  std::string cur;
  for (char c : text + ",") {
    if (c == ',') {
      if (cur.empty()) throw std::invalid_argument("--n: empty element in '" + text + "'");
      try {
        sizes.push_back(std::stol(cur));
      } catch (const std::exception&) {
        throw std::invalid_argument("--n: cannot parse '" + cur + "'");
      }
      if (sizes.back() < 1) throw std::invalid_argument("--n: sample sizes must be positive");
      cur.clear();
    } else {
      cur += c;
    }
  }
  return sizes;
}

std::uint64_t effective_seed(std::uint64_t flag_seed) {
  const char* env = std::getenv("MFPCA_SEED");
  if (env == nullptr || *env == '\0') return flag_seed;
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || end == env || *end != '\0') {
    throw std::invalid_argument("MFPCA_SEED: cannot parse '" + std::string(env) + "'");
  }
  return static_cast<std::uint64_t>(v);
}

std::string sanitize_id(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-';
    if (!ok) c = '_';
  }
  return out;
}

// --- manifest plumbing -------------------------------------------------------

// Everything needed to reproduce a run; deliberately free of timestamps and
// host details so identical invocations write identical bytes.
struct CommonFlags {
  int grid_size = 101;
  std::uint64_t seed = 0;
  std::string rank_rule = "gap";
  std::string ms = "auto";
  std::string bandwidth = "cv";
  std::string out = ".";
};

ordered_json manifest_base(const std::string& command, const CommonFlags& flags) {
  ordered_json j;
  j["tool"] = "mfpca";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["grid_size"] = flags.grid_size;
  j["seed"] = flags.seed;
  j["rank_rule"] = flags.rank_rule;
  j["ms"] = flags.ms;
  j["bandwidth"] = flags.bandwidth;
  ordered_json defaults;
  defaults["fve"] = 0.95;
  defaults["cv_folds"] = mfpca::PipelineOptions{}.cv_folds;
  defaults["cv_eval_cap"] = mfpca::PipelineOptions{}.cv_eval_cap;
  defaults["bandwidth_ladder"] = mfpca::default_bandwidth_ladder();
  j["defaults"] = defaults;
  return j;
}

void write_manifest(const std::filesystem::path& dir, const ordered_json& manifest) {
  mfpca::write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

int scree_length(int grid_size, int m_max) { return std::min(grid_size, std::max(10, 2 * m_max + 2)); }

mfpca::SharedRankRule resolve_shared_rule(const MsMode& ms, const mfpca::SharedRankRule& rule, int m_min) {
  switch (ms.kind) {
    case MsMode::Kind::automatic:
      return rule;
    case MsMode::Kind::fixed:
      return mfpca::SharedRankRule::fixed(ms.m);
    case MsMode::Kind::equal_rank:
      return mfpca::SharedRankRule::fixed(m_min);
  }
  throw std::logic_error("resolve_shared_rule: unreachable");
}

// --- subcommand state --------------------------------------------------------

struct SimulateArgs {
  CommonFlags common;
  std::string scenario;
  std::string n_list;
  int N = 0;
  int M = 100;
  int jobs = 1;
  double sigma2 = -1.0;  // < 0 keeps the scenario defaults
  bool emit_scree = false;
  bool emit_data = false;
};

struct FitArgs {
  CommonFlags common;
  std::string data;
  double fve = 0.95;
  bool rescale_time = false;
};

struct ScreeArgs {
  CommonFlags common;
  std::string scenario;
  std::string data;
  std::string n_list;
  int N = 0;
  bool population = false;
  double fve = 0.95;
  bool rescale_time = false;
};

// --- commands ----------------------------------------------------------------

int run_simulate(const SimulateArgs& args) {
  const std::uint64_t seed = effective_seed(args.common.seed);
  const mfpca::SharedRankRule rule = parse_rank_rule(args.common.rank_rule);
  const MsMode ms = parse_ms(args.common.ms);
  const std::vector<long> sizes = args.n_list.empty() ? std::vector<long>{} : parse_sizes(args.n_list);

  const mfpca::GridPtr grid = mfpca::Grid::uniform(args.common.grid_size);
  mfpca::ScenarioConfig config = mfpca::make_scenario(args.scenario, grid, seed, sizes, args.N);
  if (args.sigma2 >= 0.0) {
    for (auto& src : config.sources) src.sigma2 = args.sigma2;
  }

  int m_min = config.sources.front().rank();
  for (const auto& src : config.sources) m_min = std::min(m_min, src.rank());

  mfpca::MonteCarloOptions options;
  options.pipeline.bandwidth = parse_bandwidth(args.common.bandwidth);
  options.shared_rule = resolve_shared_rule(ms, rule, m_min);
  options.jobs = args.jobs;

  const mfpca::MonteCarloResult result = mfpca::run_monte_carlo(config, args.M, options);

  const std::filesystem::path out(args.common.out);
  std::filesystem::create_directories(out);
  mfpca::write_text_file((out / "metrics.csv").string(), result.table.to_csv());

  if (args.emit_scree) {
    int m_max = 0;
    for (const auto& src : config.sources) m_max = std::max(m_max, src.rank());
    const int count =
        std::min(static_cast<int>(result.first_pooled_spectrum.size()), scree_length(grid->size(), m_max));
    mfpca::write_text_file((out / "scree.csv").string(),
                           mfpca::scree_csv(result.first_pooled_spectrum.head(count)));
  }
  if (args.emit_data) {
    std::vector<mfpca::SourceSample> samples;
    for (std::size_t k = 0; k < config.sources.size(); ++k) {
      mfpca::Rng rng = mfpca::Rng::substream(config.seed, 0, k);
      samples.push_back(mfpca::generate_source(config.sources[k], grid, rng));
    }
    mfpca::write_text_file((out / "data.csv").string(), mfpca::long_csv(samples));
  }

  ordered_json manifest = manifest_base("simulate", args.common);
  manifest["seed"] = seed;
  manifest["scenario"] = args.scenario;
  ordered_json n_json = ordered_json::array();
  for (const auto& src : config.sources) n_json.push_back(src.n);
  manifest["n"] = n_json;
  manifest["N"] = config.sources.front().N;
  manifest["M"] = args.M;
  manifest["jobs"] = args.jobs;
  manifest["sigma2_override"] = args.sigma2 >= 0.0 ? ordered_json(args.sigma2) : ordered_json(nullptr);
  manifest["emit_scree"] = args.emit_scree;
  manifest["emit_data"] = args.emit_data;
  manifest["excluded_replicates"] = result.excluded;
  write_manifest(out, manifest);

  std::cout << "wrote " << (out / "metrics.csv").string() << " (" << result.table.rows.size()
            << " rows, M=" << args.M << ", excluded=" << result.excluded << ")\n";
  return 0;
}

struct FittedStudy {
  mfpca::GridPtr grid;
  std::vector<mfpca::FittedSource> fitted;
  std::vector<mfpca::SourceInput> inputs;
  mfpca::IntegrationResult integration;
};

FittedStudy fit_from_csv(const std::string& path, const CommonFlags& common, double fve, bool rescale_time) {
  const std::uint64_t seed = effective_seed(common.seed);
  const std::vector<mfpca::SourceSample> sources = mfpca::read_long_csv_file(path, rescale_time);
  for (const auto& src : sources) {
    if (src.subjects.size() < 2) {
      throw mfpca::DataError("source '" + src.source_id + "' has " + std::to_string(src.subjects.size()) +
                             " subject(s); at least 2 are required");
    }
  }

  FittedStudy study;
  study.grid = mfpca::Grid::uniform(common.grid_size);

  mfpca::PipelineOptions popt;
  popt.bandwidth = parse_bandwidth(common.bandwidth);
  popt.rank_rule = mfpca::RankRule::fve(fve);

  for (std::size_t k = 0; k < sources.size(); ++k) {
    study.fitted.push_back(mfpca::fit_source(sources[k], study.grid, popt, mfpca::derive_seed(seed, k, 0)));
    const mfpca::FittedSource& f = study.fitted.back();
    study.inputs.push_back(mfpca::SourceInput{f.fpca.source_id, f.fpca.n, f.fpca.m, f.fpca.projector,
                                              f.covariance});
  }

  int m_min = study.inputs.front().m;
  for (const auto& in : study.inputs) m_min = std::min(m_min, in.m);
  const mfpca::SharedRankRule rule =
      resolve_shared_rule(parse_ms(common.ms), parse_rank_rule(common.rank_rule), m_min);
  study.integration = mfpca::integrate_sources(study.inputs, rule);
  return study;
}

int run_fit(const FitArgs& args) {
  FittedStudy study = fit_from_csv(args.data, args.common, args.fve, args.rescale_time);
  const mfpca::IntegrationResult& ir = study.integration;
  const mfpca::GridPtr& grid = study.grid;

  const std::filesystem::path out(args.common.out);
  std::filesystem::create_directories(out);

  int m_max = 0;
  for (const auto& in : study.inputs) m_max = std::max(m_max, in.m);

  // Pooled spectrum and the shared basis.
  const int count =
      std::min(static_cast<int>(ir.P_w_spectrum.eigenvalues.size()), scree_length(grid->size(), m_max));
  mfpca::write_text_file((out / "pw_spectrum.csv").string(),
                         mfpca::scree_csv(ir.P_w_spectrum.eigenvalues.head(count)));
  {
    std::vector<mfpca::GridFunction> shared(ir.P_w_spectrum.eigenfunctions.begin(),
                                            ir.P_w_spectrum.eigenfunctions.begin() + ir.m_s);
    mfpca::write_text_file((out / "shared_functions.csv").string(),
                           mfpca::functions_csv(grid, shared, "phi"));
  }

  // Per-source eigenvalues, eigenfunctions and any specific subspace basis.
  std::vector<mfpca::WeightedProjector> specific;
  ordered_json sources_json = ordered_json::array();
  for (std::size_t k = 0; k < study.fitted.size(); ++k) {
    const mfpca::FittedSource& f = study.fitted[k];
    const mfpca::SourceDecomposition& dec = ir.per_source[k];
    const std::string stem = "source_" + sanitize_id(f.fpca.source_id);
    mfpca::write_text_file((out / (stem + "_values.csv")).string(),
                           mfpca::eigenvalues_csv(f.fpca.eigensystem.eigenvalues));
    mfpca::write_text_file((out / (stem + "_functions.csv")).string(),
                           mfpca::functions_csv(grid, f.fpca.eigensystem.eigenfunctions, "phi"));
    if (dec.P_p) {
      const mfpca::EigenSystem es = mfpca::eigendecompose(*dec.P_p, f.fpca.m - ir.m_s);
      mfpca::write_text_file((out / (stem + "_specific_functions.csv")).string(),
                             mfpca::functions_csv(grid, es.eigenfunctions, "psi"));
      specific.push_back(mfpca::WeightedProjector{*dec.P_p, f.fpca.n});
    } else {
      specific.push_back(
          mfpca::WeightedProjector{mfpca::DiscretizedOperator::zero(grid), f.fpca.n});
    }

    ordered_json sj;
    sj["source_id"] = f.fpca.source_id;
    sj["n"] = f.fpca.n;
    sj["m"] = f.fpca.m;
    sj["sigma2"] = f.fpca.sigma2;
    sj["mean_bandwidth"] = f.mean_bandwidth;
    sj["cov_bandwidth"] = f.cov_bandwidth;
    ordered_json ev = ordered_json::array();
    for (int i = 0; i < f.fpca.eigensystem.eigenvalues.size(); ++i) {
      ev.push_back(f.fpca.eigensystem.eigenvalues[i]);
    }
    sj["eigenvalues"] = ev;
    sj["has_specific_part"] = static_cast<bool>(dec.P_p);
    sources_json.push_back(sj);
  }

  // Separation diagnostic: distance of the pooled specific remainder from
  // full overlap, computed from the fitted projectors.
  const double d_hat = mfpca::eigengap_d(specific);

  ordered_json summary;
  summary["data"] = args.data;
  summary["m_s"] = ir.m_s;
  summary["d_hat"] = d_hat;
  ordered_json shared_ev = ordered_json::array();
  for (int i = 0; i < ir.m_s; ++i) shared_ev.push_back(ir.P_w_spectrum.eigenvalues[i]);
  summary["shared_eigenvalues"] = shared_ev;
  summary["sources"] = sources_json;
  mfpca::write_text_file((out / "summary.json").string(), summary.dump(2) + "\n");

  ordered_json manifest = manifest_base("fit", args.common);
  manifest["seed"] = effective_seed(args.common.seed);
  manifest["data"] = args.data;
  manifest["fve"] = args.fve;
  manifest["rescale_time"] = args.rescale_time;
  write_manifest(out, manifest);

  std::cout << "fit " << study.fitted.size() << " source(s): m_s=" << ir.m_s << ", d_hat=" << d_hat << "\n";
  return 0;
}

int run_scree(const ScreeArgs& args) {
  if (args.scenario.empty() == args.data.empty()) {
    throw std::invalid_argument("scree: exactly one of --scenario and --data is required");
  }

  const std::filesystem::path out(args.common.out);
  std::filesystem::create_directories(out);

  Eigen::VectorXd spectrum;
  int m_max = 1;
  if (!args.data.empty()) {
    const FittedStudy study = fit_from_csv(args.data, args.common, args.fve, args.rescale_time);
    for (const auto& in : study.inputs) m_max = std::max(m_max, in.m);
    spectrum = study.integration.P_w_spectrum.eigenvalues;
  } else {
    const std::uint64_t seed = effective_seed(args.common.seed);
    const mfpca::GridPtr grid = mfpca::Grid::uniform(args.common.grid_size);
    const std::vector<long> sizes = args.n_list.empty() ? std::vector<long>{} : parse_sizes(args.n_list);
    const mfpca::ScenarioConfig config = mfpca::make_scenario(args.scenario, grid, seed, sizes, args.N);
    for (const auto& src : config.sources) m_max = std::max(m_max, src.rank());
    if (args.population) {
      const mfpca::PopulationOperators pop = mfpca::population_operators(config);
      std::vector<mfpca::WeightedProjector> wp;
      for (std::size_t k = 0; k < pop.P.size(); ++k) {
        wp.push_back(mfpca::WeightedProjector{pop.P[k], config.sources[k].n});
      }
      const mfpca::DiscretizedOperator P_w = mfpca::pooled_projection(wp);
      spectrum = mfpca::eigendecompose(P_w, grid->size()).eigenvalues;
    } else {
      int m_min = config.sources.front().rank();
      for (const auto& src : config.sources) m_min = std::min(m_min, src.rank());
      mfpca::MonteCarloOptions options;
      options.pipeline.bandwidth = parse_bandwidth(args.common.bandwidth);
      options.shared_rule =
          resolve_shared_rule(parse_ms(args.common.ms), parse_rank_rule(args.common.rank_rule), m_min);
      const mfpca::MonteCarloResult result = mfpca::run_monte_carlo(config, 1, options);
      spectrum = result.first_pooled_spectrum;
    }
  }

  const int count = std::min(static_cast<int>(spectrum.size()), scree_length(args.common.grid_size, m_max));
  mfpca::write_text_file((out / "scree.csv").string(), mfpca::scree_csv(spectrum.head(count)));

  ordered_json manifest = manifest_base("scree", args.common);
  manifest["seed"] = effective_seed(args.common.seed);
  manifest["scenario"] = args.scenario;
  manifest["data"] = args.data;
  manifest["population"] = args.population;
  manifest["rescale_time"] = args.rescale_time;
  write_manifest(out, manifest);

  std::cout << "wrote " << (out / "scree.csv").string() << " (" << count << " values)\n";
  return 0;
}

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--grid-size", flags.grid_size, "Evaluation grid size")->capture_default_str();
  cmd->add_option("--seed", flags.seed, "Master seed (MFPCA_SEED overrides)")->capture_default_str();
  cmd->add_option("--rank-rule", flags.rank_rule, "Shared rank rule: gap, threshold:<tau>, fixed:<m>")
      ->capture_default_str();
  cmd->add_option("--ms", flags.ms, "Shared dimension mode: auto, fixed:<m>, equal-rank")
      ->capture_default_str();
  cmd->add_option("--bandwidth", flags.bandwidth, "Smoothing bandwidth: cv or fixed:<h>")
      ->capture_default_str();
  cmd->add_option("--out", flags.out, "Output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared and source-specific functional principal component subspaces"};
  app.set_version_flag("--version", std::string("mfpca ") + kToolVersion);
  app.require_subcommand(1);

  SimulateArgs sim_args;
  CLI::App* sim = app.add_subcommand("simulate", "Run a replicated simulation study on a built-in scenario");
  add_common_flags(sim, sim_args.common);
  sim->add_option("--scenario", sim_args.scenario, "Scenario name (example1, sim3src)")->required();
  sim->add_option("--n", sim_args.n_list, "Per-source sample sizes, e.g. 100,400,400");
  sim->add_option("--N", sim_args.N, "Observations per subject (0 keeps the scenario default)");
  sim->add_option("--M", sim_args.M, "Replicates")->capture_default_str();
  sim->add_option("--jobs", sim_args.jobs, "Worker threads")->capture_default_str();
  sim->add_option("--sigma2", sim_args.sigma2, "Override every source's noise variance (>= 0)");
  sim->add_flag("--emit-scree", sim_args.emit_scree, "Also write the first replicate's pooled spectrum");
  sim->add_flag("--emit-data", sim_args.emit_data, "Also write the first replicate's raw observations");

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "Fit shared and specific subspaces to long-format CSV data");
  add_common_flags(fit, fit_args.common);
  fit->add_option("--data", fit_args.data, "Input CSV: source_id,subject_id,time,value")->required();
  fit->add_option("--fve", fit_args.fve, "Per-source fraction-of-variance threshold")->capture_default_str();
  fit->add_flag("--rescale-time", fit_args.rescale_time, "Map the observed time range onto [0,1]");

  ScreeArgs scree_args;
  CLI::App* scree = app.add_subcommand("scree", "Write the pooled projector spectrum for plotting");
  add_common_flags(scree, scree_args.common);
  scree->add_option("--scenario", scree_args.scenario, "Scenario name (example1, sim3src)");
  scree->add_option("--data", scree_args.data, "Input CSV: source_id,subject_id,time,value");
  scree->add_option("--n", scree_args.n_list, "Per-source sample sizes (scenario mode)");
  scree->add_option("--N", scree_args.N, "Observations per subject (scenario mode)");
  scree->add_flag("--population", scree_args.population, "Use exact scenario operators instead of a sample");
  scree->add_option("--fve", scree_args.fve, "Per-source fraction-of-variance threshold (data mode)")
      ->capture_default_str();
  scree->add_flag("--rescale-time", scree_args.rescale_time, "Map the observed time range onto [0,1]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return run_simulate(sim_args);
    if (fit->parsed()) return run_fit(fit_args);
    if (scree->parsed()) return run_scree(scree_args);
    std::cerr << "error: no command given\n";
    return 2;
  } catch (const mfpca::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const mfpca::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
