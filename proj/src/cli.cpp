#include "wfsim/cli.hpp"

#include "wfsim/chain.hpp"
#include "wfsim/diffusion.hpp"
#include "wfsim/harness.hpp"
#include "wfsim/model_io.hpp"
#include "wfsim/stationary.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace wfsim::cli {

namespace {

constexpr int kExitModel = 1;
constexpr int kExitUsage = 2;
constexpr double kFlowTolerance = 1e-8;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw UsageError("not a number: '" + cell + "'");
    }
  }
  return values;
}

FrequencyState initial_state(const ValidatedModel& model, const std::vector<double>& init) {
  if (init.empty()) {
    std::vector<double> full;
    for (std::size_t i = 0; i < model.num_loci(); ++i) {
      const int m = model.alleles(i);
      for (int k = 0; k < m; ++k) full.push_back(1.0 / m);
      double partial = 0.0;
      for (int k = 0; k + 1 < m; ++k) partial += 1.0 / m;
      full.back() = 1.0 - partial;
    }
    return FrequencyState(model.layout_ptr(), std::move(full));
  }
  if (init.size() != model.layout().full_size()) {
    throw UsageError("--init needs " + std::to_string(model.layout().full_size()) + " frequencies (all alleles)");
  }
  return FrequencyState(model.layout_ptr(), init);
}

std::optional<NormalizerMethod> parse_method(const std::string& name) {
  if (name == "auto") return std::nullopt;
  if (name == "closed") return NormalizerMethod::ClosedForm;
  if (name == "quadrature") return NormalizerMethod::Quadrature;
  if (name == "mc") return NormalizerMethod::MonteCarlo;
  throw UsageError("unknown --method '" + name + "' (auto, closed, quadrature, mc)");
}

std::string format(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

int cmd_validate(const RunConfig& cfg, const ValidatedModel& model, std::ostream& out) {
  (void)cfg;
  std::ostringstream s;
  s << "valid model: L=" << model.num_loci() << " M=(";
  for (std::size_t i = 0; i < model.num_loci(); ++i) s << (i ? "," : "") << model.alleles(i);
  s << ") mutation=" << (model.parent_independent() ? "parent-independent" : "parent-dependent") << " edges=";
  const auto graph = interaction_graph(model.coupling_matrix());
  if (graph.edges.empty()) s << "none";
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    s << (e ? "," : "") << graph.edges[e].first + 1 << "-" << graph.edges[e].second + 1;
  }
  out << s.str() << '\n';
  return 0;
}

int cmd_simulate_chain(const RunConfig& cfg, const ValidatedModel& model, std::ostream& out) {
  if (cfg.population_size < 1) throw UsageError("--n must be >= 1");
  const ChainParams params = chain_params_from_diffusion(model, cfg.population_size);
  const OccupancyState init = nearest_occupancy(initial_state(model, cfg.init), cfg.population_size);
  Rng rng = make_rng(cfg.seed);
  write_csv(out, simulate_chain(params, init, cfg.generations, cfg.thin, rng));
  return 0;
}

int cmd_simulate_sde(const RunConfig& cfg, const ValidatedModel& model, std::ostream& out, std::ostream& err) {
  Rng rng = make_rng(cfg.seed);
  const Trajectory t = simulate_sde(model, initial_state(model, cfg.init), cfg.t_end, cfg.dt, cfg.thin, rng);
  write_csv(out, t);
  if (t.clamp_events > 0) err << "note: " << t.clamp_events << " boundary clamps; consider a smaller --dt\n";
  return 0;
}

std::vector<FrequencyState> density_points(const RunConfig& cfg, const ValidatedModel& model) {
  std::vector<FrequencyState> points;
  for (const auto& p : cfg.points) points.push_back(initial_state(model, parse_list(p)));
  if (cfg.grid > 0) {
    for (std::size_t i = 0; i < model.num_loci(); ++i) {
      if (model.alleles(i) != 2) throw UsageError("--grid needs biallelic loci; use --point");
    }
    const std::size_t l = model.num_loci();
    std::vector<int> index(l, 0);
    while (true) {
      std::vector<double> full;
      for (std::size_t i = 0; i < l; ++i) {
        const double p = (index[i] + 0.5) / cfg.grid;
        full.insert(full.end(), {p, 1.0 - p});
      }
      points.emplace_back(model.layout_ptr(), std::move(full));
      std::size_t i = l;
      while (i > 0 && ++index[i - 1] == cfg.grid) index[--i] = 0;
      if (i == 0) break;
    }
  }
  if (points.empty()) throw UsageError("density-eval needs --grid or --point");
  return points;
}

int cmd_density_eval(const RunConfig& cfg, const ValidatedModel& model, std::ostream& out) {
  const auto points = density_points(cfg, model);
  std::optional<StationaryDensity> density;
  if (!cfg.unnormalized) density = StationaryDensity::create(model, parse_method(cfg.method), cfg.samples, cfg.seed);
  std::ostringstream s;
  s.precision(17);
  const std::string header = csv_header(model.layout());
  s << header.substr(2) << ",log_density\n";
  for (const auto& x : points) {
    for (double v : x.augmented()) s << v << ',';
    s << (density ? density->log_density(x) : log_density_unnormalized(model, x)) << '\n';
  }
  out << s.str();
  return 0;
}

int cmd_normalize(const RunConfig& cfg, const ValidatedModel& model, std::ostream& out) {
  nlohmann::ordered_json doc;
  const auto method = parse_method(cfg.method);
  const auto density = StationaryDensity::create(model, method, cfg.samples, cfg.seed);
  doc["method"] = std::string(to_string(density.method()));
  doc["Z"] = std::exp(density.log_normalizer());
  doc["log_Z"] = density.log_normalizer();
  if (density.standard_error()) {
    doc["standard_error"] = *density.standard_error();
    doc["samples"] = cfg.samples;
  }
  if (density.method() == NormalizerMethod::Quadrature) {
    doc["truncation_error"] = normalizer_quadrature(model).error_estimate;
  }
  out << doc.dump(2) << '\n';
  return 0;
}

int cmd_flow_check(const RunConfig& cfg, const ValidatedModel& model, std::ostream& out) {
  if (!model.parent_independent()) {
    throw Error(ErrorCode::UnsupportedModelShape, "zero-flow check needs parent-independent mutation");
  }
  Rng rng = make_rng(cfg.seed);
  std::exponential_distribution<double> expo(1.0);
  double worst = 0.0;
  for (int n = 0; n < cfg.flow_points; ++n) {
    std::vector<double> full;
    for (std::size_t i = 0; i < model.num_loci(); ++i) {
      std::vector<double> g(static_cast<std::size_t>(model.alleles(i)));
      double sum = 0.0;
      for (double& v : g) sum += (v = expo(rng) + 1e-3);
      double partial = 0.0;
      for (std::size_t k = 0; k + 1 < g.size(); ++k) partial += (g[k] /= sum);
      g.back() = 1.0 - partial;
      full.insert(full.end(), g.begin(), g.end());
    }
    const FrequencyState x(model.layout_ptr(), std::move(full));
    const DriftVector residual = flow_residual(model, x);
    for (double r : residual.values()) worst = std::max(worst, std::abs(r));
  }
  const bool ok = worst <= kFlowTolerance;
  out << "points=" << cfg.flow_points << " max_relative_residual=" << format(worst) << " tolerance=1e-08 "
      << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : kExitModel;
}

int cmd_moments(const RunConfig& cfg, const ValidatedModel& model, std::ostream& out) {
  write_moment_csv(out, moment_report(model, initial_state(model, cfg.init), cfg.population_grid));
  return 0;
}

int cmd_stationarity(const RunConfig& cfg, const ValidatedModel& model, std::ostream& out) {
  if (cfg.trajectory_path.empty()) throw UsageError("stationarity needs --trajectory");
  std::ifstream in(cfg.trajectory_path);
  if (!in) throw UsageError("cannot open trajectory file " + cfg.trajectory_path);
  Trajectory t = read_csv(in, model.layout_ptr());
  const std::size_t skip = std::min(cfg.burn_in, t.size());
  t.times.erase(t.times.begin(), t.times.begin() + static_cast<std::ptrdiff_t>(skip));
  t.states.erase(t.states.begin(), t.states.begin() + static_cast<std::ptrdiff_t>(skip));
  const auto density = StationaryDensity::create(model, parse_method(cfg.method), cfg.samples, cfg.seed);
  out << to_json(stationarity_test(density, t, cfg.bins)) << '\n';
  return 0;
}

int cmd_graph_export(const ValidatedModel& model, std::ostream& out) {
  out << interaction_graph(model.coupling_matrix()).to_dot();
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coupled multilocus Wright-Fisher simulation and verification"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string init_text;
  std::string grid_text;

  auto common = [&](CLI::App* sub) {
    sub->add_option("model", cfg.model_path, "model JSON file")->required();
    sub->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    sub->add_option("-o,--output", cfg.output, "write to this file instead of stdout");
  };
  auto with_init = [&](CLI::App* sub) {
    sub->add_option("--init", init_text, "initial frequencies, all alleles, comma separated");
  };

  auto* validate = app.add_subcommand("validate", "check a model file against the model assumptions");
  common(validate);

  auto* chain = app.add_subcommand("simulate-chain", "simulate the finite-N Wright-Fisher chain");
  common(chain);
  with_init(chain);
  chain->add_option("--n", cfg.population_size, "population size N")->required();
  chain->add_option("--generations", cfg.generations, "number of generations")->required();
  chain->add_option("--thin", cfg.thin, "record every k generations")->capture_default_str();

  auto* sde = app.add_subcommand("simulate-sde", "Euler-Maruyama simulation of the diffusion");
  common(sde);
  with_init(sde);
  sde->add_option("--t-end", cfg.t_end, "final diffusion time")->capture_default_str();
  sde->add_option("--dt", cfg.dt, "time step")->capture_default_str();
  sde->add_option("--thin", cfg.thin, "record every k steps")->capture_default_str();

  auto* density = app.add_subcommand("density-eval", "evaluate the log stationary density");
  common(density);
  density->add_option("--grid", cfg.grid, "K points per axis (biallelic loci)");
  density->add_option("--point", cfg.points, "full frequency vector, comma separated (repeatable)");
  density->add_option("--method", cfg.method, "normalizer: auto, closed, quadrature, mc")->capture_default_str();
  density->add_option("--samples", cfg.samples, "Monte Carlo samples")->capture_default_str();
  density->add_flag("--unnormalized", cfg.unnormalized, "report log(pi e^{2V}) without log Z");

  auto* normalize = app.add_subcommand("normalize", "compute the normalizing constant Z");
  common(normalize);
  normalize->add_option("--method", cfg.method, "auto, closed, quadrature, mc")->capture_default_str();
  normalize->add_option("--samples", cfg.samples, "Monte Carlo samples")->capture_default_str();

  auto* flow = app.add_subcommand("flow-check", "verify zero probability flow at random interior points");
  common(flow);
  flow->add_option("--points", cfg.flow_points, "number of random points")->capture_default_str();

  auto* moments = app.add_subcommand("moments", "exact one-generation moments against diffusion limits");
  common(moments);
  with_init(moments);
  moments->add_option("--n-grid", grid_text, "population sizes, comma separated (default 100,1000,10000,100000)");

  auto* stationarity = app.add_subcommand("stationarity", "compare a trajectory with the stationary density");
  common(stationarity);
  stationarity->add_option("--trajectory", cfg.trajectory_path, "trajectory CSV")->required();
  stationarity->add_option("--bins", cfg.bins, "bins per axis")->capture_default_str();
  stationarity->add_option("--burn-in", cfg.burn_in, "records to drop from the start")->capture_default_str();
  stationarity->add_option("--method", cfg.method, "normalizer: auto, closed, quadrature, mc")->capture_default_str();
  stationarity->add_option("--samples", cfg.samples, "Monte Carlo samples for the normalizer")->capture_default_str();

  auto* graph = app.add_subcommand("graph-export", "write the locus interaction graph as DOT");
  common(graph);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  cfg.command = sub->get_name();

  std::ostringstream buffer;
  int code = 0;
  try {
    if (!init_text.empty()) cfg.init = parse_list(init_text);
    if (!grid_text.empty()) {
      cfg.population_grid.clear();
      for (double v : parse_list(grid_text)) {
        if (!(v >= 1.0) || v != std::floor(v)) throw UsageError("--n-grid values must be positive integers");
        cfg.population_grid.push_back(static_cast<std::int64_t>(v));
      }
    }
    if (cfg.thin < 1) throw UsageError("--thin must be >= 1");
    if (!(cfg.dt > 0.0)) throw UsageError("--dt must be positive");
    if (cfg.bins < 1) throw UsageError("--bins must be >= 1");

    const ValidatedModel model = validate_model(load_model(cfg.model_path));
    if (cfg.command == "validate") code = cmd_validate(cfg, model, buffer);
    else if (cfg.command == "simulate-chain") code = cmd_simulate_chain(cfg, model, buffer);
    else if (cfg.command == "simulate-sde") code = cmd_simulate_sde(cfg, model, buffer, err);
    else if (cfg.command == "density-eval") code = cmd_density_eval(cfg, model, buffer);
    else if (cfg.command == "normalize") code = cmd_normalize(cfg, model, buffer);
    else if (cfg.command == "flow-check") code = cmd_flow_check(cfg, model, buffer);
    else if (cfg.command == "moments") code = cmd_moments(cfg, model, buffer);
    else if (cfg.command == "stationarity") code = cmd_stationarity(cfg, model, buffer);
    else if (cfg.command == "graph-export") code = cmd_graph_export(model, buffer);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::InvalidArgument ? kExitUsage : kExitModel;
  }

  if (cfg.output.empty()) {
    out << buffer.str();
  } else {
    std::ofstream file(cfg.output, std::ios::binary);
    if (!file) {
      err << "error: cannot write " << cfg.output << '\n';
      return kExitModel;
    }
    file << buffer.str();
  }
  return code;
}

}  // namespace wfsim::cli
