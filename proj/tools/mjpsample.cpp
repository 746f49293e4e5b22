// mjpsample: simulate, infer, benchmark and ess for Markov jump process
// samplers.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mjp/diagnostics.hpp"
#include "mjp/errors.hpp"
#include "mjp/harness.hpp"

namespace fs = std::filesystem;
using namespace mjp;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;
  std::optional<double> burn_in;
};

ExperimentConfig load(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config is required");
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) {
    if (*c.threads < 1) throw ConfigError("--threads must be at least 1");
    cfg.threads = *c.threads;
  }
  if (c.burn_in) {
    if (!(*c.burn_in >= 0.0 && *c.burn_in < 1.0)) throw ConfigError("--burn-in must lie in [0, 1)");
    cfg.burn_in = *c.burn_in;
  }
  return cfg;
}

// time,value[,variance] rows; header optional.
ObservationSet read_gaussian_csv(const fs::path& path, double default_variance) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open observations " + path.string());
  std::vector<GaussianObservation> points;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.rfind("time", 0) == 0) continue;
    std::stringstream s(line);
    std::string cell;
    std::vector<double> values;
    try {
      while (std::getline(s, cell, ',')) values.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw IngestionError("non-numeric entry", line_no);
    }
    if (values.size() < 2 || values.size() > 3) throw IngestionError("expected time,value[,variance]", line_no);
    points.push_back({values[0], values[1], values.size() == 3 ? values[2] : default_variance});
  }
  if (points.empty()) throw IngestionError("observation file " + path.string() + " is empty");
  return ObservationSet::gaussian(std::move(points));
}

int cmd_simulate(const Common& c, std::size_t replicate) {
  const ExperimentConfig cfg = load(c);
  if (cfg.data.kind != DataSource::Kind::synthetic) throw ConfigError("simulate needs a synthetic data source");
  Rng rng = Rng(cfg.seed + replicate).split(0);
  const SyntheticDataset d = generate_synthetic(cfg.model, cfg.data.synthetic, rng);
  const fs::path out = c.out.empty() ? fs::path(".") : fs::path(c.out);
  fs::create_directories(out);

  std::ofstream truth(out / "truth.csv");
  truth << "parameter,value\n";
  const auto names = cfg.model.parameter_names();
  for (std::size_t j = 0; j < names.size(); ++j) truth << names[j] << ',' << d.truth[j] << '\n';

  std::ofstream path(out / "trajectory.csv");
  path.precision(12);
  path << "time,state\n0," << d.path.initial_state() << '\n';
  for (std::size_t k = 0; k < d.path.num_jumps(); ++k)
    path << d.path.jump_times()[k] << ',' << d.path.jump_states()[k] << '\n';

  if (d.observations.kind() == ObservationSet::Kind::gaussian_points) {
    std::ofstream obs(out / "observations.csv");
    obs.precision(12);
    obs << "time,value,variance\n";
    for (const auto& p : d.observations.points()) obs << p.time << ',' << p.value << ',' << p.variance << '\n';
  } else {
    std::ofstream ev(out / "events.txt");
    ev.precision(12);
    for (double t : d.observations.events()) ev << t << '\n';
  }
  std::cerr << "wrote synthetic data to " << out.string() << '\n';
  return 0;
}

int cmd_infer(const Common& c, std::size_t setting_index, std::optional<std::size_t> iterations,
              const std::string& observations, std::size_t replicate) {
  const ExperimentConfig cfg = load(c);
  if (setting_index >= cfg.settings.size())
    throw ConfigError("--setting out of range (config has " + std::to_string(cfg.settings.size()) + ")");
  const SamplerSetting& setting = cfg.settings[setting_index];
  const double t_end = cfg.data.t_end();

  ObservationSet data;
  if (!observations.empty()) {
    data = cfg.model.family == Family::mmpp_two_state
               ? load_event_file(observations, t_end, cfg.model.dim).observations
               : read_gaussian_csv(observations, cfg.data.synthetic.noise_variance);
  } else if (cfg.data.kind == DataSource::Kind::event_file) {
    data = load_event_file(cfg.data.event_file.path, t_end, cfg.model.dim).observations;
  } else {
    Rng rng = Rng(cfg.seed + replicate).split(0);
    data = generate_synthetic(cfg.model, cfg.data.synthetic, rng).observations;
  }

  ModelSpec spec = cfg.model;
  spec.omega = setting.omega;
  spec.proposal = setting.proposal;
  if (setting.pilot_covariance) {
    ModelSpec pilot = cfg.model;
    pilot.proposal = ProposalKernel::lognormal(1.0, pilot.num_parameters());
    const Matrix cov = pilot_covariance(Target(pilot, data, t_end),
                                        static_cast<std::size_t>(setting.pilot_iterations),
                                        Rng(cfg.seed + replicate).split(1)());
    spec.proposal = ProposalKernel::gaussian(cov, setting.proposal_scale);
  }
  const Target target(spec, data, t_end);

  std::ofstream file;
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    file.open(fs::path(c.out) / "chain.csv");
  }
  std::ostream& out = c.out.empty() ? std::cout : file;
  const auto names = spec.parameter_names();
  out << "iteration";
  for (const auto& n : names) out << ',' << n;
  out << ",n_transitions,accepted,step_seconds\n";
  std::size_t it = 0;
  const std::uint64_t seed = Rng(cfg.seed + replicate).split(2 + setting_index)();
  run_chain(setting.kernel, target, iterations.value_or(cfg.n_iter), seed, std::nullopt,
            [&](const ChainRecord& r) {
              out << it++;
              for (double v : r.theta) out << ',' << v;
              out << ',' << r.n_transitions << ',' << (r.accepted ? 1 : 0) << ',' << r.step_seconds << '\n';
            });
  return 0;
}

int cmd_benchmark(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const fs::path out = c.out.empty() ? fs::path("results") / cfg.name : fs::path(c.out);
  const ExperimentResult result = run_experiment(cfg, RunOptions{out, cfg.threads});
  emit_plots(result.rows, out / "plots");
  std::cerr << "wrote " << result.rows.size() << " rows to " << (out / "results.csv").string() << '\n';
  if (result.failed_cells > 0) {
    std::cerr << result.failed_cells << " cell(s) failed; see the error column\n";
    return kExitPartial;
  }
  return 0;
}

int cmd_ess(const std::string& chain_path, double burn_in) {
  if (!(burn_in >= 0.0 && burn_in < 1.0)) throw ConfigError("--burn-in must lie in [0, 1)");
  std::ifstream in(chain_path);
  if (!in) throw IngestionError("cannot open chain dump " + chain_path);
  const ChainDump dump = read_chain_csv(in);
  const std::size_t first = static_cast<std::size_t>(burn_in * static_cast<double>(dump.records.size()));
  double wall = 0.0;
  for (const auto& r : dump.records) wall += r.step_seconds;
  std::cout << "parameter,ess,wall_seconds,ess_per_sec\n";
  for (std::size_t j = 0; j < dump.parameter_names.size(); ++j) {
    const auto trace = parameter_trace(dump.records, j, first);
    if (trace.size() < 10) throw ConfigError("need at least 10 draws after burn-in");
    const double ess = effective_sample_size(trace).ess;
    std::cout << dump.parameter_names[j] << ',' << ess << ',' << wall << ',' << (wall > 0 ? ess / wall : 0.0)
              << '\n';
  }
  return 0;
}

void add_common(CLI::App* cmd, Common& c, bool threads, bool burn_in) {
  cmd->add_option("--config", c.config, "experiment config (JSON, schema v1)");
  cmd->add_option("--seed", c.seed, "override the base seed");
  cmd->add_option("--out", c.out, "output directory");
  if (threads) cmd->add_option("--threads", c.threads, "worker threads");
  if (burn_in) cmd->add_option("--burn-in", c.burn_in, "fraction of draws discarded before ESS");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian inference for Markov jump processes"};
  app.require_subcommand(1);
  Common common;

  auto* simulate = app.add_subcommand("simulate", "draw parameters, a path and observations");
  add_common(simulate, common, false, false);
  std::size_t replicate = 0;
  simulate->add_option("--replicate", replicate, "replicate index (seed offset)");

  auto* infer = app.add_subcommand("infer", "run one chain and stream its records as CSV");
  add_common(infer, common, true, false);
  std::size_t setting = 0;
  std::optional<std::size_t> iterations;
  std::string observations;
  infer->add_option("--setting", setting, "index of the sampler setting");
  infer->add_option("--iterations", iterations, "override n_iter");
  infer->add_option("--observations", observations, "observation CSV or event file");
  infer->add_option("--replicate", replicate, "replicate index (seed offset)");

  auto* benchmark = app.add_subcommand("benchmark", "run the sampler grid; write CSV and SVG");
  add_common(benchmark, common, true, true);

  auto* ess = app.add_subcommand("ess", "recompute ESS from a chain dump");
  std::string chain;
  double burn_in = 0.1;
  ess->add_option("chain", chain, "chain dump CSV")->required();
  ess->add_option("--burn-in", burn_in, "fraction of draws discarded");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(common, replicate);
    if (*infer) return cmd_infer(common, setting, iterations, observations, replicate);
    if (*benchmark) return cmd_benchmark(common);
    if (*ess) return cmd_ess(chain, burn_in);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IngestionError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
