#include "mjp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include "mjp/diagnostics.hpp"
#include "mjp/errors.hpp"

namespace mjp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string file_stem(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') out += c;
    else if (!out.empty() && out.back() != '_') out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

Trajectory simulate_path(const ModelSpec& spec, const ModelParams& theta, double t_end, Rng& rng) {
  const RateMatrix rates = build_rate_matrix(spec, theta);
  const auto pi0 = spec.initial_distribution();
  if (!rates.time_dependent()) return gillespie_simulate(rates, pi0, t_end, rng);
  return simulate_uniformized(rates, pi0, t_end, 2.0 * rates.max_exit_rate(t_end) + 1.0, rng);
}

struct Cell {
  std::size_t setting;
  std::size_t replicate;
};

struct CellOutput {
  std::vector<ResultRow> rows;
  bool failed = false;
};

}  // namespace

ObservationSet simulate_observations(const Trajectory& path, std::span<const double> times,
                                     double noise_variance, Rng& rng) {
  std::vector<GaussianObservation> points;
  points.reserve(times.size());
  const double sd = std::sqrt(noise_variance);
  for (double t : times)
    points.push_back({t, path.state_at(t) + sd * rng.normal(), noise_variance});
  return ObservationSet::gaussian(std::move(points));
}

ObservationSet simulate_events(const Trajectory& path, std::span<const double> rates, Rng& rng) {
  std::vector<double> events;
  path.for_each_segment([&](double a, double b, int s) {
    const double rate = rates[static_cast<std::size_t>(s)];
    const auto count = rng.poisson(rate * (b - a));
    for (std::uint64_t k = 0; k < count; ++k) events.push_back(a + (b - a) * rng.uniform());
  });
  return ObservationSet::poisson(std::move(events), std::vector<double>(rates.begin(), rates.end()));
}

SyntheticDataset generate_synthetic(const ModelSpec& spec, const SyntheticDataConfig& data,
                                    Rng& rng) {
  ModelSpec local = spec;
  local.horizon = data.t_end;
  ModelParams theta = sample_prior(local, rng);
  Trajectory path = simulate_path(local, theta, data.t_end, rng);
  ObservationSet obs =
      local.family == Family::mmpp_two_state
          ? simulate_events(path, emission_rates(local, theta), rng)
          : simulate_observations(path, data.resolved_times(), data.noise_variance, rng);
  return {std::move(theta), std::move(path), std::move(obs), data.t_end};
}

EventFile load_event_file(const std::filesystem::path& path, double target, int num_states) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open event file " + path.string());
  std::vector<double> positions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string text = line.substr(first, last - first + 1);
    double value = 0.0;
    std::size_t used = 0;
    try {
      value = std::stod(text, &used);
    } catch (const std::exception&) {
      throw IngestionError("non-numeric entry '" + text + "'", line_no);
    }
    if (used != text.size() || !std::isfinite(value))
      throw IngestionError("non-numeric entry '" + text + "'", line_no);
    if (value < 0.0) throw IngestionError("negative position", line_no);
    positions.push_back(value);
  }
  if (positions.empty()) throw IngestionError("event file " + path.string() + " is empty");

  std::sort(positions.begin(), positions.end());
  const double lo = positions.front();
  const double span = positions.back() - lo;
  EventFile out;
  out.degenerate_span = !(span > 0.0);
  if (out.degenerate_span) {
    std::cerr << "warning: event file " << path.string()
              << " has a zero-length span; all events map to 0\n";
  }
  for (double& p : positions) p = out.degenerate_span ? 0.0 : (p - lo) / span * target;
  if (!out.degenerate_span) positions.back() = target;
  out.observations = ObservationSet::poisson(std::move(positions),
                                             std::vector<double>(static_cast<std::size_t>(num_states), 1.0));
  return out;
}

Matrix pilot_covariance(const Target& target, std::size_t iterations, std::uint64_t seed) {
  KernelConfig gibbs{KernelKind::gibbs, ParameterStep::automatic, 10, Resampling::multinomial};
  const auto records = run_chain(gibbs, target, iterations, seed);
  const std::size_t first = records.size() / 10;
  const auto p = static_cast<Eigen::Index>(target.spec.num_parameters());
  const auto n = static_cast<Eigen::Index>(records.size() - first);
  Matrix draws(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      draws(i, j) = records[first + static_cast<std::size_t>(i)].theta[static_cast<std::size_t>(j)];
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Matrix centred = draws.rowwise() - mean;
  Matrix cov = centred.transpose() * centred / static_cast<double>(n - 1);
  cov.diagonal().array() += 1e-10 * std::max(1.0, cov.trace() / static_cast<double>(p));
  return cov;
}

const std::vector<std::string> kResultColumns{
    "experiment", "sampler",        "setting",        "replicate",       "parameter",
    "proposal_scale", "ess",        "wall_seconds",   "ess_per_sec",     "acceptance_rate",
    "posterior_mean", "posterior_sd", "error"};

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  for (std::size_t i = 0; i < kResultColumns.size(); ++i)
    out << (i ? "," : "") << kResultColumns[i];
  out << '\n';
  for (const auto& r : rows) {
    out << csv_field(r.experiment) << ',' << csv_field(r.sampler) << ',' << csv_field(r.setting) << ','
        << r.replicate << ',' << csv_field(r.parameter) << ',' << number(r.proposal_scale) << ','
        << number(r.ess) << ',' << number(r.wall_seconds) << ',' << number(r.ess_per_sec) << ','
        << number(r.acceptance_rate) << ',' << number(r.posterior_mean) << ','
        << number(r.posterior_sd) << ',' << csv_field(r.error) << '\n';
  }
}

void write_chain_csv(std::ostream& out, const std::vector<std::string>& parameter_names,
                     const std::vector<ChainRecord>& records) {
  out << "iteration";
  for (const auto& name : parameter_names) out << ',' << name;
  out << ",n_transitions,accepted,step_seconds\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    out << i;
    for (double v : r.theta) out << ',' << number(v);
    out << ',' << r.n_transitions << ',' << (r.accepted ? 1 : 0) << ',' << number(r.step_seconds) << '\n';
  }
}

ChainDump read_chain_csv(std::istream& in) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) cells.push_back(cell);
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("chain dump is empty");
  const auto header = split(line);
  if (header.size() < 5 || header.front() != "iteration" || header[header.size() - 3] != "n_transitions" ||
      header[header.size() - 2] != "accepted" || header.back() != "step_seconds")
    throw IngestionError("unrecognised chain dump header", 1);
  ChainDump dump;
  dump.parameter_names.assign(header.begin() + 1, header.end() - 3);
  const std::size_t p = dump.parameter_names.size();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw IngestionError("wrong number of columns", line_no);
    ChainRecord r;
    try {
      for (std::size_t j = 0; j < p; ++j) r.theta.push_back(std::stod(cells[1 + j]));
      r.n_transitions = std::stoul(cells[1 + p]);
      r.accepted = std::stoi(cells[2 + p]) != 0;
      r.step_seconds = std::stod(cells[3 + p]);
    } catch (const std::exception&) {
      throw IngestionError("non-numeric entry", line_no);
    }
    dump.records.push_back(std::move(r));
  }
  return dump;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const auto out_dir = options.output_dir;
  if (out_dir) std::filesystem::create_directories(*out_dir / "chains");
  const int threads = std::max(1, options.threads.value_or(config.threads));

  // Per-replicate data. Synthetic data is regenerated per replicate from the
  // replicate seed; event-file data is shared.
  std::vector<ObservationSet> data(config.n_replicates);
  std::vector<std::string> data_errors(config.n_replicates);
  const double t_end = config.data.t_end();
  std::optional<ObservationSet> shared;
  if (config.data.kind == DataSource::Kind::event_file)
    shared = load_event_file(config.data.event_file.path, config.data.event_file.rescale_to,
                             config.model.dim).observations;
  for (std::size_t r = 0; r < config.n_replicates; ++r) {
    if (shared) {
      data[r] = *shared;
      continue;
    }
    Rng rng = Rng(config.seed + r).split(0);
    data[r] = generate_synthetic(config.model, config.data.synthetic, rng).observations;
  }

  // Gibbs pilot covariances, one per replicate, shared by every setting that
  // asks for one.
  std::vector<std::optional<Matrix>> pilots(config.n_replicates);
  int pilot_iterations = 0;
  for (const auto& s : config.settings)
    if (s.pilot_covariance) pilot_iterations = std::max(pilot_iterations, s.pilot_iterations);
  if (pilot_iterations > 0) {
    for (std::size_t r = 0; r < config.n_replicates; ++r) {
      try {
        ModelSpec spec = config.model;
        spec.omega = OmegaPolicy::single(2.0);
        spec.proposal = ProposalKernel::lognormal(1.0, spec.num_parameters());
        Target target(spec, data[r], t_end);
        pilots[r] = pilot_covariance(target, static_cast<std::size_t>(pilot_iterations),
                                     Rng(config.seed + r).split(1)());
      } catch (const std::exception& e) {
        data_errors[r] = std::string("pilot run failed: ") + e.what();
      }
    }
  }

  std::vector<Cell> cells;
  for (std::size_t r = 0; r < config.n_replicates; ++r)
    for (std::size_t s = 0; s < config.settings.size(); ++s) cells.push_back({s, r});
  std::vector<CellOutput> outputs(cells.size());
  const auto names = config.model.parameter_names();

  auto run_cell = [&](std::size_t index) {
    const Cell cell = cells[index];
    const SamplerSetting& setting = config.settings[cell.setting];
    CellOutput& out = outputs[index];
    auto emit = [&](const std::vector<ChainRecord>* records, const std::string& error) {
      const std::size_t n = records ? records->size() : 0;
      const auto first = static_cast<std::size_t>(std::floor(config.burn_in * static_cast<double>(n)));
      double wall = 0.0;
      std::size_t accepted = 0;
      for (std::size_t i = 0; i < n; ++i) {
        wall += (*records)[i].step_seconds;
        if (i >= first && (*records)[i].accepted) ++accepted;
      }
      for (std::size_t j = 0; j < names.size(); ++j) {
        ResultRow row;
        row.experiment = config.name;
        row.sampler = setting.series;
        row.setting = setting.id;
        row.replicate = cell.replicate;
        row.parameter = names[j];
        row.proposal_scale = setting.proposal_scale;
        row.error = error;
        row.ess = row.ess_per_sec = row.acceptance_rate = row.posterior_mean = row.posterior_sd = kNaN;
        row.wall_seconds = records ? wall : kNaN;
        if (records && n > first) {
          const auto trace = parameter_trace(*records, j, first);
          const double m = static_cast<double>(trace.size());
          double mean = 0.0;
          for (double v : trace) mean += v;
          mean /= m;
          double ss = 0.0;
          for (double v : trace) ss += (v - mean) * (v - mean);
          row.posterior_mean = mean;
          row.posterior_sd = trace.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
          row.acceptance_rate = static_cast<double>(accepted) / m;
          if (trace.size() >= 10) {
            row.ess = effective_sample_size(trace).ess;
            row.ess_per_sec = wall > 0.0 ? row.ess / wall : kNaN;
          }
        }
        out.rows.push_back(std::move(row));
      }
    };

    if (!data_errors[cell.replicate].empty()) {
      out.failed = true;
      emit(nullptr, data_errors[cell.replicate]);
      return;
    }
    try {
      ModelSpec spec = config.model;
      spec.omega = setting.omega;
      spec.proposal = setting.proposal;
      if (setting.pilot_covariance)
        spec.proposal = ProposalKernel::gaussian(*pilots[cell.replicate], setting.proposal_scale);
      const Target target(spec, data[cell.replicate], t_end);
      const std::uint64_t seed = Rng(config.seed + cell.replicate).split(2 + cell.setting)();
      const auto records = run_chain(setting.kernel, target, config.n_iter, seed);
      if (out_dir && config.write_chains) {
        std::ofstream f(*out_dir / "chains" /
                        (file_stem(config.name + "_" + setting.id) + "_rep" +
                         std::to_string(cell.replicate) + ".csv"));
        write_chain_csv(f, names, records);
      }
      emit(&records, "");
    } catch (const std::exception& e) {
      out.failed = true;
      out.rows.clear();
      emit(nullptr, e.what());
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) run_cell(i);
  };
  const auto pool_size = std::min<std::size_t>(static_cast<std::size_t>(threads), cells.size());
  if (pool_size <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < pool_size; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Collector: rows ordered by (replicate, setting, parameter) regardless of
  // completion order.
  ExperimentResult result;
  for (auto& o : outputs) {
    if (o.failed) ++result.failed_cells;
    for (auto& row : o.rows) result.rows.push_back(std::move(row));
  }
  if (out_dir) {
    std::ofstream csv(*out_dir / "results.csv");
    write_results_csv(csv, result.rows);
    nlohmann::json meta{{"schema_version", kConfigSchemaVersion},
                        {"experiment", config.name},
                        {"seed", config.seed},
                        {"n_iter", config.n_iter},
                        {"n_replicates", config.n_replicates},
                        {"burn_in", config.burn_in},
                        {"threads", threads},
                        {"failed_cells", result.failed_cells},
                        {"columns", kResultColumns}};
    std::ofstream(*out_dir / "metadata.json") << meta.dump(2) << '\n';
  }
  return result;
}

}  // namespace mjp
