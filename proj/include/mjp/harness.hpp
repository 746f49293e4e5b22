#pragma once

// Experiment engine: JSON configuration, data sources, the sampler x setting
// x replicate grid, and CSV/SVG output.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mjp/models.hpp"
#include "mjp/samplers.hpp"

namespace mjp {

inline constexpr int kConfigSchemaVersion = 1;

struct SyntheticDataConfig {
  double t_end = 20.0;
  /// Explicit Gaussian observation times; when empty, `n_observations`
  /// equally spaced interior points t_end * k / (n + 1).
  std::vector<double> observation_times;
  int n_observations = 19;
  /// When positive, overrides n_observations: one observation every
  /// `observation_spacing` time units strictly inside (0, t_end).
  double observation_spacing = 0.0;
  double noise_variance = 1.0;

  std::vector<double> resolved_times() const;
};

struct EventFileConfig {
  std::filesystem::path path;
  double rescale_to = 20.0;
};

struct DataSource {
  enum class Kind { synthetic, event_file };
  Kind kind = Kind::synthetic;
  SyntheticDataConfig synthetic;
  EventFileConfig event_file;

  double t_end() const { return kind == Kind::synthetic ? synthetic.t_end : event_file.rescale_to; }
};

/// One (kernel, policy, proposal) combination: a column of the benchmark
/// grid.
struct SamplerSetting {
  std::string series;  // plot series, e.g. "symmetrized_mh additive(1)"
  std::string id;      // unique, e.g. "symmetrized_mh additive(1) var=0.5"
  KernelConfig kernel;
  OmegaPolicy omega;
  ProposalKernel proposal;
  /// x-axis value: lognormal variance or gaussian scale; NaN when the
  /// setting has no proposal.
  double proposal_scale = 0.0;
  /// Gaussian proposals: estimate the covariance from a Gibbs pilot run.
  bool pilot_covariance = false;
  int pilot_iterations = 500;
};

struct ExperimentConfig {
  std::string name = "experiment";
  ModelSpec model;
  DataSource data;
  std::vector<SamplerSetting> settings;
  std::size_t n_iter = 1000;
  std::size_t n_replicates = 1;
  std::uint64_t seed = 1;
  double burn_in = 0.1;
  int threads = 1;
  bool write_chains = true;
  /// Relative paths in the config resolve against this directory.
  std::filesystem::path base_dir = ".";
};

/// Parses schema v1. Throws ConfigError with a description of the first
/// problem found.
ExperimentConfig parse_config(const nlohmann::json& json,
                              const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

struct SyntheticDataset {
  ModelParams truth;
  Trajectory path;
  ObservationSet observations;
  double t_end;
};

/// theta ~ prior, initial state ~ pi0, path by exact simulation, then
/// Gaussian observations (or MMPP events for mmpp_two_state).
SyntheticDataset generate_synthetic(const ModelSpec& spec, const SyntheticDataConfig& data,
                                    Rng& rng);

/// Draws observations given a path: Gaussian points at `times`, or Poisson
/// events at rates `rates` per state.
ObservationSet simulate_observations(const Trajectory& path, std::span<const double> times,
                                     double noise_variance, Rng& rng);
ObservationSet simulate_events(const Trajectory& path, std::span<const double> rates, Rng& rng);

struct EventFile {
  ObservationSet observations;
  /// All positions equal, so every event maps to 0.
  bool degenerate_span = false;
};

/// Reads newline-delimited nonnegative positions and maps their span onto
/// [0, target]. Blank lines are skipped.
EventFile load_event_file(const std::filesystem::path& path, double target, int num_states = 2);

struct ResultRow {
  std::string experiment;
  std::string sampler;
  std::string setting;
  std::size_t replicate = 0;
  std::string parameter;
  double proposal_scale = 0.0;
  double ess = 0.0;
  double wall_seconds = 0.0;
  double ess_per_sec = 0.0;
  double acceptance_rate = 0.0;
  double posterior_mean = 0.0;
  double posterior_sd = 0.0;
  std::string error;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::size_t failed_cells = 0;
};

struct RunOptions {
  std::optional<std::filesystem::path> output_dir;
  std::optional<int> threads;
};

/// Runs every (setting, replicate) cell. Deterministic per seed apart from
/// the timing columns. Cell failures are recorded in the error column.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Covariance of theta over a Gibbs pilot run (the proposal recipe for
/// Gaussian random walks).
Matrix pilot_covariance(const Target& target, std::size_t iterations, std::uint64_t seed);

extern const std::vector<std::string> kResultColumns;
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);

void write_chain_csv(std::ostream& out, const std::vector<std::string>& parameter_names,
                     const std::vector<ChainRecord>& records);

struct ChainDump {
  std::vector<std::string> parameter_names;
  std::vector<ChainRecord> records;
};
ChainDump read_chain_csv(std::istream& in);

/// One SVG per (experiment, parameter). Returns the written paths.
std::vector<std::filesystem::path> emit_plots(const std::vector<ResultRow>& rows,
                                              const std::filesystem::path& output_dir);

/// SVG text for the rows of one (experiment, parameter) group.
std::string render_plot(const std::vector<ResultRow>& rows, const std::string& title);

}  // namespace mjp
