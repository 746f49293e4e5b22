#pragma once

// MCMC kernels over (theta, path): Rao-Teh Gibbs, naive grid-conditioned MH,
// symmetrized MH and particle-marginal MH, plus a chain runner.

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "mjp/core.hpp"
#include "mjp/gridhmm.hpp"
#include "mjp/models.hpp"
#include "mjp/random.hpp"

namespace mjp {

/// Model plus data on [0, t_end]. The constructor pins spec.horizon to t_end.
struct Target {
  Target(ModelSpec spec, ObservationSet observations, double t_end);

  ModelSpec spec;
  ObservationSet observations;
  double t_end;
  std::vector<double> pi0;
};

enum class KernelKind { gibbs, naive_mh, symmetrized_mh, pmmh };

std::string_view kernel_name(KernelKind kind);
KernelKind parse_kernel(std::string_view name);

enum class ParameterStep {
  automatic,   // conjugate where the family has one, otherwise metropolis
  conjugate,
  metropolis,  // MH-within-Gibbs on p(theta) P(path | theta) P(X | path, theta)
};

enum class Resampling { multinomial, systematic };

struct KernelConfig {
  KernelKind kind = KernelKind::symmetrized_mh;
  ParameterStep parameter_step = ParameterStep::automatic;
  int particles = 10;
  Resampling resampling = Resampling::multinomial;
};

struct ChainState {
  ModelParams theta;
  Trajectory path;
  /// Last auxiliary parameter of the symmetrized kernel (diagnostic only;
  /// regenerated every step).
  std::optional<ModelParams> aux;
  std::size_t iteration = 0;
  /// PMMH carry: particle estimate of log P(X | theta).
  std::optional<double> log_likelihood_estimate;
};

struct StepOutcome {
  bool accepted = false;
  /// log P(X | W, theta') for grid kernels, the carried particle estimate for
  /// PMMH.
  double log_marginal = 0.0;
  double log_acceptance = 0.0;
};

struct ChainRecord {
  std::vector<double> theta;
  std::size_t n_transitions = 0;
  bool accepted = false;
  double log_marginal = 0.0;
  double step_seconds = 0.0;
};

/// One Rao-Teh update of the path given theta: thin, forward filter, backward
/// sample, collapse. Uses omega_single(spec, theta).
Trajectory rao_teh_path_step(const Trajectory& path, const ModelParams& theta,
                             const Target& target, Rng& rng, double* log_marginal = nullptr);

StepOutcome gibbs_step(ChainState& state, const Target& target, const KernelConfig& config,
                       Rng& rng);
StepOutcome naive_mh_step(ChainState& state, const Target& target, Rng& rng);
StepOutcome symmetrized_mh_step(ChainState& state, const Target& target, Rng& rng);
StepOutcome pmmh_step(ChainState& state, const Target& target, const KernelConfig& config,
                      Rng& rng);

StepOutcome kernel_step(ChainState& state, const Target& target, const KernelConfig& config,
                        Rng& rng);

/// Terms of the naive-MH log acceptance ratio on a fixed grid.
struct NaiveMhTerms {
  double log_marginal_current = 0.0;
  double log_marginal_proposed = 0.0;
  double log_grid_current = 0.0;   // log P(W | theta)
  double log_grid_proposed = 0.0;  // log P(W | vartheta)
  double log_prior_ratio = 0.0;
  double log_proposal_ratio = 0.0;

  double total() const {
    return log_marginal_proposed - log_marginal_current + log_grid_proposed - log_grid_current +
           log_prior_ratio + log_proposal_ratio;
  }
};

NaiveMhTerms naive_mh_terms(std::span<const double> grid, const ModelParams& theta,
                            const ModelParams& proposed, const Target& target);

/// Terms of the symmetrized log acceptance ratio for swapping (theta,
/// vartheta) on a grid of rate omega. No grid-density term exists.
struct SymmetrizedTerms {
  double log_marginal_current = 0.0;
  double log_marginal_proposed = 0.0;
  double log_prior_ratio = 0.0;
  double log_proposal_ratio = 0.0;

  double total() const {
    return log_marginal_proposed - log_marginal_current + log_prior_ratio + log_proposal_ratio;
  }
};

SymmetrizedTerms symmetrized_terms(std::span<const double> grid, double omega,
                                   const ModelParams& theta, const ModelParams& proposed,
                                   const Target& target);

struct ParticleEstimate {
  double log_likelihood = 0.0;
  /// All weights vanished at some observation.
  bool degenerate = false;
  /// Path drawn from the final particle system (when requested).
  std::optional<Trajectory> path;
};

/// Bootstrap particle filter over Gaussian point observations, propagating
/// particles with the prior dynamics. exp(log_likelihood) is unbiased for
/// P(X | theta).
ParticleEstimate bootstrap_particle_filter(const Target& target, const ModelParams& theta,
                                           int particles, Rng& rng, bool keep_path = false,
                                           Resampling resampling = Resampling::multinomial);

/// Conditional SMC: as above but particle 0 is pinned to `reference`. Gives
/// the auxiliary-variable law of the PMMH extended target given the path.
ParticleEstimate conditional_particle_filter(const Target& target, const ModelParams& theta,
                                             int particles, const Trajectory& reference, Rng& rng,
                                             Resampling resampling = Resampling::multinomial);

/// theta ~ prior, path simulated under theta ignoring the data.
ChainState initial_state(const Target& target, Rng& rng);

using RecordSink = std::function<void(const ChainRecord&)>;

/// Runs n_iter kernel steps. Deterministic given seed. Timings cover the
/// kernel step only. `init` defaults to initial_state with a seed-derived
/// stream.
std::vector<ChainRecord> run_chain(const KernelConfig& config, const Target& target,
                                   std::size_t n_iter, std::uint64_t seed,
                                   std::optional<ChainState> init = std::nullopt,
                                   const RecordSink& sink = {});

}  // namespace mjp
