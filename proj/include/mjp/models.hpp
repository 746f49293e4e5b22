#pragma once

// Parametric MJP families, their priors, proposal kernels and
// uniformization-rate policies.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mjp/core.hpp"
#include "mjp/random.hpp"

namespace mjp {

enum class Family {
  exp_decay,
  immigration_capacity,
  birth_death,
  jc69,
  immigration_inhomogeneous,
  mmpp_two_state,
};

std::string_view family_name(Family family);
Family parse_family(std::string_view name);

/// Ordered positive parameter vector theta. Names come from the family.
struct ModelParams {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const ModelParams&) const = default;
};

/// Gamma(shape, rate).
struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;

  double log_density(double x) const;
  double mean() const { return shape / rate; }
  double variance() const { return shape / (rate * rate); }
  bool operator==(const GammaPrior&) const = default;
};

struct OmegaPolicy {
  enum class Kind { single, additive, max_of_max };
  Kind kind = Kind::single;
  double kappa = 2.0;

  static OmegaPolicy single(double kappa) { return {Kind::single, kappa}; }
  static OmegaPolicy additive(double kappa) { return {Kind::additive, kappa}; }
  static OmegaPolicy max_of_max(double kappa) { return {Kind::max_of_max, kappa}; }

  /// Throws ConfigError unless kappa guarantees strict domination.
  void validate() const;
  std::string label() const;
};

struct ProposalKernel {
  enum class Kind { lognormal_rw, gaussian_rw };
  Kind kind = Kind::lognormal_rw;
  /// lognormal_rw: per-parameter log-scale variances sigma^2.
  std::vector<double> variances;
  /// gaussian_rw: covariance Sigma, scaled by `scale` (kappa).
  Matrix covariance;
  double scale = 1.0;

  /// Lower Cholesky factor of scale * covariance, set by gaussian().
  Matrix cholesky;

  static ProposalKernel lognormal(std::vector<double> variances);
  static ProposalKernel lognormal(double variance, std::size_t dim);
  /// Throws ConfigError unless the covariance is symmetric positive definite.
  static ProposalKernel gaussian(Matrix covariance, double scale);

  void validate(std::size_t dim) const;
};

struct ModelSpec {
  Family family = Family::immigration_capacity;
  int dim = 3;
  std::vector<GammaPrior> priors;
  ProposalKernel proposal;
  OmegaPolicy omega;
  /// Empty means uniform over states.
  std::vector<double> pi0;
  /// Right end of the time window; bounds the breakpoints of time-dependent
  /// families.
  double horizon = 20.0;
  /// Period of the arrival-rate step function w(t) = floor(t / period).
  double inhomogeneity_period = 5.0;

  std::size_t num_parameters() const;
  std::vector<std::string> parameter_names() const;
  std::vector<double> initial_distribution() const;
  /// Checks dimension/arity/prior/policy consistency; throws ConfigError.
  void validate() const;
};

/// Spec with the priors used in the experiments for this family and a
/// lognormal proposal of variance 1.
ModelSpec default_spec(Family family, int dim);

RateMatrix build_rate_matrix(const ModelSpec& spec, const ModelParams& theta);

/// Per-state Poisson emission rates (mmpp_two_state only).
std::vector<double> emission_rates(const ModelSpec& spec, const ModelParams& theta);

double max_exit_rate(const ModelSpec& spec, const ModelParams& theta);

/// Uniformization rate for a single parameter.
double omega_single(const ModelSpec& spec, const ModelParams& theta);
/// Uniformization rate shared by a current/proposed pair.
double omega_pair(const ModelSpec& spec, const ModelParams& theta, const ModelParams& proposed);
/// omega_pair from already-computed maximal exit rates.
double omega_pair(const OmegaPolicy& policy, double max_exit_current, double max_exit_proposed);

double log_prior(const ModelSpec& spec, const ModelParams& theta);
ModelParams sample_prior(const ModelSpec& spec, Rng& rng);

ModelParams propose(const ProposalKernel& kernel, const ModelParams& theta, Rng& rng);
/// log q(theta | proposed) - log q(proposed | theta).
double log_proposal_ratio(const ProposalKernel& kernel, const ModelParams& theta,
                          const ModelParams& proposed);
/// log q(to | from); used to check the ratio bookkeeping.
double log_proposal_density(const ProposalKernel& kernel, const ModelParams& from,
                            const ModelParams& to);

bool all_positive(const ModelParams& theta);

/// Conditional Gamma posteriors of (alpha, beta) for the capacity-N
/// immigration model with death rate i * beta given a path:
///   alpha ~ Gamma(mu + U, lambda + t_end - tau_{N-1})
///   beta  ~ Gamma(omega + D, theta + sum_i tau_i * i)
std::pair<GammaPrior, GammaPrior> conjugate_update_immigration(const GammaPrior& alpha_prior,
                                                               const GammaPrior& beta_prior,
                                                               const PathStatistics& stats,
                                                               double t_end);

/// JC69: alpha | path ~ Gamma(shape + |T|, rate + 3 t_end).
GammaPrior conjugate_update_jc69(const GammaPrior& prior, std::size_t num_jumps, double t_end);

/// Two-state MMPP: switching rates from transition counts and dwell times,
/// emission rates from per-state event counts and dwell times. Returns the
/// four posteriors in (alpha, beta, lambda1, lambda2) order.
std::vector<GammaPrior> conjugate_update_mmpp(std::span<const GammaPrior> priors,
                                              const PathStatistics& stats,
                                              std::span<const int> events_per_state);

bool has_conjugate_update(Family family);

}  // namespace mjp
