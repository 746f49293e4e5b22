#include "mjp/samplers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mjp/errors.hpp"

namespace mjp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-interval log-likelihoods of the data under theta. Only the MMPP family
// has parameter-dependent emissions.
Matrix log_likelihoods(const Target& target, std::span<const double> grid,
                       const ModelParams& theta) {
  return grid_log_likelihoods(target.observations, grid, target.t_end, target.spec.dim,
                              emission_rates(target.spec, theta));
}

bool emissions_depend_on_theta(const Target& target) {
  return target.spec.family == Family::mmpp_two_state;
}

// MH accept/reject. Always consumes exactly one uniform.
bool accept(double log_ratio, Rng& rng) {
  const double log_u = std::log(rng.uniform());
  return log_ratio >= 0.0 || log_u < log_ratio;
}

Trajectory relabel(const Grid& grid, std::vector<int> states, double t_end) {
  Grid labelled{grid.times, std::move(states)};
  return collapse_grid(labelled, t_end);
}

struct GridPass {
  StepMatrices steps;
  FilterMessages messages;
};

GridPass filter_on_grid(const Target& target, std::span<const double> grid,
                        const RateMatrix& rates, double omega, const Matrix& log_lik) {
  GridPass pass{StepMatrices::build(rates, omega, grid), {}};
  pass.messages = forward_pass(log_lik, pass.steps, target.pi0);
  return pass;
}

// log p(theta) + log P(path | theta) + log P(X | path, theta), dropping terms
// that do not depend on theta.
double conditional_log_target(const Target& target, const Trajectory& path,
                              const ModelParams& theta) {
  if (!all_positive(theta)) return kNegInf;
  double lp = log_prior(target.spec, theta);
  lp += trajectory_log_likelihood(path, build_rate_matrix(target.spec, theta));
  if (emissions_depend_on_theta(target)) {
    const auto rates = emission_rates(target.spec, theta);
    path.for_each_segment([&](double a, double b, int s) {
      lp += interval_log_likelihood(target.observations, s, a, b, rates);
    });
  }
  return lp;
}

std::vector<int> events_per_state(const Target& target, const Trajectory& path) {
  std::vector<int> counts(static_cast<std::size_t>(target.spec.dim), 0);
  for (double t : target.observations.events())
    ++counts[static_cast<std::size_t>(path.state_at(t))];
  return counts;
}

void conjugate_parameter_step(ChainState& state, const Target& target, Rng& rng) {
  const ModelSpec& spec = target.spec;
  switch (spec.family) {
    case Family::immigration_capacity: {
      const auto stats = path_statistics(state.path, spec.dim);
      const auto [a, b] = conjugate_update_immigration(spec.priors[0], spec.priors[1], stats, target.t_end);
      state.theta.values = {rng.gamma(a.shape, a.rate), rng.gamma(b.shape, b.rate)};
      return;
    }
    case Family::jc69: {
      const auto post = conjugate_update_jc69(spec.priors[0], state.path.num_jumps(), target.t_end);
      state.theta.values = {rng.gamma(post.shape, post.rate)};
      return;
    }
    case Family::mmpp_two_state: {
      const auto stats = path_statistics(state.path, spec.dim);
      const auto counts = events_per_state(target, state.path);
      const auto post = conjugate_update_mmpp(spec.priors, stats, counts);
      state.theta.values.clear();
      for (const auto& g : post) state.theta.values.push_back(rng.gamma(g.shape, g.rate));
      return;
    }
    default:
      throw ConfigError("no conjugate parameter update for family " +
                        std::string(family_name(spec.family)));
  }
}

}  // namespace

Target::Target(ModelSpec spec_, ObservationSet observations_, double t_end_)
    : spec(std::move(spec_)), observations(std::move(observations_)), t_end(t_end_) {
  if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
  spec.horizon = t_end;
  spec.validate();
  observations.validate(t_end);
  if (observations.kind() == ObservationSet::Kind::poisson_events &&
      spec.family != Family::mmpp_two_state && observations.rates().size() != static_cast<std::size_t>(spec.dim))
    throw ConfigError("event observations need one emission rate per state");
  pi0 = spec.initial_distribution();
}

std::string_view kernel_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::gibbs: return "gibbs";
    case KernelKind::naive_mh: return "naive_mh";
    case KernelKind::symmetrized_mh: return "symmetrized_mh";
    case KernelKind::pmmh: return "pmmh";
  }
  return "unknown";
}

KernelKind parse_kernel(std::string_view name) {
  for (auto k : {KernelKind::gibbs, KernelKind::naive_mh, KernelKind::symmetrized_mh, KernelKind::pmmh})
    if (kernel_name(k) == name) return k;
  throw ConfigError("unknown kernel '" + std::string(name) + "'");
}

Trajectory rao_teh_path_step(const Trajectory& path, const ModelParams& theta,
                             const Target& target, Rng& rng, double* log_marginal) {
  const RateMatrix rates = build_rate_matrix(target.spec, theta);
  const double omega = omega_single(target.spec, theta);
  const Thinning thin = sample_thinned_times(path, rates, omega, rng);
  const auto& grid = thin.grid.times;
  GridPass pass = filter_on_grid(target, grid, rates, omega, log_likelihoods(target, grid, theta));
  if (pass.messages.impossible) throw std::runtime_error("observations impossible under every path on the grid");
  if (log_marginal) *log_marginal = pass.messages.log_marginal;
  return relabel(thin.grid, backward_sample(pass.messages, pass.steps, rng), target.t_end);
}

StepOutcome gibbs_step(ChainState& state, const Target& target, const KernelConfig& config,
                       Rng& rng) {
  StepOutcome out;
  state.path = rao_teh_path_step(state.path, state.theta, target, rng, &out.log_marginal);

  ParameterStep mode = config.parameter_step;
  if (mode == ParameterStep::automatic)
    mode = has_conjugate_update(target.spec.family) ? ParameterStep::conjugate : ParameterStep::metropolis;

  if (mode == ParameterStep::conjugate) {
    conjugate_parameter_step(state, target, rng);
    out.accepted = true;
  } else {
    const ModelParams proposed = propose(target.spec.proposal, state.theta, rng);
    double log_ratio = kNegInf;
    if (all_positive(proposed)) {
      log_ratio = conditional_log_target(target, state.path, proposed) -
                  conditional_log_target(target, state.path, state.theta) +
                  log_proposal_ratio(target.spec.proposal, state.theta, proposed);
    }
    out.log_acceptance = std::min(0.0, log_ratio);
    out.accepted = accept(log_ratio, rng);
    if (out.accepted) state.theta = proposed;
  }
  ++state.iteration;
  return out;
}

NaiveMhTerms naive_mh_terms(std::span<const double> grid, const ModelParams& theta,
                            const ModelParams& proposed, const Target& target) {
  NaiveMhTerms terms;
  const double omega_cur = omega_single(target.spec, theta);
  const double omega_prop = omega_single(target.spec, proposed);
  const Matrix ll_cur = log_likelihoods(target, grid, theta);
  terms.log_marginal_current =
      filter_on_grid(target, grid, build_rate_matrix(target.spec, theta), omega_cur, ll_cur)
          .messages.log_marginal;
  terms.log_marginal_proposed =
      filter_on_grid(target, grid, build_rate_matrix(target.spec, proposed), omega_prop,
                     emissions_depend_on_theta(target) ? log_likelihoods(target, grid, proposed) : ll_cur)
          .messages.log_marginal;
  terms.log_grid_current = poisson_process_log_density(grid.size(), omega_cur, target.t_end);
  terms.log_grid_proposed = poisson_process_log_density(grid.size(), omega_prop, target.t_end);
  terms.log_prior_ratio = log_prior(target.spec, proposed) - log_prior(target.spec, theta);
  terms.log_proposal_ratio = log_proposal_ratio(target.spec.proposal, theta, proposed);
  return terms;
}

StepOutcome naive_mh_step(ChainState& state, const Target& target, Rng& rng) {
  StepOutcome out;
  const ModelSpec& spec = target.spec;
  const RateMatrix rates = build_rate_matrix(spec, state.theta);
  const double omega = omega_single(spec, state.theta);
  const Thinning thin = sample_thinned_times(state.path, rates, omega, rng);
  const auto& grid = thin.grid.times;
  const ModelParams proposed = propose(spec.proposal, state.theta, rng);

  const Matrix ll_cur = log_likelihoods(target, grid, state.theta);
  GridPass current = filter_on_grid(target, grid, rates, omega, ll_cur);
  GridPass* winner = &current;
  GridPass candidate;
  double log_ratio = kNegInf;
  if (all_positive(proposed)) {
    const double omega_prop = omega_single(spec, proposed);
    candidate = filter_on_grid(target, grid, build_rate_matrix(spec, proposed), omega_prop,
                               emissions_depend_on_theta(target) ? log_likelihoods(target, grid, proposed) : ll_cur);
    log_ratio = candidate.messages.log_marginal - current.messages.log_marginal +
                poisson_process_log_density(grid.size(), omega_prop, target.t_end) -
                poisson_process_log_density(grid.size(), omega, target.t_end) +
                log_prior(spec, proposed) - log_prior(spec, state.theta) +
                log_proposal_ratio(spec.proposal, state.theta, proposed);
    if (candidate.messages.impossible) log_ratio = kNegInf;
  }
  out.log_acceptance = std::min(0.0, log_ratio);
  out.accepted = accept(log_ratio, rng);
  if (out.accepted) {
    state.theta = proposed;
    winner = &candidate;
  }
  if (winner->messages.impossible) throw std::runtime_error("observations impossible under every path on the grid");
  out.log_marginal = winner->messages.log_marginal;
  state.path = relabel(thin.grid, backward_sample(winner->messages, winner->steps, rng), target.t_end);
  ++state.iteration;
  return out;
}

SymmetrizedTerms symmetrized_terms(std::span<const double> grid, double omega,
                                   const ModelParams& theta, const ModelParams& proposed,
                                   const Target& target) {
  SymmetrizedTerms terms;
  const Matrix ll_cur = log_likelihoods(target, grid, theta);
  terms.log_marginal_current =
      filter_on_grid(target, grid, build_rate_matrix(target.spec, theta), omega, ll_cur).messages.log_marginal;
  terms.log_marginal_proposed =
      filter_on_grid(target, grid, build_rate_matrix(target.spec, proposed), omega,
                     emissions_depend_on_theta(target) ? log_likelihoods(target, grid, proposed) : ll_cur)
          .messages.log_marginal;
  terms.log_prior_ratio = log_prior(target.spec, proposed) - log_prior(target.spec, theta);
  terms.log_proposal_ratio = log_proposal_ratio(target.spec.proposal, theta, proposed);
  return terms;
}

StepOutcome symmetrized_mh_step(ChainState& state, const Target& target, Rng& rng) {
  StepOutcome out;
  const ModelSpec& spec = target.spec;
  const ModelParams proposed = propose(spec.proposal, state.theta, rng);
  const bool valid = all_positive(proposed);

  const RateMatrix rates = build_rate_matrix(spec, state.theta);
  const double max_cur = rates.max_exit_rate(target.t_end);
  std::optional<RateMatrix> rates_prop;
  double max_prop = max_cur;
  if (valid) {
    rates_prop.emplace(build_rate_matrix(spec, proposed));
    max_prop = rates_prop->max_exit_rate(target.t_end);
  }
  // An invalid proposal is rejected outright; the path is still refreshed on
  // a grid whose rate depends on theta alone.
  const double omega = omega_pair(spec.omega, max_cur, max_prop);

  const Thinning thin = sample_thinned_times(state.path, rates, omega, rng);
  const auto& grid = thin.grid.times;
  const Matrix ll_cur = log_likelihoods(target, grid, state.theta);
  GridPass current = filter_on_grid(target, grid, rates, omega, ll_cur);
  GridPass* winner = &current;
  GridPass candidate;
  double log_ratio = kNegInf;
  if (valid) {
    candidate = filter_on_grid(target, grid, *rates_prop, omega,
                               emissions_depend_on_theta(target) ? log_likelihoods(target, grid, proposed) : ll_cur);
    log_ratio = candidate.messages.log_marginal - current.messages.log_marginal +
                log_prior(spec, proposed) - log_prior(spec, state.theta) +
                log_proposal_ratio(spec.proposal, state.theta, proposed);
    if (candidate.messages.impossible) log_ratio = kNegInf;
  }
  out.log_acceptance = std::min(0.0, log_ratio);
  out.accepted = accept(log_ratio, rng);
  if (out.accepted) {
    state.aux = state.theta;
    state.theta = proposed;
    winner = &candidate;
  } else {
    state.aux = proposed;
  }
  if (winner->messages.impossible) throw std::runtime_error("observations impossible under every path on the grid");
  out.log_marginal = winner->messages.log_marginal;
  state.path = relabel(thin.grid, backward_sample(winner->messages, winner->steps, rng), target.t_end);
  ++state.iteration;
  return out;
}

StepOutcome pmmh_step(ChainState& state, const Target& target, const KernelConfig& config,
                      Rng& rng) {
  StepOutcome out;
  if (!state.log_likelihood_estimate) {
    auto fresh = bootstrap_particle_filter(target, state.theta, config.particles, rng, true, config.resampling);
    state.log_likelihood_estimate = fresh.log_likelihood;
    if (fresh.path) state.path = std::move(*fresh.path);
  }
  const ModelParams proposed = propose(target.spec.proposal, state.theta, rng);
  double log_ratio = kNegInf;
  ParticleEstimate estimate;
  if (all_positive(proposed)) {
    estimate = bootstrap_particle_filter(target, proposed, config.particles, rng, true, config.resampling);
    if (!estimate.degenerate) {
      log_ratio = estimate.log_likelihood - *state.log_likelihood_estimate +
                  log_prior(target.spec, proposed) - log_prior(target.spec, state.theta) +
                  log_proposal_ratio(target.spec.proposal, state.theta, proposed);
    }
  }
  out.log_acceptance = std::min(0.0, log_ratio);
  out.accepted = accept(log_ratio, rng);
  if (out.accepted) {
    state.theta = proposed;
    state.log_likelihood_estimate = estimate.log_likelihood;
    state.path = std::move(*estimate.path);
  }
  out.log_marginal = *state.log_likelihood_estimate;
  ++state.iteration;
  return out;
}

StepOutcome kernel_step(ChainState& state, const Target& target, const KernelConfig& config,
                        Rng& rng) {
  switch (config.kind) {
    case KernelKind::gibbs: return gibbs_step(state, target, config, rng);
    case KernelKind::naive_mh: return naive_mh_step(state, target, rng);
    case KernelKind::symmetrized_mh: return symmetrized_mh_step(state, target, rng);
    case KernelKind::pmmh: return pmmh_step(state, target, config, rng);
  }
  throw std::logic_error("unknown kernel");
}

ChainState initial_state(const Target& target, Rng& rng) {
  ModelParams theta = sample_prior(target.spec, rng);
  const RateMatrix rates = build_rate_matrix(target.spec, theta);
  Trajectory path = rates.time_dependent()
                        ? simulate_uniformized(rates, target.pi0, target.t_end,
                                               2.0 * rates.max_exit_rate(target.t_end) + 1e-9, rng)
                        : gillespie_simulate(rates, target.pi0, target.t_end, rng);
  return ChainState{std::move(theta), std::move(path), std::nullopt, 0, std::nullopt};
}

std::vector<ChainRecord> run_chain(const KernelConfig& config, const Target& target,
                                   std::size_t n_iter, std::uint64_t seed,
                                   std::optional<ChainState> init, const RecordSink& sink) {
  const Rng root(seed);
  Rng init_rng = root.split(0);
  Rng step_rng = root.split(1);
  ChainState state = init ? std::move(*init) : initial_state(target, init_rng);

  std::vector<ChainRecord> records;
  records.reserve(n_iter);
  using Clock = std::chrono::steady_clock;
  for (std::size_t it = 0; it < n_iter; ++it) {
    const auto start = Clock::now();
    const StepOutcome outcome = kernel_step(state, target, config, step_rng);
    const auto stop = Clock::now();
    ChainRecord rec{state.theta.values, state.path.num_jumps(), outcome.accepted,
                    outcome.log_marginal, std::chrono::duration<double>(stop - start).count()};
    if (sink) sink(rec);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace mjp
