#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mjp/errors.hpp"
#include "mjp/samplers.hpp"

namespace mjp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093453;

struct Particle {
  int initial = 0;
  int state = 0;
  std::vector<double> times;
  std::vector<int> states;
};

void resample_indices(std::span<const double> weights, std::vector<std::size_t>& ancestors,
                      Resampling scheme, Rng& rng) {
  const std::size_t p = ancestors.size();
  if (scheme == Resampling::multinomial) {
    for (auto& a : ancestors) a = rng.categorical(weights);
    return;
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double step = total / static_cast<double>(p);
  double u = rng.uniform() * step;
  double cumulative = weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < p; ++i) {
    while (u > cumulative && j + 1 < weights.size()) cumulative += weights[++j];
    ancestors[i] = j;
    u += step;
  }
}

// Shared filter. When `reference` is set, particle 0 follows it and keeps its
// own lineage through every resampling.
ParticleEstimate run_filter(const Target& target, const ModelParams& theta, int particles,
                            Rng& rng, bool keep_path, Resampling resampling,
                            const Trajectory* reference) {
  if (target.observations.kind() != ObservationSet::Kind::gaussian_points)
    throw UnsupportedInput("the particle filter handles Gaussian point observations only");
  if (particles < 1) throw PreconditionError("particle count must be positive");
  const RateMatrix rates = build_rate_matrix(target.spec, theta);
  const auto p = static_cast<std::size_t>(particles);

  std::vector<Particle> system(p), next(p);
  for (std::size_t i = 0; i < p; ++i) {
    const int s0 = reference && i == 0 ? reference->initial_state()
                                       : static_cast<int>(rng.categorical(target.pi0));
    system[i].initial = system[i].state = s0;
  }

  ParticleEstimate out;
  std::vector<double> log_w(p), w(p);
  std::vector<std::size_t> ancestors(p);
  double t_prev = 0.0;
  for (const auto& obs : target.observations.points()) {
    for (std::size_t i = 0; i < p; ++i) {
      if (reference && i == 0) {
        system[0].state = reference->state_at(obs.time);
        continue;
      }
      system[i].state = advance_state(rates, system[i].state, t_prev, obs.time, rng,
                                      keep_path ? &system[i].times : nullptr,
                                      keep_path ? &system[i].states : nullptr);
    }
    t_prev = obs.time;
    double top = kNegInf;
    for (std::size_t i = 0; i < p; ++i) {
      const double d = obs.value - system[i].state;
      log_w[i] = -0.5 * (kLog2Pi + std::log(obs.variance)) - d * d / (2.0 * obs.variance);
      top = std::max(top, log_w[i]);
    }
    if (top == kNegInf) {
      out.degenerate = true;
      out.log_likelihood = kNegInf;
      return out;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < p; ++i) total += (w[i] = std::exp(log_w[i] - top));
    out.log_likelihood += top + std::log(total / static_cast<double>(p));

    resample_indices(w, ancestors, reference ? Resampling::multinomial : resampling, rng);
    if (reference) ancestors[0] = 0;
    for (std::size_t i = 0; i < p; ++i) {
      if (keep_path) {
        next[i] = system[ancestors[i]];
      } else {
        next[i].initial = system[ancestors[i]].initial;
        next[i].state = system[ancestors[i]].state;
      }
    }
    std::swap(system, next);
  }

  if (keep_path) {
    // The system was resampled after the last observation, so a uniform pick
    // is a draw from the weighted particle approximation.
    Particle chosen = system[static_cast<std::size_t>(rng.uniform() * static_cast<double>(p)) % p];
    advance_state(rates, chosen.state, t_prev, target.t_end, rng, &chosen.times, &chosen.states);
    out.path.emplace(chosen.initial, std::move(chosen.times), std::move(chosen.states), target.t_end);
  }
  return out;
}

}  // namespace

ParticleEstimate bootstrap_particle_filter(const Target& target, const ModelParams& theta,
                                           int particles, Rng& rng, bool keep_path,
                                           Resampling resampling) {
  return run_filter(target, theta, particles, rng, keep_path, resampling, nullptr);
}

ParticleEstimate conditional_particle_filter(const Target& target, const ModelParams& theta,
                                             int particles, const Trajectory& reference, Rng& rng,
                                             Resampling resampling) {
  return run_filter(target, theta, particles, rng, false, resampling, &reference);
}

}  // namespace mjp
