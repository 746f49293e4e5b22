// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "geweke.hpp"
#include "mjp/diagnostics.hpp"
#include "mjp/harness.hpp"
#include "oracles.hpp"

using namespace mjp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

ObservationSet points(const std::vector<std::pair<double, double>>& tv, double variance) {
  std::vector<GaussianObservation> p;
  for (auto [t, v] : tv) p.push_back({t, v, variance});
  return ObservationSet::gaussian(std::move(p));
}

// 1. Uniformized simulation reproduces the transition probabilities.
Outcome uniformization() {
  Matrix a(2, 2);
  a << -1, 1, 1, -1;
  const RateMatrix rates(a);
  const oracle::Matrix p = oracle::expm(a, 3.0);
  const std::vector<double> pi0{1.0, 0.0};
  Rng rng(1001);
  Outcome out{true, ""};
  for (double factor : {1.5, 2.0, 3.0}) {
    const int n = 100000;
    double hits = 0.0;
    for (int i = 0; i < n; ++i) hits += simulate_uniformized(rates, pi0, 3.0, factor, rng).final_state() == 0;
    const double phat = hits / n, se = std::sqrt(p(0, 0) * (1 - p(0, 0)) / n);
    const double z = (phat - p(0, 0)) / se;
    out.pass = out.pass && std::abs(z) < 3.0;
    out.detail += fmt("x%.1f: P(S=0)=%.4f vs %.4f (z=%.2f); ", factor, phat, p(0, 0), z);
  }
  return out;
}

// 2. Forward filtering and backward sampling against enumeration.
Outcome ffbs() {
  Rng rng(1002);
  double worst_err = 0.0, worst_p = 1.0;
  for (int inst = 0; inst < 50; ++inst) {
    const int n = 1 + inst % 3;
    const int w = static_cast<int>(inst % 7);
    oracle::Matrix log_lik(w + 1, n);
    for (int i = 0; i <= w; ++i)
      for (int s = 0; s < n; ++s) log_lik(i, s) = -3.0 * rng.uniform();
    std::vector<Matrix> steps;
    for (int i = 0; i < w; ++i) {
      Matrix b(n, n);
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) b(r, c) = 0.05 + rng.uniform();
        b.row(r) /= b.row(r).sum();
      }
      steps.push_back(b);
    }
    std::vector<double> pi0(static_cast<std::size_t>(n));
    double total = 0.0;
    for (auto& v : pi0) total += (v = 0.1 + rng.uniform());
    for (auto& v : pi0) v /= total;

    const auto step_mats = StepMatrices::from_list(steps);
    const auto msg = forward_pass(log_lik, step_mats, pi0);
    worst_err = std::max(worst_err, std::abs(msg.log_marginal - oracle::enumerated_log_marginal(log_lik, steps, pi0)));

    const auto post = oracle::enumerated_posterior(log_lik, steps, pi0);
    std::map<std::vector<int>, std::size_t> index;
    std::vector<double> probs;
    for (const auto& [seq, p] : post) {
      index[seq] = probs.size();
      probs.push_back(p);
    }
    std::vector<double> counts(probs.size(), 0.0);
    const int draws = 100000;
    for (int d = 0; d < draws; ++d) counts[index.at(backward_sample(msg, step_mats, rng))] += 1;
    worst_p = std::min(worst_p, oracle::chi_square_pvalue(counts, probs, draws));
  }
  return {worst_err < 1e-10 && worst_p > 0.001,
          fmt("50 instances: max |log marginal error| = %.2e, min chi-square p = %.4f", worst_err, worst_p)};
}

double immigration_path_log_density(const Trajectory& path, int n, double alpha, double beta) {
  auto rate = [&](int from, int to) { return to == from + 1 ? alpha : to == from - 1 ? from * beta : 0.0; };
  auto exit = [&](int s) { return (s + 1 < n ? alpha : 0.0) + s * beta; };
  double ll = 0.0;
  int prev = path.initial_state();
  double t_prev = 0.0;
  for (std::size_t k = 0; k < path.num_jumps(); ++k) {
    ll += std::log(rate(prev, path.jump_states()[k])) - exit(prev) * (path.jump_times()[k] - t_prev);
    prev = path.jump_states()[k];
    t_prev = path.jump_times()[k];
  }
  return ll - exit(prev) * (path.t_end() - t_prev);
}

// 3. Conjugate immigration update against quadrature of the path density.
Outcome conjugacy() {
  Rng rng(1003);
  const GammaPrior a0{3, 2}, b0{5, 2};
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 3 + rep % 3;
    const auto spec = default_spec(Family::immigration_capacity, n);
    const double alpha = rng.gamma(3, 2), beta = rng.gamma(5, 2);
    const std::vector<double> pi0(static_cast<std::size_t>(n), 1.0 / n);
    const auto path = gillespie_simulate(build_rate_matrix(spec, {{alpha, beta}}), pi0, 20.0, rng);
    const auto [pa, pb] = conjugate_update_immigration(a0, b0, path_statistics(path, n), 20.0);
    const auto ma = oracle::grid_moments(
        [&](double x) { return a0.log_density(x) + immigration_path_log_density(path, n, x, beta); },
        pa.mean() + 12 * std::sqrt(pa.variance()), 2000);
    const auto mb = oracle::grid_moments(
        [&](double x) { return b0.log_density(x) + immigration_path_log_density(path, n, alpha, x); },
        pb.mean() + 12 * std::sqrt(pb.variance()), 2000);
    for (auto [got, want] : {std::pair{pa.mean(), ma.mean}, {pa.variance(), ma.variance}, {pb.mean(), mb.mean},
                             {pb.variance(), mb.variance}})
      worst = std::max(worst, std::abs(got - want) / std::abs(want));
  }
  return {worst < 1e-3, fmt("20 trajectories: max relative error %.2e", worst)};
}

// 4. Joint-distribution test for every kernel.
Outcome stationarity() {
  const geweke::Setup setup = geweke::immigration_setup();
  Outcome out{true, ""};
  std::uint64_t seed = 1004;
  for (auto kind : {KernelKind::gibbs, KernelKind::naive_mh, KernelKind::symmetrized_mh, KernelKind::pmmh}) {
    const auto r = geweke::run(setup, KernelConfig{kind}, 200000, seed++);
    out.pass = out.pass && r.max_abs_z() < 4.0;
    out.detail += fmt("%s max|z|=%.2f; ", std::string(kernel_name(kind)).c_str(), r.max_abs_z());
  }
  return out;
}

struct PosteriorSummary {
  double mean = 0.0, se = 0.0, ess = 0.0;
  std::size_t iterations = 0;
};

// Runs the kernel long enough for `target_ess` effective draws of alpha.
PosteriorSummary long_run(const KernelConfig& kernel, const Target& target, double target_ess, std::uint64_t seed) {
  std::size_t n = 20000;
  for (int attempt = 0; attempt < 4; ++attempt) {
    const auto records = run_chain(kernel, target, n, seed);
    const auto trace = parameter_trace(records, 0, n / 10);
    const double ess = effective_sample_size(trace).ess;
    if (ess >= target_ess || attempt == 3)
      return {oracle::mean(trace), std::sqrt(oracle::variance(trace) / ess), ess, n};
    n = static_cast<std::size_t>(std::ceil(1.3 * static_cast<double>(n) * target_ess / std::max(ess, 1.0)));
  }
  return {};
}

// 5. Posterior mean of alpha agrees across the four kernels.
Outcome cross_sampler() {
  ModelSpec spec = default_spec(Family::immigration_capacity, 3);
  spec.proposal = ProposalKernel::lognormal(0.5, 2);
  spec.omega = OmegaPolicy::single(2.0);
  Rng rng(1005);
  SyntheticDataConfig data;
  data.t_end = 10.0;
  data.n_observations = 9;
  const SyntheticDataset d = generate_synthetic(spec, data, rng);

  std::vector<std::pair<std::string, PosteriorSummary>> runs;
  std::uint64_t seed = 2005;
  for (auto kind : {KernelKind::gibbs, KernelKind::naive_mh, KernelKind::symmetrized_mh, KernelKind::pmmh}) {
    ModelSpec s = spec;
    if (kind == KernelKind::symmetrized_mh) s.omega = OmegaPolicy::additive(1.0);
    const Target target(s, d.observations, d.t_end);
    runs.emplace_back(std::string(kernel_name(kind)), long_run(KernelConfig{kind}, target, 1e4, seed++));
  }
  Outcome out{true, ""};
  for (const auto& [name, r] : runs) {
    out.pass = out.pass && r.ess >= 1e4;
    out.detail += fmt("%s %.4f+-%.4f (ESS %.0f); ", name.c_str(), r.mean, r.se, r.ess);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      const auto& a = runs[i].second;
      const auto& b = runs[j].second;
      worst = std::max(worst, std::abs(a.mean - b.mean) / std::hypot(a.se, b.se));
    }
  out.pass = out.pass && worst < 4.0;
  out.detail += fmt("max pairwise gap %.2f SE", worst);
  return out;
}

// 6. Particle-filter likelihood estimate is unbiased.
Outcome unbiasedness() {
  const ModelSpec spec = default_spec(Family::exp_decay, 2);
  const ObservationSet obs = points({{0.5, 0.0}, {1.2, 1.0}, {2.0, 0.9}}, 0.5);
  const Target target(spec, obs, 2.5);
  const ModelParams theta{{0.8, 1.0}};
  const double exact = std::exp(exact_marginal_likelihood(build_rate_matrix(spec, theta), target.pi0, obs, 2.5));
  Rng rng(1006);
  std::vector<double> est;
  for (int i = 0; i < 10000; ++i) est.push_back(std::exp(bootstrap_particle_filter(target, theta, 10, rng).log_likelihood));
  const double z = (oracle::mean(est) - exact) / oracle::standard_error(est);
  return {std::abs(z) < 3.0, fmt("mean %.6g vs exact %.6g (z=%.2f)", oracle::mean(est), exact, z)};
}

// 7. ESS of AR(1) chains.
Outcome ess_ar1() {
  Rng rng(1007);
  Outcome out{true, ""};
  for (double rho : {0.0, 0.3, 0.5, 0.8}) {
    const std::size_t n = 100000;
    std::vector<double> x(n);
    double v = rng.normal() / std::sqrt(1 - rho * rho);
    for (auto& xi : x) xi = v = rho * v + rng.normal();
    const double want = n * (1 - rho) / (1 + rho);
    const double got = effective_sample_size(x).ess;
    const double rel = std::abs(got - want) / want;
    out.pass = out.pass && rel < 0.15;
    out.detail += fmt("rho=%.1f: %.0f vs %.0f (%.1f%%); ", rho, got, want, 100 * rel);
  }
  return out;
}

// Mean ess_per_sec of `parameter` per setting id.
std::map<std::string, double> mean_ess_per_sec(const ExperimentResult& r, const std::string& parameter) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& row : r.rows)
    if (row.parameter == parameter && row.error.empty() && std::isfinite(row.ess_per_sec)) {
      acc[row.setting].first += row.ess_per_sec;
      ++acc[row.setting].second;
    }
  std::map<std::string, double> out;
  for (const auto& [k, v] : acc) out[k] = v.first / v.second;
  return out;
}

ExperimentResult run_config(const std::string& name, const std::function<bool(const SamplerSetting&)>& keep) {
  ExperimentConfig cfg = load_config(fs::path(MJP_CONFIG_DIR) / (name + ".json"));
  std::erase_if(cfg.settings, [&](const SamplerSetting& s) { return !keep(s); });
  cfg.threads = 1;
  return run_experiment(cfg);
}

// 8. Interval-length ordering.
Outcome interval_scaling() {
  std::map<double, std::pair<double, double>> by_t;
  for (int t : {10, 100}) {
    const auto r = run_config("interval_t" + std::to_string(t) + "_fixed", [](const SamplerSetting& s) {
      return s.kernel.kind != KernelKind::naive_mh;
    });
    double gibbs = 0.0, sym = 0.0;
    for (const auto& [id, v] : mean_ess_per_sec(r, "alpha")) {
      if (id.rfind("gibbs single(2)", 0) == 0) gibbs = v;
      if (id.rfind("symmetrized_mh additive(1)", 0) == 0) sym = v;
    }
    by_t[t] = {gibbs, sym};
  }
  const auto [g10, s10] = by_t[10];
  const auto [g100, s100] = by_t[100];
  const double ratio10 = g10 / s10, ratio100 = g100 / s100;
  return {s100 > g100 && ratio100 < ratio10,
          fmt("t=10: gibbs %.1f, symmetrized %.1f; t=100: gibbs %.1f, symmetrized %.1f ESS/s; "
              "gibbs/symmetrized %.3f -> %.3f",
              g10, s10, g100, s100, ratio10, ratio100)};
}

// 9. JC69 comparison at proposal variance 1.
Outcome jc69_comparison() {
  const auto r = run_config("jc69", [](const SamplerSetting& s) {
    return s.kernel.kind == KernelKind::gibbs || (s.kernel.kind != KernelKind::pmmh && s.proposal_scale == 1.0);
  });
  double sym = 0.0, naive = 0.0, gibbs = 0.0;
  std::string best_sym, best_naive, best_gibbs;
  for (const auto& [id, v] : mean_ess_per_sec(r, "alpha")) {
    auto keep_max = [&](const char* prefix, double& slot, std::string& name) {
      if (id.rfind(prefix, 0) == 0 && v > slot) {
        slot = v;
        name = id;
      }
    };
    keep_max("symmetrized_mh", sym, best_sym);
    keep_max("naive_mh", naive, best_naive);
    keep_max("gibbs", gibbs, best_gibbs);
  }
  return {sym > naive && sym > gibbs,
          fmt("best symmetrized %.1f (%s), naive %.1f (%s), gibbs %.1f (%s) ESS/s", sym, best_sym.c_str(), naive,
              best_naive.c_str(), gibbs, best_gibbs.c_str())};
}

// 10. Transition-count traces from an empty and a busy initial path.
Outcome burn_in() {
  const ExperimentConfig cfg = load_config(fs::path(MJP_CONFIG_DIR) / "immigration_dim3.json");
  Rng data_rng = Rng(cfg.seed).split(0);
  const SyntheticDataset d = generate_synthetic(cfg.model, cfg.data.synthetic, data_rng);
  const Target target(cfg.model, d.observations, d.t_end);

  std::vector<double> busy_times;
  std::vector<int> busy_states;
  for (int k = 0; k < 50; ++k) {
    busy_times.push_back(d.t_end * (k + 0.5) / 50.0);
    busy_states.push_back(k % 2 ? 0 : 1);
  }
  const int chains = 20, iters = 200;
  std::vector<double> empty_trace(iters, 0.0), busy_trace(iters, 0.0);
  for (int c = 0; c < chains; ++c) {
    const ChainState empty{d.truth, Trajectory::constant(0, d.t_end), std::nullopt, 0, std::nullopt};
    const ChainState busy{d.truth, Trajectory(0, busy_times, busy_states, d.t_end), std::nullopt, 0, std::nullopt};
    const auto a = transition_count_trace(run_chain(KernelConfig{KernelKind::gibbs}, target, iters, 3000 + c, empty));
    const auto b = transition_count_trace(run_chain(KernelConfig{KernelKind::gibbs}, target, iters, 4000 + c, busy));
    for (int i = 0; i < iters; ++i) {
      empty_trace[i] += static_cast<double>(a[i]) / chains;
      busy_trace[i] += static_cast<double>(b[i]) / chains;
    }
  }
  double m_empty = 0.0, m_busy = 0.0;
  for (int i = iters / 2; i < iters; ++i) {
    m_empty += empty_trace[i] / (iters / 2);
    m_busy += busy_trace[i] / (iters / 2);
  }
  const double rel = std::abs(m_empty - m_busy) / (0.5 * (m_empty + m_busy));
  return {rel < 0.10, fmt("last-half mean |T|: empty start %.2f, 50-transition start %.2f (%.1f%% apart, %d chains each); "
                          "first iteration %.1f vs %.1f",
                          m_empty, m_busy, 100 * rel, chains, empty_trace[0], busy_trace[0])};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "uniformization marginal", 30, uniformization},
      {2, "FFBS vs enumeration", 120, ffbs},
      {3, "conjugate update vs quadrature", 60, conjugacy},
      {4, "joint-distribution test, four kernels", 900, stationarity},
      {5, "cross-sampler posterior agreement", 600, cross_sampler},
      {6, "particle filter unbiasedness", 120, unbiasedness},
      {7, "ESS on AR(1) chains", 60, ess_ar1},
      {8, "interval length vs ESS/sec ordering", 1200, interval_scaling},
      {9, "JC69 sampler ordering", 600, jc69_comparison},
      {10, "burn-in from two initializations", 120, burn_in},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("%s criterion %d: %s | %s | %.1fs of %.0fs%s\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_seconds, in_time ? "" : " (over budget)");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
