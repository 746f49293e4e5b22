#include <catch_amalgamated.hpp>

#include <cmath>

#include "mjp/errors.hpp"
#include "mjp/models.hpp"
#include "oracles.hpp"

using namespace mjp;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Path density of the capacity-n immigration model written out jump by jump.
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

}  // namespace

TEST_CASE("jc69 rate matrix", "[models]") {
  const auto spec = default_spec(Family::jc69, 4);
  const Matrix a = build_rate_matrix(spec, {{1.0}}).entries();
  REQUIRE(a.rows() == 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(a(i, j) == (i == j ? -3.0 : 1.0));
}

TEST_CASE("immigration rate matrix uses state-proportional deaths", "[models]") {
  const auto spec = default_spec(Family::immigration_capacity, 3);
  const Matrix a = build_rate_matrix(spec, {{2.0, 1.0}}).entries();
  Matrix expected(3, 3);
  expected << -2, 2, 0, 1, -3, 2, 0, 2, -2;
  CHECK((a - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("exp_decay rates use 1-based labels", "[models]") {
  const auto spec = default_spec(Family::exp_decay, 3);
  const Matrix a = build_rate_matrix(spec, {{2.0, 3.0}}).entries();
  CHECK_THAT(a(0, 1), WithinRel(2.0 * std::exp(-3.0 / 3.0), 1e-14));
  CHECK_THAT(a(1, 2), WithinRel(2.0 * std::exp(-3.0 / 5.0), 1e-14));
  CHECK_THAT(a(2, 0), WithinRel(2.0 * std::exp(-3.0 / 4.0), 1e-14));
  CHECK_THAT(a.row(1).sum(), WithinAbs(0.0, 1e-14));
}

TEST_CASE("inhomogeneous immigration steps up every period", "[models]") {
  auto spec = default_spec(Family::immigration_inhomogeneous, 3);
  spec.horizon = 20.0;
  const RateMatrix a = build_rate_matrix(spec, {{1.5, 1.0}});
  CHECK(a.time_dependent());
  CHECK(std::vector<double>(a.breakpoints().begin(), a.breakpoints().end()) == std::vector<double>{5, 10, 15});
  CHECK(a.at(2.0)(0, 1) == 0.0);
  CHECK(a.at(2.0)(1, 2) == 0.0);
  CHECK(a.at(5.0)(0, 1) == 1.5);
  CHECK(a.at(12.0)(1, 2) == 3.0);
  CHECK(a.at(19.9)(0, 1) == 4.5);
  CHECK(a.at(12.0)(2, 1) == 2.0);
}

TEST_CASE("mmpp generator and emissions", "[models]") {
  const auto spec = default_spec(Family::mmpp_two_state, 2);
  const ModelParams theta{{0.4, 0.7, 3.0, 9.0}};
  const Matrix a = build_rate_matrix(spec, theta).entries();
  CHECK(a(0, 1) == 0.4);
  CHECK(a(1, 0) == 0.7);
  CHECK(emission_rates(spec, theta) == std::vector<double>{3.0, 9.0});
}

TEST_CASE("arity and dimension errors are configuration errors", "[models]") {
  const auto spec = default_spec(Family::immigration_capacity, 3);
  CHECK_THROWS_AS(build_rate_matrix(spec, {{1.0}}), ConfigError);
  auto jc = default_spec(Family::jc69, 4);
  jc.dim = 3;
  CHECK_THROWS_AS(jc.validate(), ConfigError);
  auto mm = default_spec(Family::mmpp_two_state, 2);
  mm.dim = 3;
  CHECK_THROWS_AS(mm.validate(), ConfigError);
  CHECK_THROWS_AS(parse_family("codon61"), ConfigError);
  CHECK(parse_family("jc69") == Family::jc69);
}

TEST_CASE("generators are valid for prior draws of every family", "[models][property]") {
  Rng rng(1);
  for (auto family : {Family::exp_decay, Family::immigration_capacity, Family::birth_death, Family::jc69,
                      Family::immigration_inhomogeneous, Family::mmpp_two_state}) {
    for (int dim : {2, 3, 5, 10}) {
      auto spec = default_spec(family, dim);
      for (int rep = 0; rep < 50; ++rep) {
        const ModelParams theta = sample_prior(spec, rng);
        const RateMatrix a = build_rate_matrix(spec, theta);
        for (std::size_t k = 0; k < a.segment_count(); ++k) {
          const Matrix& m = a.segment(k);
          CHECK(m.rowwise().sum().cwiseAbs().maxCoeff() < 1e-10);
          for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j)
              if (i != j) CHECK(m(i, j) >= 0.0);
        }
      }
    }
  }
}

TEST_CASE("omega policies", "[models]") {
  auto jc = default_spec(Family::jc69, 4);
  jc.omega = OmegaPolicy::single(2.0);
  CHECK(omega_single(jc, {{1.0}}) == 6.0);

  auto imm = default_spec(Family::immigration_capacity, 3);
  const ModelParams theta{{1.3, 0.4}};
  imm.omega = OmegaPolicy::single(2.0);
  const double single2 = omega_single(imm, theta);
  imm.omega = OmegaPolicy::additive(1.0);
  CHECK(omega_pair(imm, theta, theta) == single2);

  CHECK(omega_pair(OmegaPolicy::max_of_max(1.5), 4.0, 6.0) == 9.0);
  CHECK_THROWS_AS(OmegaPolicy::single(1.0).validate(), ConfigError);
  CHECK_NOTHROW(OmegaPolicy::additive(1.0).validate());
  CHECK_THROWS_AS(OmegaPolicy::additive(0.9).validate(), ConfigError);
  CHECK_THROWS_AS(OmegaPolicy::max_of_max(1.0).validate(), ConfigError);
}

TEST_CASE("omega_pair is symmetric and dominates both parameters", "[models][property]") {
  Rng rng(2);
  auto spec = default_spec(Family::exp_decay, 5);
  for (const auto& policy : {OmegaPolicy::additive(1.0), OmegaPolicy::additive(1.5), OmegaPolicy::max_of_max(1.5)}) {
    spec.omega = policy;
    for (int rep = 0; rep < 200; ++rep) {
      const auto a = sample_prior(spec, rng), b = sample_prior(spec, rng);
      const double ab = omega_pair(spec, a, b);
      CHECK(ab == omega_pair(spec, b, a));
      CHECK(ab > max_exit_rate(spec, a));
      CHECK(ab > max_exit_rate(spec, b));
    }
  }
}

TEST_CASE("gamma log prior", "[models]") {
  const auto spec = default_spec(Family::jc69, 4);
  CHECK_THAT(log_prior(spec, {{1.0}}), WithinAbs(std::log(4.0) - 2.0, 1e-14));
  CHECK(log_prior(spec, {{0.0}}) == -std::numeric_limits<double>::infinity());
  CHECK(log_prior(spec, {{-1.0}}) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("prior sampling has the gamma mean", "[models]") {
  Rng rng(3);
  const auto spec = default_spec(Family::immigration_capacity, 3);
  std::vector<double> alpha;
  for (int i = 0; i < 100000; ++i) alpha.push_back(sample_prior(spec, rng)[0]);
  CHECK(std::abs(oracle::mean(alpha) - 1.5) < 3 * std::sqrt(0.75 / alpha.size()));
}

TEST_CASE("lognormal proposal ratio", "[models]") {
  const auto k = ProposalKernel::lognormal(0.7, 1);
  CHECK(log_proposal_ratio(k, {{2.0}}, {{2.0}}) == 0.0);
  CHECK_THAT(log_proposal_ratio(k, {{1.0}}, {{std::exp(1.0)}}), WithinAbs(1.0, 1e-15));
  const auto g = ProposalKernel::gaussian(Matrix::Identity(2, 2), 1.0);
  CHECK(log_proposal_ratio(g, {{1.0, 2.0}}, {{0.5, 3.0}}) == 0.0);
}

TEST_CASE("proposal ratio matches the densities", "[models][property]") {
  Rng rng(4);
  Matrix cov(2, 2);
  cov << 0.5, 0.2, 0.2, 0.3;
  for (const auto& k : {ProposalKernel::lognormal({0.3, 2.0}), ProposalKernel::gaussian(cov, 0.7)}) {
    for (int rep = 0; rep < 200; ++rep) {
      const ModelParams theta{{0.5 + 3 * rng.uniform(), 0.5 + 3 * rng.uniform()}};
      const ModelParams next = propose(k, theta, rng);
      if (!all_positive(next)) continue;
      const double direct = log_proposal_density(k, next, theta) - log_proposal_density(k, theta, next);
      CHECK_THAT(std::exp(log_proposal_ratio(k, theta, next) - direct), WithinAbs(1.0, 1e-12));
    }
  }
}

TEST_CASE("gaussian proposal has the requested covariance", "[models]") {
  Rng rng(5);
  Matrix cov(2, 2);
  cov << 1.0, 0.6, 0.6, 2.0;
  const auto k = ProposalKernel::gaussian(cov, 0.5);
  const ModelParams theta{{10.0, 10.0}};
  const int n = 100000;
  double s00 = 0, s01 = 0, s11 = 0;
  for (int i = 0; i < n; ++i) {
    const auto p = propose(k, theta, rng);
    const double d0 = p[0] - 10, d1 = p[1] - 10;
    s00 += d0 * d0;
    s01 += d0 * d1;
    s11 += d1 * d1;
  }
  CHECK_THAT(s00 / n, WithinAbs(0.5, 0.02));
  CHECK_THAT(s01 / n, WithinAbs(0.3, 0.02));
  CHECK_THAT(s11 / n, WithinAbs(1.0, 0.03));
}

TEST_CASE("gaussian proposal rejects a non positive definite covariance", "[models]") {
  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(ProposalKernel::gaussian(bad, 1.0), ConfigError);
  Matrix asym(2, 2);
  asym << 1.0, 0.1, 0.0, 1.0;
  CHECK_THROWS_AS(ProposalKernel::gaussian(asym, 1.0), ConfigError);
  CHECK_THROWS_AS(ProposalKernel::lognormal(0.0, 2).validate(2), ConfigError);
}

TEST_CASE("immigration conjugate update: substitution", "[models]") {
  const GammaPrior a0{3, 2}, b0{5, 2};
  {
    const auto stats = path_statistics(Trajectory::constant(0, 10.0), 3);
    const auto [a, b] = conjugate_update_immigration(a0, b0, stats, 10.0);
    CHECK(a == GammaPrior{3, 12});
    CHECK(b == GammaPrior{5, 2});
  }
  {
    PathStatistics stats;
    stats.dwell_times = {5, 4, 1};
    stats.up_count = 2;
    stats.down_count = 1;
    stats.weighted_dwell = 4;
    const auto [a, b] = conjugate_update_immigration(a0, b0, stats, 10.0);
    CHECK(a == GammaPrior{5, 11});
    CHECK(b == GammaPrior{6, 6});
  }
}

TEST_CASE("immigration conjugate update matches grid quadrature", "[models][property]") {
  Rng rng(6);
  const GammaPrior a0{3, 2}, b0{5, 2};
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 3 + rep % 3;
    auto spec = default_spec(Family::immigration_capacity, n);
    const double alpha = rng.gamma(3, 2), beta = rng.gamma(5, 2);
    const std::vector<double> pi0(static_cast<std::size_t>(n), 1.0 / n);
    const auto path = gillespie_simulate(build_rate_matrix(spec, {{alpha, beta}}), pi0, 10.0, rng);
    const auto [pa, pb] = conjugate_update_immigration(a0, b0, path_statistics(path, n), 10.0);

    const auto ma = oracle::grid_moments(
        [&](double x) { return a0.log_density(x) + immigration_path_log_density(path, n, x, beta); },
        pa.mean() + 12 * std::sqrt(pa.variance()), 2000);
    const auto mb = oracle::grid_moments(
        [&](double x) { return b0.log_density(x) + immigration_path_log_density(path, n, alpha, x); },
        pb.mean() + 12 * std::sqrt(pb.variance()), 2000);
    CHECK_THAT(pa.mean(), WithinRel(ma.mean, 1e-3));
    CHECK_THAT(pa.variance(), WithinRel(ma.variance, 1e-3));
    CHECK_THAT(pb.mean(), WithinRel(mb.mean, 1e-3));
    CHECK_THAT(pb.variance(), WithinRel(mb.variance, 1e-3));
  }
}

TEST_CASE("jc69 conjugate update matches grid quadrature", "[models]") {
  Rng rng(7);
  auto spec = default_spec(Family::jc69, 4);
  const std::vector<double> pi0(4, 0.25);
  for (int rep = 0; rep < 10; ++rep) {
    const auto path = gillespie_simulate(build_rate_matrix(spec, {{0.3 + rng.uniform()}}), pi0, 5.0, rng);
    const auto post = conjugate_update_jc69(spec.priors[0], path.num_jumps(), 5.0);
    const auto m = oracle::grid_moments(
        [&](double x) {
          double ll = spec.priors[0].log_density(x);
          // Every jump has rate x, every state exits at 3x.
          ll += static_cast<double>(path.num_jumps()) * std::log(x) - 3.0 * x * 5.0;
          return ll;
        },
        post.mean() + 12 * std::sqrt(post.variance()), 2000);
    CHECK_THAT(post.mean(), WithinRel(m.mean, 1e-3));
    CHECK_THAT(post.variance(), WithinRel(m.variance, 1e-3));
  }
}

TEST_CASE("mmpp conjugate update matches grid quadrature", "[models]") {
  const auto spec = default_spec(Family::mmpp_two_state, 2);
  const Trajectory path(0, {2.0, 5.0, 7.5}, {1, 0, 1}, 10.0);
  const std::vector<int> events{4, 13};
  const auto post = conjugate_update_mmpp(spec.priors, path_statistics(path, 2), events);
  // Dwell: state 0 for 2 + 2.5, state 1 for 3 + 2.5. Jumps 0->1 twice, 1->0 once.
  const double tau0 = 4.5, tau1 = 5.5;
  const std::vector<std::function<double(double)>> loglik{
      [&](double x) { return 2 * std::log(x) - x * tau0; },
      [&](double x) { return 1 * std::log(x) - x * tau1; },
      [&](double x) { return 4 * std::log(x) - x * tau0; },
      [&](double x) { return 13 * std::log(x) - x * tau1; },
  };
  for (std::size_t j = 0; j < 4; ++j) {
    const auto m = oracle::grid_moments(
        [&](double x) { return spec.priors[j].log_density(x) + loglik[j](x); },
        post[j].mean() + 12 * std::sqrt(post[j].variance()), 2000);
    CHECK_THAT(post[j].mean(), WithinRel(m.mean, 1e-3));
    CHECK_THAT(post[j].variance(), WithinRel(m.variance, 1e-3));
  }
}
