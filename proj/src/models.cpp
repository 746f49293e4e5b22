#include "mjp/models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mjp/errors.hpp"

namespace mjp {

namespace {

constexpr std::array<std::pair<Family, std::string_view>, 6> kFamilyNames{{
    {Family::exp_decay, "exp_decay"},
    {Family::immigration_capacity, "immigration_capacity"},
    {Family::birth_death, "birth_death"},
    {Family::jc69, "jc69"},
    {Family::immigration_inhomogeneous, "immigration_inhomogeneous"},
    {Family::mmpp_two_state, "mmpp_two_state"},
}};

void fill_diagonal(Matrix& a) {
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    a(i, i) = 0.0;
    a(i, i) = -a.row(i).sum();
  }
}

Matrix immigration_entries(int n, double arrival, double beta) {
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (i + 1 < n) a(i, i + 1) = arrival;
    if (i > 0) a(i, i - 1) = i * beta;
  }
  fill_diagonal(a);
  return a;
}

void check_arity(const ModelSpec& spec, const ModelParams& theta) {
  if (theta.size() != spec.num_parameters()) {
    std::ostringstream msg;
    msg << family_name(spec.family) << " takes " << spec.num_parameters() << " parameters, got "
        << theta.size();
    throw ConfigError(msg.str());
  }
}

}  // namespace

std::string_view family_name(Family family) {
  for (const auto& [f, name] : kFamilyNames)
    if (f == family) return name;
  return "unknown";
}

Family parse_family(std::string_view name) {
  for (const auto& [f, n] : kFamilyNames)
    if (n == name) return f;
  throw ConfigError("unknown model family '" + std::string(name) + "'");
}

double GammaPrior::log_density(double x) const {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

void OmegaPolicy::validate() const {
  const bool ok = kind == Kind::additive ? kappa >= 1.0 : kappa > 1.0;
  if (!ok || !std::isfinite(kappa))
    throw ConfigError("uniformization policy " + label() + " does not strictly dominate the exit rates");
}

std::string OmegaPolicy::label() const {
  std::ostringstream out;
  switch (kind) {
    case Kind::single: out << "single"; break;
    case Kind::additive: out << "additive"; break;
    case Kind::max_of_max: out << "max_of_max"; break;
  }
  out << "(" << kappa << ")";
  return out.str();
}

ProposalKernel ProposalKernel::lognormal(std::vector<double> variances) {
  ProposalKernel k;
  k.kind = Kind::lognormal_rw;
  k.variances = std::move(variances);
  return k;
}

ProposalKernel ProposalKernel::lognormal(double variance, std::size_t dim) {
  return lognormal(std::vector<double>(dim, variance));
}

ProposalKernel ProposalKernel::gaussian(Matrix covariance, double scale) {
  ProposalKernel k;
  k.kind = Kind::gaussian_rw;
  if (covariance.rows() != covariance.cols() || covariance.rows() == 0)
    throw ConfigError("proposal covariance must be square");
  if (!covariance.isApprox(covariance.transpose(), 1e-10))
    throw ConfigError("proposal covariance must be symmetric");
  if (!(scale > 0.0)) throw ConfigError("proposal scale must be positive");
  Eigen::LLT<Matrix> llt(scale * covariance);
  if (llt.info() != Eigen::Success) throw ConfigError("proposal covariance is not positive definite");
  k.covariance = std::move(covariance);
  k.scale = scale;
  k.cholesky = llt.matrixL();
  return k;
}

void ProposalKernel::validate(std::size_t dim) const {
  if (kind == Kind::lognormal_rw) {
    if (variances.size() != dim) throw ConfigError("lognormal proposal needs one variance per parameter");
    for (double v : variances)
      if (!(v > 0.0)) throw ConfigError("proposal variances must be positive");
  } else {
    if (static_cast<std::size_t>(covariance.rows()) != dim || cholesky.rows() != covariance.rows())
      throw ConfigError("gaussian proposal covariance has the wrong dimension");
  }
}

std::size_t ModelSpec::num_parameters() const {
  switch (family) {
    case Family::jc69: return 1;
    case Family::mmpp_two_state: return 4;
    default: return 2;
  }
}

std::vector<std::string> ModelSpec::parameter_names() const {
  switch (family) {
    case Family::jc69: return {"alpha"};
    case Family::mmpp_two_state: return {"alpha", "beta", "lambda1", "lambda2"};
    default: return {"alpha", "beta"};
  }
}

std::vector<double> ModelSpec::initial_distribution() const {
  if (!pi0.empty()) return pi0;
  return std::vector<double>(static_cast<std::size_t>(dim), 1.0 / dim);
}

void ModelSpec::validate() const {
  if (family == Family::jc69 && dim != 4) throw ConfigError("jc69 has exactly 4 states");
  if (family == Family::mmpp_two_state && dim != 2) throw ConfigError("mmpp_two_state has exactly 2 states");
  if (dim < 1) throw ConfigError("model dimension must be positive");
  if (priors.size() != num_parameters())
    throw ConfigError("need one Gamma prior per parameter of " + std::string(family_name(family)));
  for (const auto& p : priors)
    if (!(p.shape > 0.0) || !(p.rate > 0.0)) throw ConfigError("Gamma prior parameters must be positive");
  if (!pi0.empty()) validate_distribution(pi0, dim);
  if (!(horizon > 0.0)) throw ConfigError("model horizon must be positive");
  if (!(inhomogeneity_period > 0.0)) throw ConfigError("inhomogeneity period must be positive");
  omega.validate();
  proposal.validate(num_parameters());
}

ModelSpec default_spec(Family family, int dim) {
  ModelSpec spec;
  spec.family = family;
  spec.dim = dim;
  switch (family) {
    case Family::jc69:
      spec.dim = 4;
      spec.priors = {{3.0, 2.0}};
      break;
    case Family::mmpp_two_state:
      spec.dim = 2;
      spec.priors = {{2.0, 2.0}, {2.0, 3.0}, {3.0, 2.0}, {1.0, 2.0}};
      break;
    default:
      spec.priors = {{3.0, 2.0}, {5.0, 2.0}};
      break;
  }
  spec.proposal = ProposalKernel::lognormal(1.0, spec.num_parameters());
  spec.omega = OmegaPolicy::single(2.0);
  return spec;
}

RateMatrix build_rate_matrix(const ModelSpec& spec, const ModelParams& theta) {
  check_arity(spec, theta);
  const int n = spec.dim;
  const double alpha = theta[0];
  switch (spec.family) {
    case Family::exp_decay: {
      const double beta = theta[1];
      Matrix a(n, n);
      // States are labelled 1..N inside the rate formula.
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          a(i, j) = i == j ? 0.0 : alpha * std::exp(-beta / static_cast<double>(i + j + 2));
      fill_diagonal(a);
      return RateMatrix(std::move(a));
    }
    case Family::immigration_capacity:
      return RateMatrix(immigration_entries(n, alpha, theta[1]));
    case Family::birth_death: {
      Matrix a = Matrix::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        if (i + 1 < n) a(i, i + 1) = i * alpha;
        if (i > 0) a(i, i - 1) = i * theta[1];
      }
      fill_diagonal(a);
      return RateMatrix(std::move(a));
    }
    case Family::jc69: {
      Matrix a = Matrix::Constant(4, 4, alpha);
      a.diagonal().setConstant(-3.0 * alpha);
      return RateMatrix(std::move(a));
    }
    case Family::immigration_inhomogeneous: {
      // Arrival rate alpha * floor(t / period), one segment per period.
      std::vector<double> breakpoints;
      std::vector<Matrix> segments;
      segments.push_back(immigration_entries(n, 0.0, theta[1]));
      for (int k = 1; k * spec.inhomogeneity_period < spec.horizon; ++k) {
        breakpoints.push_back(k * spec.inhomogeneity_period);
        segments.push_back(immigration_entries(n, alpha * k, theta[1]));
      }
      return RateMatrix(std::move(breakpoints), std::move(segments));
    }
    case Family::mmpp_two_state: {
      Matrix a(2, 2);
      a << -alpha, alpha, theta[1], -theta[1];
      return RateMatrix(std::move(a));
    }
  }
  throw ConfigError("unknown model family");
}

std::vector<double> emission_rates(const ModelSpec& spec, const ModelParams& theta) {
  if (spec.family != Family::mmpp_two_state) return {};
  check_arity(spec, theta);
  return {theta[2], theta[3]};
}

double max_exit_rate(const ModelSpec& spec, const ModelParams& theta) {
  return build_rate_matrix(spec, theta).max_exit_rate(spec.horizon);
}

double omega_pair(const OmegaPolicy& policy, double max_current, double max_proposed) {
  double omega = 0.0;
  switch (policy.kind) {
    case OmegaPolicy::Kind::single:
    case OmegaPolicy::Kind::additive:
      omega = policy.kappa * (max_current + max_proposed);
      break;
    case OmegaPolicy::Kind::max_of_max:
      omega = policy.kappa * std::max(max_current, max_proposed);
      break;
  }
  // Equality only arises from rounding (a maximum far below the other) and is
  // left to the thinning step, which warns.
  if (!(omega > 0.0) || omega < max_current || omega < max_proposed) {
    std::ostringstream msg;
    msg << "uniformization policy " << policy.label() << " gives rate " << omega
        << " below the exit rates " << max_current << " and " << max_proposed;
    throw PreconditionError(msg.str());
  }
  return omega;
}

double omega_single(const ModelSpec& spec, const ModelParams& theta) {
  const double m = max_exit_rate(spec, theta);
  if (spec.omega.kind == OmegaPolicy::Kind::single) {
    const double omega = spec.omega.kappa * m;
    if (!(omega > m)) {
      std::ostringstream msg;
      msg << "uniformization policy " << spec.omega.label() << " gives rate " << omega
          << " which does not exceed the exit rate " << m;
      throw PreconditionError(msg.str());
    }
    return omega;
  }
  return omega_pair(spec.omega, m, m);
}

double omega_pair(const ModelSpec& spec, const ModelParams& theta, const ModelParams& proposed) {
  return omega_pair(spec.omega, max_exit_rate(spec, theta), max_exit_rate(spec, proposed));
}

double log_prior(const ModelSpec& spec, const ModelParams& theta) {
  check_arity(spec, theta);
  double lp = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) lp += spec.priors[i].log_density(theta[i]);
  return lp;
}

ModelParams sample_prior(const ModelSpec& spec, Rng& rng) {
  ModelParams theta;
  theta.values.reserve(spec.priors.size());
  for (const auto& p : spec.priors) theta.values.push_back(rng.gamma(p.shape, p.rate));
  return theta;
}

bool all_positive(const ModelParams& theta) {
  return std::all_of(theta.values.begin(), theta.values.end(), [](double v) { return v > 0.0; });
}

ModelParams propose(const ProposalKernel& kernel, const ModelParams& theta, Rng& rng) {
  ModelParams out = theta;
  if (kernel.kind == ProposalKernel::Kind::lognormal_rw) {
    for (std::size_t i = 0; i < out.size(); ++i)
      out.values[i] = theta[i] * std::exp(std::sqrt(kernel.variances[i]) * rng.normal());
  } else {
    Vector z(static_cast<Eigen::Index>(theta.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    const Vector step = kernel.cholesky * z;
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += step(static_cast<Eigen::Index>(i));
  }
  return out;
}

double log_proposal_ratio(const ProposalKernel& kernel, const ModelParams& theta,
                          const ModelParams& proposed) {
  if (kernel.kind == ProposalKernel::Kind::gaussian_rw) return 0.0;
  double r = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) r += std::log(proposed[i] / theta[i]);
  return r;
}

double log_proposal_density(const ProposalKernel& kernel, const ModelParams& from,
                            const ModelParams& to) {
  constexpr double log_2pi = 1.8378770664093453;
  double lq = 0.0;
  if (kernel.kind == ProposalKernel::Kind::lognormal_rw) {
    for (std::size_t i = 0; i < from.size(); ++i) {
      if (!(to[i] > 0.0)) return -std::numeric_limits<double>::infinity();
      const double v = kernel.variances[i];
      const double d = std::log(to[i]) - std::log(from[i]);
      lq += -std::log(to[i]) - 0.5 * (log_2pi + std::log(v)) - d * d / (2.0 * v);
    }
    return lq;
  }
  Vector d(static_cast<Eigen::Index>(from.size()));
  for (std::size_t i = 0; i < from.size(); ++i) d(static_cast<Eigen::Index>(i)) = to[i] - from[i];
  const Vector z = kernel.cholesky.triangularView<Eigen::Lower>().solve(d);
  const double log_det = 2.0 * kernel.cholesky.diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(d.size()) * log_2pi + log_det + z.squaredNorm());
}

std::pair<GammaPrior, GammaPrior> conjugate_update_immigration(const GammaPrior& alpha_prior,
                                                               const GammaPrior& beta_prior,
                                                               const PathStatistics& stats,
                                                               double t_end) {
  const double top_dwell = stats.dwell_times.back();
  GammaPrior alpha_post{alpha_prior.shape + stats.up_count, alpha_prior.rate + t_end - top_dwell};
  GammaPrior beta_post{beta_prior.shape + stats.down_count, beta_prior.rate + stats.weighted_dwell};
  return {alpha_post, beta_post};
}

GammaPrior conjugate_update_jc69(const GammaPrior& prior, std::size_t num_jumps, double t_end) {
  return {prior.shape + static_cast<double>(num_jumps), prior.rate + 3.0 * t_end};
}

std::vector<GammaPrior> conjugate_update_mmpp(std::span<const GammaPrior> priors,
                                              const PathStatistics& stats,
                                              std::span<const int> events_per_state) {
  const double tau0 = stats.dwell_times[0];
  const double tau1 = stats.dwell_times[1];
  return {
      {priors[0].shape + stats.transitions[0][1], priors[0].rate + tau0},
      {priors[1].shape + stats.transitions[1][0], priors[1].rate + tau1},
      {priors[2].shape + events_per_state[0], priors[2].rate + tau0},
      {priors[3].shape + events_per_state[1], priors[3].rate + tau1},
  };
}

bool has_conjugate_update(Family family) {
  return family == Family::immigration_capacity || family == Family::jc69 ||
         family == Family::mmpp_two_state;
}

}  // namespace mjp
