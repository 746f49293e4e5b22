#include "mjp/gridhmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

#include "mjp/errors.hpp"

namespace mjp {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double gaussian_log_density(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(variance)) - d * d / (2.0 * variance);
}

double poisson_interval_term(std::size_t count, double rate, double length) {
  if (count == 0) return -rate * length;
  if (!(rate > 0.0)) return kNegInf;
  return static_cast<double>(count) * std::log(rate) - rate * length;
}

}  // namespace

ObservationSet ObservationSet::gaussian(std::vector<GaussianObservation> points) {
  for (const auto& p : points)
    if (!(p.variance > 0.0)) throw PreconditionError("observation noise variance must be positive");
  std::stable_sort(points.begin(), points.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  ObservationSet obs;
  obs.kind_ = Kind::gaussian_points;
  obs.points_ = std::move(points);
  return obs;
}

ObservationSet ObservationSet::poisson(std::vector<double> events, std::vector<double> rates) {
  for (double r : rates)
    if (!(r > 0.0)) throw PreconditionError("emission rates must be positive");
  std::sort(events.begin(), events.end());
  ObservationSet obs;
  obs.kind_ = Kind::poisson_events;
  obs.events_ = std::move(events);
  obs.rates_ = std::move(rates);
  return obs;
}

ObservationSet ObservationSet::with_rates(std::vector<double> rates) const {
  ObservationSet copy = *this;
  copy.rates_ = std::move(rates);
  return copy;
}

void ObservationSet::validate(double t_end) const {
  auto in_window = [t_end](double t) { return t >= 0.0 && t <= t_end; };
  for (const auto& p : points_)
    if (!in_window(p.time)) throw PreconditionError("observation time outside [0, t_end]");
  for (double t : events_)
    if (!in_window(t)) throw PreconditionError("event time outside [0, t_end]");
}

double interval_log_likelihood(const ObservationSet& obs, int state, double a, double b,
                               std::span<const double> rates) {
  if (!(a < b)) throw PreconditionError("interval must have a < b");
  if (obs.kind() == ObservationSet::Kind::gaussian_points) {
    double ll = 0.0;
    for (const auto& p : obs.points())
      if (p.time >= a && p.time < b) ll += gaussian_log_density(p.value, state, p.variance);
    return ll;
  }
  const auto r = rates.empty() ? obs.rates() : rates;
  const auto ev = obs.events();
  const auto count = static_cast<std::size_t>(std::lower_bound(ev.begin(), ev.end(), b) -
                                              std::lower_bound(ev.begin(), ev.end(), a));
  return poisson_interval_term(count, r[static_cast<std::size_t>(state)], b - a);
}

Matrix grid_log_likelihoods(const ObservationSet& obs, std::span<const double> grid, double t_end,
                            int num_states, std::span<const double> rates) {
  const auto intervals = static_cast<Eigen::Index>(grid.size() + 1);
  Matrix ll = Matrix::Zero(intervals, num_states);
  auto interval_of = [&](double t) {
    return static_cast<Eigen::Index>(std::upper_bound(grid.begin(), grid.end(), t) - grid.begin());
  };
  if (obs.kind() == ObservationSet::Kind::gaussian_points) {
    for (const auto& p : obs.points()) {
      const Eigen::Index row = interval_of(p.time);
      for (int s = 0; s < num_states; ++s) ll(row, s) += gaussian_log_density(p.value, s, p.variance);
    }
    return ll;
  }
  const auto r = rates.empty() ? obs.rates() : rates;
  if (static_cast<int>(r.size()) != num_states)
    throw PreconditionError("need one emission rate per state");
  std::vector<std::size_t> counts(static_cast<std::size_t>(intervals), 0);
  for (double t : obs.events()) ++counts[static_cast<std::size_t>(interval_of(t))];
  for (Eigen::Index i = 0; i < intervals; ++i) {
    const double a = i == 0 ? 0.0 : grid[static_cast<std::size_t>(i - 1)];
    const double b = i + 1 == intervals ? t_end : grid[static_cast<std::size_t>(i)];
    for (int s = 0; s < num_states; ++s)
      ll(i, s) = poisson_interval_term(counts[static_cast<std::size_t>(i)],
                                       r[static_cast<std::size_t>(s)], b - a);
  }
  return ll;
}

StepMatrices StepMatrices::constant(Matrix b, std::size_t steps) {
  StepMatrices m;
  m.distinct_.push_back(std::move(b));
  m.steps_ = steps;
  return m;
}

StepMatrices StepMatrices::build(const RateMatrix& rates, double omega,
                                 std::span<const double> grid) {
  if (!rates.time_dependent()) return constant(transition_matrix(rates, omega), grid.size());
  StepMatrices m;
  m.steps_ = grid.size();
  m.distinct_.reserve(rates.segment_count());
  for (std::size_t k = 0; k < rates.segment_count(); ++k) {
    const double t = k == 0 ? -std::numeric_limits<double>::infinity() : rates.breakpoints()[k - 1];
    m.distinct_.push_back(transition_matrix(rates, omega, t));
  }
  m.index_.reserve(grid.size());
  for (double w : grid) m.index_.push_back(rates.segment_index(w));
  return m;
}

StepMatrices StepMatrices::from_list(std::vector<Matrix> matrices) {
  StepMatrices m;
  m.steps_ = matrices.size();
  m.distinct_ = std::move(matrices);
  m.index_.resize(m.steps_);
  for (std::size_t i = 0; i < m.steps_; ++i) m.index_[i] = i;
  if (m.distinct_.empty()) m.distinct_.push_back(Matrix());
  return m;
}

FilterMessages forward_pass(const Matrix& log_likelihoods, const StepMatrices& steps,
                            std::span<const double> pi0) {
  const Eigen::Index intervals = log_likelihoods.rows();
  const Eigen::Index n = log_likelihoods.cols();
  if (static_cast<std::size_t>(intervals) != steps.size() + 1)
    throw PreconditionError("forward pass needs one step matrix per grid time");
  if (static_cast<Eigen::Index>(pi0.size()) != n)
    throw PreconditionError("initial distribution has the wrong dimension");

  FilterMessages out;
  out.filtered.resize(intervals, n);
  out.log_normalizers.resize(static_cast<std::size_t>(intervals));
  Eigen::RowVectorXd weights(n);
  for (Eigen::Index i = 0; i < intervals; ++i) {
    if (i == 0) {
      for (Eigen::Index s = 0; s < n; ++s) weights(s) = pi0[static_cast<std::size_t>(s)];
    } else {
      weights.noalias() = out.filtered.row(i - 1) * steps[static_cast<std::size_t>(i - 1)];
    }
    const auto row = log_likelihoods.row(i);
    const double top = row.maxCoeff();
    if (top != row.minCoeff()) {
      if (top == kNegInf) {
        weights.setZero();
      } else {
        for (Eigen::Index s = 0; s < n; ++s) weights(s) *= std::exp(row(s) - top);
      }
    }
    const double total = weights.sum();
    if (!(total > 0.0) || top == kNegInf) {
      out.impossible = true;
      out.log_marginal = kNegInf;
      out.filtered.bottomRows(intervals - i).setZero();
      std::fill(out.log_normalizers.begin() + i, out.log_normalizers.end(), kNegInf);
      return out;
    }
    out.filtered.row(i) = weights / total;
    out.log_normalizers[static_cast<std::size_t>(i)] = std::log(total) + top;
    out.log_marginal += out.log_normalizers[static_cast<std::size_t>(i)];
  }
  return out;
}

FilterMessages forward_pass(std::span<const double> grid, const StepMatrices& steps,
                            std::span<const double> pi0, const ObservationSet& obs, double t_end) {
  return forward_pass(grid_log_likelihoods(obs, grid, t_end, static_cast<int>(pi0.size())), steps,
                      pi0);
}

std::vector<int> backward_sample(const FilterMessages& messages, const StepMatrices& steps,
                                 Rng& rng) {
  if (messages.impossible) throw PreconditionError("cannot backward-sample an impossible forward pass");
  const Eigen::Index intervals = messages.filtered.rows();
  const Eigen::Index n = messages.filtered.cols();
  std::vector<int> states(static_cast<std::size_t>(intervals));
  std::vector<double> weights(static_cast<std::size_t>(n));
  auto draw_row = [&](Eigen::Index i) {
    for (Eigen::Index s = 0; s < n; ++s) weights[static_cast<std::size_t>(s)] = messages.filtered(i, s);
  };
  draw_row(intervals - 1);
  states.back() = static_cast<int>(rng.categorical(weights));
  for (Eigen::Index i = intervals - 1; i-- > 0;) {
    const Matrix& b = steps[static_cast<std::size_t>(i)];
    const int next = states[static_cast<std::size_t>(i + 1)];
    for (Eigen::Index s = 0; s < n; ++s)
      weights[static_cast<std::size_t>(s)] = messages.filtered(i, s) * b(s, next);
    states[static_cast<std::size_t>(i)] = static_cast<int>(rng.categorical(weights));
  }
  return states;
}

double exact_marginal_likelihood(const RateMatrix& rates, std::span<const double> pi0,
                                 const ObservationSet& obs, double t_end) {
  if (rates.time_dependent())
    throw UnsupportedInput("exact marginal likelihood needs a homogeneous generator");
  const Matrix& a = rates.entries();
  const Eigen::Index n = a.rows();
  Eigen::RowVectorXd alpha(n);
  for (Eigen::Index s = 0; s < n; ++s) alpha(s) = pi0[static_cast<std::size_t>(s)];
  double log_marginal = 0.0;
  double t_prev = 0.0;
  auto renormalize = [&]() {
    const double total = alpha.sum();
    if (!(total > 0.0)) return false;
    log_marginal += std::log(total);
    alpha /= total;
    return true;
  };

  if (obs.kind() == ObservationSet::Kind::gaussian_points) {
    for (const auto& p : obs.points()) {
      if (p.time > t_prev) alpha = alpha * (a * (p.time - t_prev)).exp();
      t_prev = p.time;
      // Scale by the largest log density to keep the update finite.
      Eigen::VectorXd ll(n);
      for (Eigen::Index s = 0; s < n; ++s) ll(s) = gaussian_log_density(p.value, static_cast<double>(s), p.variance);
      const double top = ll.maxCoeff();
      for (Eigen::Index s = 0; s < n; ++s) alpha(s) *= std::exp(ll(s) - top);
      log_marginal += top;
      if (!renormalize()) return kNegInf;
    }
    return log_marginal;
  }

  // Between events the chain evolves with A - diag(lambda); each event
  // contributes a factor lambda_s.
  const auto r = obs.rates();
  Matrix decay = a;
  for (Eigen::Index s = 0; s < n; ++s) decay(s, s) -= r[static_cast<std::size_t>(s)];
  for (double t : obs.events()) {
    if (t > t_prev) alpha = alpha * (decay * (t - t_prev)).exp();
    t_prev = t;
    for (Eigen::Index s = 0; s < n; ++s) alpha(s) *= r[static_cast<std::size_t>(s)];
    if (!renormalize()) return kNegInf;
  }
  if (t_end > t_prev) alpha = alpha * (decay * (t_end - t_prev)).exp();
  if (!renormalize()) return kNegInf;
  return log_marginal;
}

}  // namespace mjp
