#include "mjp/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

#include "mjp/errors.hpp"

namespace mjp {

namespace {

void validate_generator(const Matrix& a) {
  if (a.rows() == 0 || a.rows() != a.cols())
    throw PreconditionError("rate matrix must be square and nonempty");
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (!std::isfinite(a(i, j))) throw PreconditionError("rate matrix has a non-finite entry");
      if (i != j && a(i, j) < 0.0) {
        std::ostringstream msg;
        msg << "rate matrix entry (" << i << "," << j << ") is negative";
        throw PreconditionError(msg.str());
      }
      row += a(i, j);
    }
    if (std::abs(row) > kRowSumTolerance) {
      std::ostringstream msg;
      msg << "rate matrix row " << i << " sums to " << row;
      throw PreconditionError(msg.str());
    }
  }
}

void warn_equal_omega_once() {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true))
    std::cerr << "warning: uniformization rate equals the largest exit rate; "
                 "the path sampler is not guaranteed to be ergodic\n";
}

// Raises unless omega dominates every exit rate in force on [0, t_end].
void check_dominating_rate(const RateMatrix& rates, double omega, double t_end) {
  double largest = 0.0;
  for (std::size_t k = 0; k < rates.segment_count(); ++k) {
    if (k > 0 && rates.breakpoints()[k - 1] >= t_end) break;
    const Matrix& seg = rates.segment(k);
    for (int i = 0; i < rates.dim(); ++i) {
      double exit = -seg(i, i);
      if (omega < exit - 1e-12) {
        std::ostringstream msg;
        msg << "uniformization rate " << omega << " is below the exit rate " << exit
            << " of state " << i;
        throw PreconditionError(msg.str());
      }
      largest = std::max(largest, exit);
    }
  }
  if (omega <= largest) warn_equal_omega_once();
}

int sample_initial_state(std::span<const double> pi0, Rng& rng) {
  return static_cast<int>(rng.categorical(pi0));
}

}  // namespace

RateMatrix::RateMatrix(Matrix entries) {
  validate_generator(entries);
  segments_.push_back(std::move(entries));
}

RateMatrix::RateMatrix(std::vector<double> breakpoints, std::vector<Matrix> segments)
    : breakpoints_(std::move(breakpoints)), segments_(std::move(segments)) {
  if (segments_.size() != breakpoints_.size() + 1)
    throw PreconditionError("time-dependent rate matrix needs one more segment than breakpoints");
  if (!std::is_sorted(breakpoints_.begin(), breakpoints_.end()) ||
      std::adjacent_find(breakpoints_.begin(), breakpoints_.end()) != breakpoints_.end())
    throw PreconditionError("breakpoints must be strictly increasing");
  for (const Matrix& seg : segments_) {
    validate_generator(seg);
    if (seg.rows() != segments_.front().rows())
      throw PreconditionError("all segments must share one dimension");
  }
}

RateMatrix RateMatrix::zero(int dim) { return RateMatrix(Matrix::Zero(dim, dim)); }

std::size_t RateMatrix::segment_index(double t) const {
  return static_cast<std::size_t>(
      std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t) - breakpoints_.begin());
}

double RateMatrix::max_exit_rate(double t_end) const {
  double largest = 0.0;
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    if (k > 0 && breakpoints_[k - 1] >= t_end) break;
    largest = std::max(largest, (-segments_[k].diagonal()).maxCoeff());
  }
  return largest;
}

Trajectory::Trajectory(int initial_state, std::vector<double> jump_times,
                       std::vector<int> jump_states, double t_end)
    : initial_state_(initial_state),
      jump_times_(std::move(jump_times)),
      jump_states_(std::move(jump_states)),
      t_end_(t_end) {
  if (!(t_end_ > 0.0)) throw PreconditionError("trajectory end time must be positive");
  if (initial_state_ < 0) throw PreconditionError("negative state index");
  if (jump_times_.size() != jump_states_.size())
    throw PreconditionError("trajectory needs one state per jump time");
  double prev_time = 0.0;
  int prev_state = initial_state_;
  for (std::size_t k = 0; k < jump_times_.size(); ++k) {
    if (!(jump_times_[k] > prev_time) || !(jump_times_[k] < t_end_))
      throw PreconditionError("jump times must increase strictly inside (0, t_end)");
    if (jump_states_[k] < 0) throw PreconditionError("negative state index");
    if (jump_states_[k] == prev_state)
      throw PreconditionError("consecutive trajectory states must differ");
    prev_time = jump_times_[k];
    prev_state = jump_states_[k];
  }
}

int Trajectory::state_at(double t) const {
  auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), t);
  if (it == jump_times_.begin()) return initial_state_;
  return jump_states_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
}

int Trajectory::max_state() const {
  int m = initial_state_;
  for (int s : jump_states_) m = std::max(m, s);
  return m;
}

void validate_distribution(std::span<const double> pi0, int dim) {
  if (static_cast<int>(pi0.size()) != dim)
    throw ConfigError("initial distribution has the wrong dimension");
  double total = 0.0;
  for (double p : pi0) {
    if (!(p >= 0.0)) throw ConfigError("initial distribution has a negative entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-10) throw ConfigError("initial distribution does not sum to 1");
}

Trajectory gillespie_simulate(const RateMatrix& rates, std::span<const double> pi0, double t_end,
                              Rng& rng) {
  if (rates.time_dependent())
    throw UnsupportedInput(
        "Gillespie simulation needs a homogeneous generator; use simulate_uniformized");
  validate_distribution(pi0, rates.dim());
  if (!(t_end > 0.0)) throw PreconditionError("t_end must be positive");
  int s0 = sample_initial_state(pi0, rng);
  std::vector<double> times;
  std::vector<int> states;
  advance_state(rates, s0, 0.0, t_end, rng, &times, &states);
  return Trajectory(s0, std::move(times), std::move(states), t_end);
}

int advance_state(const RateMatrix& rates, int state, double t_from, double t_to, Rng& rng,
                  std::vector<double>* jump_times, std::vector<int>* jump_states) {
  const int n = rates.dim();
  double t = t_from;
  std::size_t seg = rates.segment_index(t);
  const auto bps = rates.breakpoints();
  while (t < t_to) {
    const double seg_end = seg < bps.size() ? std::min(bps[seg], t_to) : t_to;
    const Matrix& a = rates.segment(seg);
    const double exit = -a(state, state);
    double next = exit > 0.0 ? t + rng.exponential(exit) : std::numeric_limits<double>::infinity();
    if (next >= seg_end) {
      t = seg_end;
      ++seg;
      if (seg >= rates.segment_count()) seg = rates.segment_count() - 1;
      if (t >= t_to) break;
      continue;
    }
    double u = rng.uniform() * exit;
    int target = -1;
    for (int j = 0; j < n; ++j) {
      if (j == state) continue;
      u -= a(state, j);
      if (u < 0.0) {
        target = j;
        break;
      }
    }
    if (target < 0) {
      // Rounding left u >= 0: take the last state with a positive rate.
      for (int j = n - 1; j >= 0; --j)
        if (j != state && a(state, j) > 0.0) {
          target = j;
          break;
        }
    }
    t = next;
    state = target;
    if (jump_times) jump_times->push_back(t);
    if (jump_states) jump_states->push_back(state);
  }
  return state;
}

Trajectory simulate_uniformized(const RateMatrix& rates, std::span<const double> pi0,
                                double t_end, double omega, Rng& rng) {
  validate_distribution(pi0, rates.dim());
  if (!(t_end > 0.0)) throw PreconditionError("t_end must be positive");
  check_dominating_rate(rates, omega, t_end);
  Grid grid;
  grid.states.push_back(sample_initial_state(pi0, rng));
  const int n = rates.dim();
  std::vector<double> row(static_cast<std::size_t>(n));
  if (omega > 0.0) {
    for (double t = rng.exponential(omega); t < t_end; t += rng.exponential(omega)) {
      const Matrix& a = rates.at(t);
      const int s = grid.states.back();
      for (int j = 0; j < n; ++j) row[j] = (j == s ? 1.0 : 0.0) + a(s, j) / omega;
      row[s] = std::max(row[s], 0.0);
      grid.times.push_back(t);
      grid.states.push_back(static_cast<int>(rng.categorical(row)));
    }
  }
  return collapse_grid(grid, t_end);
}

Thinning sample_thinned_times(const Trajectory& path, const RateMatrix& rates, double omega,
                              Rng& rng) {
  const double t_end = path.t_end();
  check_dominating_rate(rates, omega, t_end);
  Thinning out;
  out.grid.states.push_back(path.initial_state());
  const auto bps = rates.breakpoints();
  const auto jt = path.jump_times();
  const auto js = path.jump_states();
  out.grid.times.reserve(jt.size() + static_cast<std::size_t>(omega * t_end) + 8);
  out.grid.states.reserve(out.grid.times.capacity() + 1);

  // Walk the pieces delimited by both trajectory jumps and rate breakpoints.
  std::size_t next_jump = 0;
  std::size_t seg = rates.segment_index(0.0);
  int state = path.initial_state();
  double start = 0.0;
  while (start < t_end) {
    double end = t_end;
    if (next_jump < jt.size()) end = std::min(end, jt[next_jump]);
    if (seg < bps.size()) end = std::min(end, bps[seg]);
    const double intensity = std::max(0.0, omega + rates.segment(seg)(state, state));
    if (intensity > 0.0) {
      for (double t = start + rng.exponential(intensity); t < end; t += rng.exponential(intensity)) {
        out.thinned.push_back(t);
        out.grid.times.push_back(t);
        out.grid.states.push_back(state);
      }
    }
    if (next_jump < jt.size() && end == jt[next_jump]) {
      state = js[next_jump];
      out.grid.times.push_back(end);
      out.grid.states.push_back(state);
      ++next_jump;
    }
    if (seg < bps.size() && end >= bps[seg]) ++seg;
    start = end;
  }
  return out;
}

Matrix transition_matrix(const RateMatrix& rates, double omega, double t) {
  const Matrix& a = rates.at(t);
  if (!(omega > 0.0)) throw PreconditionError("uniformization rate must be positive");
  Matrix b = Matrix::Identity(a.rows(), a.cols()) + a / omega;
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    if (b(i, i) < -1e-12) {
      std::ostringstream msg;
      msg << "uniformization rate " << omega << " is below the exit rate " << -a(i, i)
          << " of state " << i;
      throw PreconditionError(msg.str());
    }
    b(i, i) = std::max(b(i, i), 0.0);
  }
  return b;
}

Trajectory collapse_grid(const Grid& grid, double t_end) {
  if (!grid.has_states()) throw PreconditionError("collapse_grid needs a labelled grid");
  if (grid.states.size() != grid.times.size() + 1)
    throw PreconditionError("grid needs |W| + 1 state labels");
  std::vector<double> times;
  std::vector<int> states;
  int prev = grid.states.front();
  for (std::size_t i = 0; i < grid.times.size(); ++i) {
    const int s = grid.states[i + 1];
    if (s != prev) {
      times.push_back(grid.times[i]);
      states.push_back(s);
      prev = s;
    }
  }
  return Trajectory(grid.states.front(), std::move(times), std::move(states), t_end);
}

Grid expand_trajectory(const Trajectory& path, std::span<const double> thinned) {
  Grid grid;
  grid.states.push_back(path.initial_state());
  const auto jt = path.jump_times();
  const auto js = path.jump_states();
  std::size_t j = 0, u = 0;
  int state = path.initial_state();
  while (j < jt.size() || u < thinned.size()) {
    if (u >= thinned.size() || (j < jt.size() && jt[j] <= thinned[u])) {
      state = js[j];
      grid.times.push_back(jt[j++]);
    } else {
      grid.times.push_back(thinned[u++]);
    }
    grid.states.push_back(state);
  }
  return grid;
}

PathStatistics path_statistics(const Trajectory& path, int num_states) {
  if (path.max_state() >= num_states)
    throw PreconditionError("trajectory visits a state outside the state space");
  PathStatistics st;
  const auto n = static_cast<std::size_t>(num_states);
  st.dwell_times.assign(n, 0.0);
  st.transitions.assign(n, std::vector<int>(n, 0));
  path.for_each_segment([&](double a, double b, int s) {
    st.dwell_times[static_cast<std::size_t>(s)] += b - a;
  });
  int prev = path.initial_state();
  for (int s : path.jump_states()) {
    ++st.transitions[static_cast<std::size_t>(prev)][static_cast<std::size_t>(s)];
    if (s - prev == 1) ++st.up_count;
    if (s - prev == -1) ++st.down_count;
    prev = s;
  }
  for (std::size_t i = 0; i < n; ++i) st.weighted_dwell += st.dwell_times[i] * static_cast<double>(i);
  return st;
}

double poisson_process_log_density(std::size_t count, double rate, double t_end) {
  if (!(rate > 0.0)) throw PreconditionError("Poisson process rate must be positive");
  return static_cast<double>(count) * std::log(rate) - rate * t_end;
}

double trajectory_log_likelihood(const Trajectory& path, const RateMatrix& rates) {
  double ll = 0.0;
  const auto jt = path.jump_times();
  const auto js = path.jump_states();
  int prev = path.initial_state();
  for (std::size_t k = 0; k < jt.size(); ++k) {
    const double rate = rates.at(jt[k])(prev, js[k]);
    if (!(rate > 0.0)) return -std::numeric_limits<double>::infinity();
    ll += std::log(rate);
    prev = js[k];
  }
  const auto bps = rates.breakpoints();
  path.for_each_segment([&](double a, double b, int s) {
    // Split the holding interval at rate breakpoints.
    double start = a;
    std::size_t seg = rates.segment_index(a);
    while (start < b) {
      const double end = seg < bps.size() ? std::min(b, bps[seg]) : b;
      ll += rates.segment(seg)(s, s) * (end - start);
      start = end;
      ++seg;
    }
  });
  return ll;
}

}  // namespace mjp
