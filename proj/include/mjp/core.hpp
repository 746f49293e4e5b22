#pragma once

// Markov jump process fundamentals: generators, trajectories, exact
// simulation, uniformization grids and path sufficient statistics.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

#include "mjp/random.hpp"

namespace mjp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kRowSumTolerance = 1e-10;

/// Generator of a Markov jump process. Either homogeneous, or
/// piecewise-constant in time: segment k applies on
/// [breakpoints[k-1], breakpoints[k]) with segment 0 starting at -inf and the
/// last segment extending to +inf (right-continuous).
class RateMatrix {
 public:
  explicit RateMatrix(Matrix entries);
  RateMatrix(std::vector<double> breakpoints, std::vector<Matrix> segments);

  static RateMatrix zero(int dim);

  int dim() const { return static_cast<int>(segments_.front().rows()); }
  bool time_dependent() const { return !breakpoints_.empty(); }

  /// Entries in force at time t.
  const Matrix& at(double t) const { return segments_[segment_index(t)]; }
  const Matrix& entries() const { return segments_.front(); }

  std::size_t segment_count() const { return segments_.size(); }
  const Matrix& segment(std::size_t k) const { return segments_[k]; }
  std::size_t segment_index(double t) const;
  std::span<const double> breakpoints() const { return breakpoints_; }

  /// A_i(t) = -A_ii(t).
  double exit_rate(int state, double t = 0.0) const { return -at(t)(state, state); }
  /// max_i A_i over the segments that intersect [0, t_end].
  double max_exit_rate(double t_end) const;

 private:
  std::vector<double> breakpoints_;
  std::vector<Matrix> segments_;
};

/// Right-continuous piecewise-constant path on [0, t_end]: initial state s0,
/// then jump_states[k] from jump_times[k] onwards.
class Trajectory {
 public:
  Trajectory(int initial_state, std::vector<double> jump_times, std::vector<int> jump_states,
             double t_end);

  static Trajectory constant(int state, double t_end) { return Trajectory(state, {}, {}, t_end); }

  int initial_state() const { return initial_state_; }
  std::span<const double> jump_times() const { return jump_times_; }
  std::span<const int> jump_states() const { return jump_states_; }
  double t_end() const { return t_end_; }
  std::size_t num_jumps() const { return jump_times_.size(); }

  int state_at(double t) const;
  int final_state() const { return jump_states_.empty() ? initial_state_ : jump_states_.back(); }
  int max_state() const;

  /// Calls f(start, end, state) for each constant piece, in time order.
  template <class F>
  void for_each_segment(F&& f) const {
    double start = 0.0;
    int state = initial_state_;
    for (std::size_t k = 0; k < jump_times_.size(); ++k) {
      f(start, jump_times_[k], state);
      start = jump_times_[k];
      state = jump_states_[k];
    }
    f(start, t_end_, state);
  }

  bool operator==(const Trajectory&) const = default;

 private:
  int initial_state_;
  std::vector<double> jump_times_;
  std::vector<int> jump_states_;
  double t_end_;
};

/// Uniformization grid. `times` are the candidate jump times W in (0, t_end);
/// `states`, when present, has |W| + 1 entries with index 0 the state at
/// time 0.
struct Grid {
  std::vector<double> times;
  std::vector<int> states;

  bool has_states() const { return !states.empty(); }
};

struct PathStatistics {
  std::vector<double> dwell_times;           // tau_i
  std::vector<std::vector<int>> transitions; // n_ij, zero diagonal
  int up_count = 0;                          // jumps i -> i+1
  int down_count = 0;                        // jumps i -> i-1
  double weighted_dwell = 0.0;               // sum_i tau_i * i
};

/// Exact simulation by Gillespie's algorithm. Homogeneous generators only.
Trajectory gillespie_simulate(const RateMatrix& rates, std::span<const double> pi0, double t_end,
                              Rng& rng);

/// Simulation by uniformization (Poisson grid of rate omega, embedded chain
/// B(t) = I + A(t)/omega). Handles time-dependent generators.
Trajectory simulate_uniformized(const RateMatrix& rates, std::span<const double> pi0,
                                double t_end, double omega, Rng& rng);

/// Evolves a single state from t_from to t_to. Exact for piecewise-constant
/// generators (memorylessness lets each segment restart the clock). Jumps are
/// appended to the optional output vectors.
int advance_state(const RateMatrix& rates, int state, double t_from, double t_to, Rng& rng,
                  std::vector<double>* jump_times = nullptr,
                  std::vector<int>* jump_states = nullptr);

struct Thinning {
  std::vector<double> thinned;  // U
  Grid grid;                    // W = T u U with states from the trajectory
};

/// Draws the thinned candidate times U from the Poisson process with
/// piecewise-constant intensity omega - A_{S(t)}(t), and returns them together
/// with the merged grid.
Thinning sample_thinned_times(const Trajectory& path, const RateMatrix& rates, double omega,
                              Rng& rng);

/// B = I + A(t)/omega.
Matrix transition_matrix(const RateMatrix& rates, double omega, double t = 0.0);

/// Drops the self-transitions of a labelled grid.
Trajectory collapse_grid(const Grid& grid, double t_end);

/// Inserts `thinned` as self-transitions into the path's jump skeleton.
Grid expand_trajectory(const Trajectory& path, std::span<const double> thinned);

PathStatistics path_statistics(const Trajectory& path, int num_states);

/// Ordered-point log density of `count` events of a rate-`rate` Poisson process
/// on [0, t_end].
double poisson_process_log_density(std::size_t count, double rate, double t_end);

/// log density of (S, T) given s0 under the generator:
/// sum_k log A_{s_k s_{k+1}}(t_k) - integral of A_{S(t)}(t) dt.
double trajectory_log_likelihood(const Trajectory& path, const RateMatrix& rates);

/// Checks that pi0 is a probability vector of the given dimension.
void validate_distribution(std::span<const double> pi0, int dim);

}  // namespace mjp
