#pragma once

// Discrete-time HMM machinery on a uniformization grid W. The grid splits
// [0, t_end] into the intervals [0, w_1), [w_1, w_2), ..., [w_|W|, t_end];
// the hidden chain holds one state per interval and moves between intervals
// through the step matrix B evaluated at the grid time.

#include <cstddef>
#include <span>
#include <vector>

#include "mjp/core.hpp"
#include "mjp/random.hpp"

namespace mjp {

struct GaussianObservation {
  double time = 0.0;
  double value = 0.0;
  double variance = 1.0;
};

class ObservationSet {
 public:
  enum class Kind { gaussian_points, poisson_events };

  ObservationSet() = default;
  /// Gaussian observations with mean equal to the state index. Sorted by time
  /// on construction.
  static ObservationSet gaussian(std::vector<GaussianObservation> points);
  /// Event times of a Poisson process with per-state rates.
  static ObservationSet poisson(std::vector<double> events, std::vector<double> rates);

  Kind kind() const { return kind_; }
  std::span<const GaussianObservation> points() const { return points_; }
  std::span<const double> events() const { return events_; }
  std::span<const double> rates() const { return rates_; }
  std::size_t size() const { return kind_ == Kind::gaussian_points ? points_.size() : events_.size(); }

  /// Same data with the emission rates replaced.
  ObservationSet with_rates(std::vector<double> rates) const;
  /// Throws PreconditionError unless all times lie in [0, t_end].
  void validate(double t_end) const;

 private:
  Kind kind_ = Kind::gaussian_points;
  std::vector<GaussianObservation> points_;
  std::vector<double> events_;
  std::vector<double> rates_;
};

/// log P(observations in [a, b) | state constant at s). `rates` overrides the
/// set's Poisson emission rates when nonempty.
double interval_log_likelihood(const ObservationSet& obs, int state, double a, double b,
                               std::span<const double> rates = {});

/// (|W| + 1) x N matrix of per-interval log-likelihoods. Observations at a
/// grid time belong to the interval starting there; observations at t_end
/// belong to the last interval.
Matrix grid_log_likelihoods(const ObservationSet& obs, std::span<const double> grid, double t_end,
                            int num_states, std::span<const double> rates = {});

/// One stochastic matrix per grid transition. Homogeneous generators share a
/// single matrix.
class StepMatrices {
 public:
  static StepMatrices constant(Matrix b, std::size_t steps);
  /// B_i = I + A(w_i) / omega.
  static StepMatrices build(const RateMatrix& rates, double omega, std::span<const double> grid);
  static StepMatrices from_list(std::vector<Matrix> matrices);

  std::size_t size() const { return steps_; }
  const Matrix& operator[](std::size_t step) const {
    return distinct_[index_.empty() ? 0 : index_[step]];
  }

 private:
  std::vector<Matrix> distinct_;
  std::vector<std::size_t> index_;
  std::size_t steps_ = 0;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FilterMessages {
  /// Row i: P(state on interval i | observations up to interval i).
  RowMatrix filtered;
  /// Per-interval log normalizers; they sum to log_marginal.
  std::vector<double> log_normalizers;
  double log_marginal = 0.0;
  /// Some interval has zero likelihood under every reachable state.
  bool impossible = false;
};

FilterMessages forward_pass(const Matrix& log_likelihoods, const StepMatrices& steps,
                            std::span<const double> pi0);
FilterMessages forward_pass(std::span<const double> grid, const StepMatrices& steps,
                            std::span<const double> pi0, const ObservationSet& obs, double t_end);

/// Exact joint draw of the interval states given the grid and observations.
std::vector<int> backward_sample(const FilterMessages& messages, const StepMatrices& steps,
                                 Rng& rng);

/// log P(X | A) by matrix exponentials between observation times. For small
/// homogeneous generators; used to check the grid-based estimators.
double exact_marginal_likelihood(const RateMatrix& rates, std::span<const double> pi0,
                                 const ObservationSet& obs, double t_end);

}  // namespace mjp
