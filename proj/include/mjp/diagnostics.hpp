#pragma once

// Effective sample size and trace extraction for chain output.

#include <cstddef>
#include <span>
#include <vector>

#include "mjp/samplers.hpp"

namespace mjp {

struct EssEstimate {
  double ess = 0.0;
  /// Constant chain: ESS is reported as 0.
  bool degenerate = false;
  int ar_order = 0;
  double spectral_density_at_zero = 0.0;
};

/// ESS = n * var(x) / S(0), with the spectral density at zero taken from an
/// autoregressive fit (Yule-Walker, AIC order selection up to
/// min(n - 1, 10 log10 n)). Clipped to [0, 1.05 n]. Requires n >= 10.
EssEstimate effective_sample_size(std::span<const double> chain);

struct EssReport {
  std::vector<double> ess;
  double wall_seconds = 0.0;
  std::vector<double> ess_per_sec;
};

/// One ESS per column; ess_per_sec divides by wall_seconds.
EssReport ess_report(const std::vector<std::vector<double>>& columns, double wall_seconds);

/// Column j of theta over records[first, end).
std::vector<double> parameter_trace(std::span<const ChainRecord> records, std::size_t j,
                                    std::size_t first = 0);

std::vector<std::size_t> transition_count_trace(std::span<const ChainRecord> records);

}  // namespace mjp
