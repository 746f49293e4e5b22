#include "mjp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mjp/errors.hpp"

namespace mjp {

EssEstimate effective_sample_size(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 10) throw PreconditionError("effective sample size needs at least 10 draws");
  EssEstimate out;
  const auto [lo, hi] = std::minmax_element(chain.begin(), chain.end());
  if (*lo == *hi) {
    out.degenerate = true;
    return out;
  }

  const double mean = std::accumulate(chain.begin(), chain.end(), 0.0) / static_cast<double>(n);
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = chain[t] - mean;

  const auto max_order = static_cast<std::size_t>(
      std::min<double>(static_cast<double>(n - 1), std::floor(10.0 * std::log10(static_cast<double>(n)))));
  // Biased autocovariances r_k = (1/n) sum_t x_t x_{t+k}.
  std::vector<double> r(max_order + 1, 0.0);
  for (std::size_t k = 0; k <= max_order; ++k) {
    double acc = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) acc += x[t] * x[t + k];
    r[k] = acc / static_cast<double>(n);
  }

  // Levinson-Durbin: coefficients and innovation variance for each order.
  std::vector<std::vector<double>> coefs(max_order + 1);
  std::vector<double> var_pred(max_order + 1);
  var_pred[0] = r[0];
  std::vector<double> phi;
  for (std::size_t k = 1; k <= max_order; ++k) {
    double num = r[k];
    for (std::size_t j = 1; j < k; ++j) num -= phi[j - 1] * r[k - j];
    const double reflection = num / var_pred[k - 1];
    std::vector<double> next(k);
    for (std::size_t j = 1; j < k; ++j) next[j - 1] = phi[j - 1] - reflection * phi[k - j - 1];
    next[k - 1] = reflection;
    phi = std::move(next);
    coefs[k] = phi;
    var_pred[k] = var_pred[k - 1] * (1.0 - reflection * reflection);
  }

  std::size_t order = 0;
  double best = INFINITY;
  for (std::size_t k = 0; k <= max_order; ++k) {
    if (!(var_pred[k] > 0.0)) break;
    const double aic = static_cast<double>(n) * std::log(var_pred[k]) + 2.0 * static_cast<double>(k);
    if (aic < best) {
      best = aic;
      order = k;
    }
  }
  const double innovation = var_pred[order] * static_cast<double>(n) / static_cast<double>(n - (order + 1));
  const double coef_sum = std::accumulate(coefs[order].begin(), coefs[order].end(), 0.0);
  const double spectrum = innovation / ((1.0 - coef_sum) * (1.0 - coef_sum));

  double sample_var = 0.0;
  for (double v : x) sample_var += v * v;
  sample_var /= static_cast<double>(n - 1);

  out.ar_order = static_cast<int>(order);
  out.spectral_density_at_zero = spectrum;
  out.ess = std::clamp(static_cast<double>(n) * sample_var / spectrum, 0.0, 1.05 * static_cast<double>(n));
  return out;
}

EssReport ess_report(const std::vector<std::vector<double>>& columns, double wall_seconds) {
  EssReport report;
  report.wall_seconds = wall_seconds;
  for (const auto& column : columns) {
    const double ess = effective_sample_size(column).ess;
    report.ess.push_back(ess);
    report.ess_per_sec.push_back(wall_seconds > 0.0 ? ess / wall_seconds : 0.0);
  }
  return report;
}

std::vector<double> parameter_trace(std::span<const ChainRecord> records, std::size_t j,
                                    std::size_t first) {
  std::vector<double> out;
  for (std::size_t i = first; i < records.size(); ++i) out.push_back(records[i].theta.at(j));
  return out;
}

std::vector<std::size_t> transition_count_trace(std::span<const ChainRecord> records) {
  std::vector<std::size_t> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.n_transitions);
  return out;
}

}  // namespace mjp
