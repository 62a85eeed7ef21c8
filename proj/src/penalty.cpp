#include "fairsweep/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fairsweep/errors.hpp"

namespace fairsweep {

namespace {

constexpr double kBandwidthFloor = 1e-3;

// Accumulates w * sum_{i in I, j in J} k(v[i], v[j]) for the Gaussian kernel,
// together with its gradient when `grad` is non-null. I and J index into v.
double kernel_block(const double* v, std::span<const int> idx_a,
                    std::span<const int> idx_b, double inv_two_sigma_sq,
                    double inv_sigma_sq, double weight, double* grad) {
  double total = 0.0;
  for (int i : idx_a) {
    const double vi = v[i];
    for (int j : idx_b) {
      const double d = vi - v[j];
      const double kv = std::exp(-d * d * inv_two_sigma_sq);
      total += kv;
      if (grad != nullptr) {
        const double g = weight * kv * d * inv_sigma_sq;
        grad[i] -= g;
        grad[j] += g;
      }
    }
  }
  return weight * total;
}

double stratum_penalty(std::span<const double> values,
                       const std::vector<int>& stratum,
                       std::span<const int> groups, int group_count,
                       Distance distance, double sigma, double* grad) {
  const std::size_t n = stratum.size();
  if (n < 2) return 0.0;

  std::vector<std::vector<int>> cells(group_count);
  for (int i : stratum) cells[groups[i]].push_back(i);

  int valid_cells = 0;
  for (const auto& cell : cells) {
    if (cell.size() >= 2) ++valid_cells;
  }
  if (valid_cells == 0) return 0.0;

  double total = 0.0;
  if (distance == Distance::mean) {
    double marginal_mean = 0.0;
    for (int i : stratum) marginal_mean += values[i];
    marginal_mean /= static_cast<double>(n);

    double coupled = 0.0;  // sum over valid cells of 2 * (cell mean - marginal)
    std::vector<double> cell_term(group_count, 0.0);
    for (int k = 0; k < group_count; ++k) {
      if (cells[k].size() < 2) continue;
      double cell_mean = 0.0;
      for (int i : cells[k]) cell_mean += values[i];
      cell_mean /= static_cast<double>(cells[k].size());
      const double diff = cell_mean - marginal_mean;
      total += diff * diff;
      cell_term[k] = 2.0 * diff / static_cast<double>(cells[k].size());
      coupled += 2.0 * diff;
    }
    if (grad != nullptr) {
      const double marginal_term = coupled / static_cast<double>(n);
      for (int i : stratum) grad[i] -= marginal_term;
      for (int k = 0; k < group_count; ++k) {
        for (int i : cells[k]) grad[i] += cell_term[k];
      }
    }
    return total;
  }

  // MMD form. The marginal-vs-marginal block is identical for every group, so
  // compute it once with the summed weight.
  const double inv_sigma_sq = 1.0 / (sigma * sigma);
  const double inv_two_sigma_sq = 0.5 * inv_sigma_sq;
  const double w_marginal =
      static_cast<double>(valid_cells) / (static_cast<double>(n) * static_cast<double>(n));
  total += kernel_block(values.data(), stratum, stratum, inv_two_sigma_sq,
                        inv_sigma_sq, w_marginal, grad);
  for (int k = 0; k < group_count; ++k) {
    const auto& cell = cells[k];
    if (cell.size() < 2) continue;
    const auto m = static_cast<double>(cell.size());
    total += kernel_block(values.data(), cell, cell, inv_two_sigma_sq,
                          inv_sigma_sq, 1.0 / (m * m), grad);
    total += kernel_block(values.data(), cell, stratum, inv_two_sigma_sq,
                          inv_sigma_sq, -2.0 / (m * static_cast<double>(n)), grad);
  }
  return total;
}

double penalty_impl(std::span<const double> values, std::span<const int> y,
                    std::span<const int> groups, int group_count,
                    const PenaltyConfig& config, double bandwidth,
                    double* grad) {
  if (values.size() != y.size() || values.size() != groups.size()) {
    throw ConfigError("regularizer: misaligned inputs");
  }
  if (config.distance == Distance::mmd && !(bandwidth > 0.0)) {
    throw ConfigError("regularizer: bandwidth must be positive");
  }
  const int n = static_cast<int>(values.size());

  std::vector<int> positives, negatives, everyone;
  for (int i = 0; i < n; ++i) {
    everyone.push_back(i);
    if (y[i] == 1) {
      positives.push_back(i);
    } else {
      negatives.push_back(i);
    }
  }

  switch (config.criterion) {
    case Criterion::demographic_parity:
      return stratum_penalty(values, everyone, groups, group_count,
                             config.distance, bandwidth, grad);
    case Criterion::equal_opportunity:
      return stratum_penalty(values, positives, groups, group_count,
                             config.distance, bandwidth, grad);
    case Criterion::equalized_odds:
      return stratum_penalty(values, positives, groups, group_count,
                             config.distance, bandwidth, grad) +
             stratum_penalty(values, negatives, groups, group_count,
                             config.distance, bandwidth, grad);
  }
  throw ConfigError("regularizer: unknown criterion");
}

}  // namespace

Criterion parse_criterion(const std::string& name) {
  if (name == "demographic_parity") return Criterion::demographic_parity;
  if (name == "equalized_odds") return Criterion::equalized_odds;
  if (name == "equal_opportunity") return Criterion::equal_opportunity;
  throw ConfigError("unknown criterion '" + name + "'");
}

Distance parse_distance(const std::string& name) {
  if (name == "mmd") return Distance::mmd;
  if (name == "mean") return Distance::mean;
  throw ConfigError("unknown distance '" + name + "'");
}

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::demographic_parity: return "demographic_parity";
    case Criterion::equalized_odds: return "equalized_odds";
    case Criterion::equal_opportunity: return "equal_opportunity";
  }
  return "?";
}

std::string to_string(Distance d) {
  return d == Distance::mmd ? "mmd" : "mean";
}

std::string BandwidthPolicy::describe() const {
  if (median) return "median";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", sigma);
  return buf;
}

void PenaltyConfig::validate() const {
  if (lambda < 0.0) throw ConfigError("penalty lambda must be >= 0");
  if (!bandwidth.median && !(bandwidth.sigma > 0.0)) {
    throw ConfigError("fixed bandwidth must be > 0");
  }
}

double mmd_sq(std::span<const double> sample_a, std::span<const double> sample_b,
              double bandwidth) {
  if (sample_a.empty() || sample_b.empty()) {
    throw ConfigError("mmd_sq: samples must be nonempty");
  }
  if (!(bandwidth > 0.0)) throw ConfigError("mmd_sq: bandwidth must be positive");
  const double inv_sigma_sq = 1.0 / (bandwidth * bandwidth);
  const double inv_two_sigma_sq = 0.5 * inv_sigma_sq;
  auto mean_kernel = [&](std::span<const double> u, std::span<const double> v) {
    double total = 0.0;
    for (double a : u) {
      for (double b : v) {
        const double d = a - b;
        total += std::exp(-d * d * inv_two_sigma_sq);
      }
    }
    return total / (static_cast<double>(u.size()) * static_cast<double>(v.size()));
  };
  const double value = mean_kernel(sample_a, sample_a) +
                       mean_kernel(sample_b, sample_b) -
                       2.0 * mean_kernel(sample_a, sample_b);
  return std::max(0.0, value);
}

double mean_diff_penalty(const std::vector<std::vector<double>>& group_values,
                         std::span<const double> marginal) {
  if (marginal.empty()) throw ConfigError("mean_diff_penalty: empty marginal");
  double marginal_mean = 0.0;
  for (double v : marginal) marginal_mean += v;
  marginal_mean /= static_cast<double>(marginal.size());
  double total = 0.0;
  for (const auto& group : group_values) {
    if (group.empty()) continue;
    double mean = 0.0;
    for (double v : group) mean += v;
    mean /= static_cast<double>(group.size());
    const double diff = mean - marginal_mean;
    total += diff * diff;
  }
  return total;
}

double resolve_bandwidth(std::span<const double> pooled_values,
                         const BandwidthPolicy& policy) {
  if (!policy.median) {
    if (!(policy.sigma > 0.0)) throw ConfigError("fixed bandwidth must be > 0");
    return policy.sigma;
  }
  const std::size_t n = pooled_values.size();
  if (n < 2) return kBandwidthFloor;
  std::vector<double> diffs;
  diffs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      diffs.push_back(std::abs(pooled_values[i] - pooled_values[j]));
    }
  }
  const std::size_t m = diffs.size();
  const std::size_t mid = m / 2;
  std::nth_element(diffs.begin(), diffs.begin() + mid, diffs.end());
  double median = diffs[mid];
  if (m % 2 == 0) {
    // midpoint convention for even counts
    const double lower = *std::max_element(diffs.begin(), diffs.begin() + mid);
    median = 0.5 * (lower + median);
  }
  return std::max(median, kBandwidthFloor);
}

double regularizer(std::span<const double> log_probs, std::span<const int> y,
                   std::span<const int> groups, int group_count,
                   const PenaltyConfig& config, double bandwidth) {
  return penalty_impl(log_probs, y, groups, group_count, config, bandwidth,
                      nullptr);
}

double regularizer_with_grad(std::span<const double> log_probs,
                             std::span<const int> y, std::span<const int> groups,
                             int group_count, const PenaltyConfig& config,
                             double bandwidth, std::span<double> grad) {
  if (grad.size() != log_probs.size()) {
    throw ConfigError("regularizer_with_grad: gradient size mismatch");
  }
  return penalty_impl(log_probs, y, groups, group_count, config, bandwidth,
                      grad.data());
}

}  // namespace fairsweep
