#pragma once

#include <span>
#include <string>
#include <vector>

namespace fairsweep {

enum class Criterion { demographic_parity, equalized_odds, equal_opportunity };
enum class Distance { mmd, mean };

Criterion parse_criterion(const std::string& name);
Distance parse_distance(const std::string& name);
std::string to_string(Criterion c);
std::string to_string(Distance d);

// Kernel bandwidth selection for the MMD distance. The median heuristic uses
// the median pairwise absolute difference of the pooled values, floored at
// 1e-3, and is treated as a constant when differentiating.
struct BandwidthPolicy {
  bool median = true;
  double sigma = 1.0;  // used when median == false; must be > 0

  static BandwidthPolicy median_heuristic() { return {true, 0.0}; }
  static BandwidthPolicy fixed(double sigma) { return {false, sigma}; }
  std::string describe() const;
};

struct PenaltyConfig {
  Criterion criterion = Criterion::demographic_parity;
  Distance distance = Distance::mmd;
  double lambda = 0.0;
  BandwidthPolicy bandwidth = BandwidthPolicy::median_heuristic();
  // By default the penalty compares the positive-class log probabilities
  // only. When set, it is the sum of the penalties on both log-softmax
  // components (each resolving its own bandwidth under the median policy).
  bool on_both_components = false;

  void validate() const;
};

// Biased (V-statistic) squared MMD with a Gaussian kernel
// k(u,v) = exp(-(u-v)^2 / (2 sigma^2)); always >= 0.
double mmd_sq(std::span<const double> sample_a, std::span<const double> sample_b,
              double bandwidth);

// Sum over groups of (group mean - marginal mean)^2. Empty groups are
// dropped from the sum.
double mean_diff_penalty(const std::vector<std::vector<double>>& group_values,
                         std::span<const double> marginal);

double resolve_bandwidth(std::span<const double> pooled_values,
                         const BandwidthPolicy& policy);

// Fairness regularizer R on per-record scalars (the positive-class log
// probabilities during training). One-vs-marginal comparisons within the
// strata selected by the criterion; group cells with fewer than 2 records in
// a stratum contribute 0. `bandwidth` must already be resolved.
double regularizer(std::span<const double> log_probs, std::span<const int> y,
                   std::span<const int> groups, int group_count,
                   const PenaltyConfig& config, double bandwidth);

// Same value, plus dR/d(log_probs) accumulated into `grad` (grad must be
// zero-initialized by the caller, size == log_probs.size()).
double regularizer_with_grad(std::span<const double> log_probs,
                             std::span<const int> y, std::span<const int> groups,
                             int group_count, const PenaltyConfig& config,
                             double bandwidth, std::span<double> grad);

}  // namespace fairsweep
