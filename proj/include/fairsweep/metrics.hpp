#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairsweep/cohort.hpp"
#include "fairsweep/penalty.hpp"

namespace fairsweep {

// One-feature logistic recalibration model g(f) = sigmoid(w * log f + b),
// fit by maximum likelihood.
struct Calibrator {
  double slope = 0.0;
  double intercept = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;

  double predict(double f) const;
};

// Fits g on (f, y). Throws DataError when y is single-class. When every f is
// identical the slope is unidentifiable: returns slope 0, intercept
// logit(mean y). Non-convergence after 500 L-BFGS iterations leaves
// `converged` false.
Calibrator fit_calibrator(std::span<const double> predictions,
                          std::span<const int> outcomes);

// Ranking and loss metrics. Ties count 1/2 in every ranking metric.
// Undefined results (single-class inputs, empty comparison sets) come back
// as std::nullopt, never as 0.
std::optional<double> auroc(std::span<const double> scores,
                            std::span<const int> outcomes);
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const int> outcomes);
double cross_entropy(std::span<const double> predictions,
                     std::span<const int> outcomes);

// 1-Wasserstein distance between empirical distributions.
double emd_1d(std::span<const double> sample_a, std::span<const double> sample_b);

enum class Stratum { all, positive, negative };
enum class ParityForm { emd, mean };

struct ParityDecomposition {
  std::vector<std::optional<double>> group_values;  // per group; unset if empty
  std::optional<double> aggregate;  // sum (emd) or sum of squares (mean form)
};

// One-vs-marginal decomposition of conditional prediction parity within a
// stratum. Mean-form group values are signed (group mean minus marginal
// mean); the mean-form aggregate is the sum of their squares.
ParityDecomposition parity_decomposition(std::span<const double> predictions,
                                         std::span<const int> outcomes,
                                         std::span<const int> groups,
                                         int group_count, Stratum stratum,
                                         ParityForm form);

// Absolute calibration error of the population (f, y): fits a calibrator on
// it and averages (g(f) - f)^2, or the signed gap (positive = risk is
// under-predicted).
double ace(std::span<const double> predictions, std::span<const int> outcomes,
           bool signed_form);

// Relative calibration error for one group: mean over that group's records
// of the squared (or signed) gap between the group calibrator and the
// marginal calibrator. Undefined when the group lacks both outcome classes.
std::optional<double> rce(std::span<const double> predictions,
                          std::span<const int> outcomes,
                          std::span<const int> groups, int group,
                          bool signed_form);

// Cross-group ranking. positive direction: P(group-k positives outrank
// other-group negatives); negative direction: P(other-group positives
// outrank group-k negatives).
std::optional<double> xauc(std::span<const double> scores,
                           std::span<const int> outcomes,
                           std::span<const int> groups, int group,
                           bool positive_direction);

struct GroupMetrics {
  std::string group;
  std::size_t count = 0;
  std::optional<double> auroc;
  std::optional<double> average_precision;
  std::optional<double> ce_loss;
  std::optional<double> ace;
  std::optional<double> ace_signed;
  std::optional<double> rce;
  std::optional<double> rce_signed;
  std::optional<double> xauc_pos;   // xAUC^1
  std::optional<double> xauc_neg;   // xAUC^0
  std::optional<double> emd_dp;     // EMD vs marginal, all records
  std::optional<double> emd_y1;     // y=1 stratum
  std::optional<double> emd_y0;     // y=0 stratum
  std::optional<double> mean_dp;    // signed mean difference vs marginal
  std::optional<double> mean_y1;
  std::optional<double> mean_y0;
};

struct ReportMetadata {
  std::string criterion = "demographic_parity";
  std::string distance = "mmd";
  std::string bandwidth = "median";
  double lambda = 0.0;
  int lambda_index = 0;
  int fold = 0;
  std::uint64_t seed = 0;
};

struct FairnessReport {
  ReportMetadata meta;
  std::string attribute;
  std::vector<GroupMetrics> groups;
  GroupMetrics overall;  // group == "__overall__"
  std::optional<double> emd_dp_total;
  std::optional<double> emd_eqopp_total;
  std::optional<double> emd_eqodds_total;
  std::optional<double> mean_dp_total;
  std::optional<double> mean_eqopp_total;
  std::optional<double> mean_eqodds_total;
};

// Full evaluation suite over aligned prediction/outcome/group arrays.
FairnessReport evaluate(std::span<const double> predictions,
                        std::span<const int> outcomes,
                        std::span<const int> groups,
                        const GroupAttribute& attribute,
                        const ReportMetadata& meta);

// Convenience wrapper: predictions aligned with cohort record order.
FairnessReport evaluate(const Cohort& cohort,
                        std::span<const double> predictions,
                        const ReportMetadata& meta);

// CSV serialization: one row per group plus one "__overall__" row carrying
// the aggregate parity metrics. Undefined values serialize as "NA". Column
// order is fixed; see report_csv_header().
std::string report_csv_header();
void append_report_csv(const FairnessReport& report, std::string& out);

nlohmann::json report_to_json(const FairnessReport& report);
FairnessReport report_from_json(const nlohmann::json& doc);

}  // namespace fairsweep
