#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairsweep/cohort.hpp"
#include "fairsweep/features.hpp"
#include "fairsweep/metrics.hpp"
#include "fairsweep/model.hpp"
#include "fairsweep/penalty.hpp"

namespace fairsweep {

// Geometric sequence with inclusive endpoints:
// lambda_j = min * (max/min)^(j/(count-1)). count == 1 requires min == max.
std::vector<double> lambda_grid(int count, double min, double max);

struct SplitSettings {
  double test_fraction = 0.1;
  int folds = 10;
  std::uint64_t seed = 0;
};

struct LambdaGridSpec {
  int count = 10;
  double min = 1e-3;
  double max = 10.0;
};

struct ExperimentConfig {
  std::string cohort_file;  // empty when synthetic
  std::optional<SyntheticSpec> synthetic;
  std::optional<GroupAttribute> attribute;  // required for file cohorts
  SplitSettings split;
  std::vector<int> folds_to_run;  // empty = every fold
  Hyperparameters hp;
  bool allow_off_grid = false;
  PenaltyConfig penalty;  // lambda field is ignored by sweeps
  LambdaGridSpec lambda;
  std::uint64_t train_seed = 0;
  std::string output_dir;
  int parallelism = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& doc);
};

ExperimentConfig load_experiment_config(const std::string& path);

// Named synthetic cohorts. "two-group-base-rate-gap": two equal-weight
// groups with one-hot group indicators, shared signal coefficients, and
// intercepts solved (by exact enumeration) for base rates 0.10 and 0.30.
SyntheticSpec synthetic_preset(const std::string& name, std::size_t n,
                               std::uint64_t seed);

IntervalSpec interval_spec_from_json(const nlohmann::json& doc);

Cohort materialize_cohort(const ExperimentConfig& config);
GroupAttribute resolve_attribute(const ExperimentConfig& config);

struct SweepCell {
  int fold = 0;
  int lambda_index = 0;  // 0 = unpenalized baseline
  double lambda = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  bool resumed = false;  // loaded from a previous run
  std::string error;
  FairnessReport report;
};

struct AggregateRow {
  int lambda_index = 0;
  double lambda = 0.0;
  std::string group;
  std::string metric;
  std::optional<double> mean;
  std::optional<double> sd;  // sample SD; unset when fewer than 2 values
  int count = 0;             // defined values contributing
};

struct SweepResult {
  ExperimentConfig config;
  GroupAttribute attribute;
  std::vector<double> lambdas;  // [0, grid...]
  std::vector<SweepCell> cells;
  std::vector<AggregateRow> aggregates;
  int cells_trained = 0;
  int cells_resumed = 0;
  int cells_failed = 0;
};

// Trains baseline plus every grid lambda on each requested fold, evaluates
// each model on the held-out test set, persists per-cell outputs under
// output_dir/cells, and aggregates fold statistics. Cells whose report
// already exists are loaded, not retrained; a failed cell is recorded
// without aborting the sweep.
SweepResult run_sweep(const ExperimentConfig& config);

// Rebuilds a SweepResult from a sweep directory without training anything.
SweepResult load_sweep_dir(const std::string& dir);

// format "csv": writes report.csv (one row per fold/lambda/group) and
// aggregate.csv (long-format mean/SD) under `dir`. format "json": writes
// report.json. Output is byte-identical for identical results.
void emit_report(const SweepResult& result, const std::string& format,
                 const std::string& dir);

// Fold mean/SD per (lambda, group, metric), undefined values excluded.
std::vector<AggregateRow> aggregate_cells(const std::vector<SweepCell>& cells);

// Reload of the per-cell CSV, for re-aggregation.
struct CsvReportRow {
  double lambda = 0.0;
  int lambda_index = 0;
  int fold = 0;
  std::string group;
  std::vector<std::pair<std::string, std::optional<double>>> metrics;
};
std::vector<CsvReportRow> read_report_csv(const std::string& path);
std::vector<AggregateRow> aggregate_csv_rows(const std::vector<CsvReportRow>& rows);

std::uint64_t config_hash(const ExperimentConfig& config);

// Hyperparameter random search: trains `count` sampled configurations
// unpenalized on the requested folds and ranks them by mean validation
// cross-entropy. Returns (config, mean val CE) sorted best first.
std::vector<std::pair<Hyperparameters, double>> tune_hyperparameters(
    const ExperimentConfig& config, int count, std::uint64_t search_seed);

}  // namespace fairsweep
