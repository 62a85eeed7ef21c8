#include "fairsweep/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "fairsweep/errors.hpp"
#include "fairsweep/version.hpp"

namespace fs = std::filesystem;

namespace fairsweep {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Expected sigmoid(b + w.x) over iid Bernoulli(sparsity) features, by exact
// enumeration of the nonzero-coefficient subsets.
double expected_rate(double intercept, const std::vector<double>& nonzero_coeffs,
                     double sparsity) {
  const std::size_t m = nonzero_coeffs.size();
  if (m > 16) throw ConfigError("intercept solver: too many nonzero coefficients");
  double total = 0.0;
  for (std::size_t mask = 0; mask < (1ULL << m); ++mask) {
    double prob = 1.0, logit = intercept;
    for (std::size_t j = 0; j < m; ++j) {
      if (mask & (1ULL << j)) {
        prob *= sparsity;
        logit += nonzero_coeffs[j];
      } else {
        prob *= 1.0 - sparsity;
      }
    }
    total += prob * sigmoid(logit);
  }
  return total;
}

double solve_intercept(double target_rate, const std::vector<double>& nonzero_coeffs,
                       double sparsity) {
  double lo = -30.0, hi = 30.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (expected_rate(mid, nonzero_coeffs, sparsity) < target_rate) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> lambda_grid(int count, double min, double max) {
  if (!(min > 0.0)) throw ConfigError("lambda grid min must be > 0");
  if (count < 1) throw ConfigError("lambda grid count must be >= 1");
  if (count == 1) {
    if (min != max) throw ConfigError("lambda grid with count 1 requires min == max");
    return {min};
  }
  if (!(min < max)) throw ConfigError("lambda grid requires min < max");
  std::vector<double> grid(count);
  const double ratio = max / min;
  for (int j = 0; j < count; ++j) {
    grid[j] = min * std::pow(ratio, static_cast<double>(j) /
                                        static_cast<double>(count - 1));
  }
  grid.front() = min;  // exact endpoints
  grid.back() = max;
  return grid;
}

SyntheticSpec synthetic_preset(const std::string& name, std::size_t n,
                               std::uint64_t seed) {
  if (name != "two-group-base-rate-gap") {
    throw ConfigError("unknown synthetic preset '" + name + "'");
  }
  SyntheticSpec spec;
  spec.n = n;
  spec.group_count = 2;
  spec.group_weights = {0.5, 0.5};
  spec.feature_dim = 20;
  spec.feature_sparsity = 0.3;
  spec.group_indicator_features = true;
  spec.seed = seed;

  // Features 0-1: group indicators. Features 2-11: shared signal, half
  // positive, half negative. Features 12-19: noise.
  std::vector<double> coeffs(spec.feature_dim, 0.0);
  std::vector<double> nonzero;
  for (int j = 2; j < 7; ++j) coeffs[j] = 1.25;
  for (int j = 7; j < 12; ++j) coeffs[j] = -1.25;
  for (int j = 2; j < 12; ++j) nonzero.push_back(coeffs[j]);
  spec.coefficients = {coeffs, coeffs};
  spec.intercepts = {solve_intercept(0.10, nonzero, spec.feature_sparsity),
                     solve_intercept(0.30, nonzero, spec.feature_sparsity)};
  return spec;
}

IntervalSpec interval_spec_from_json(const nlohmann::json& doc) {
  IntervalSpec spec;
  for (const auto& iv : doc) {
    Interval interval;
    interval.name = iv.at("name").get<std::string>();
    if (iv.contains("lower_hours") && !iv.at("lower_hours").is_null()) {
      interval.lower_hours = iv.at("lower_hours").get<double>();
    } else {
      interval.lower_hours = -std::numeric_limits<double>::infinity();
    }
    interval.upper_hours = iv.at("upper_hours").get<double>();
    spec.intervals.push_back(std::move(interval));
  }
  spec.validate();
  return spec;
}

void ExperimentConfig::validate() const {
  if (cohort_file.empty() == !synthetic.has_value()) {
    throw ConfigError("config: exactly one of cohort file or synthetic spec required");
  }
  if (synthetic) synthetic->validate();
  if (!synthetic && !attribute) {
    throw ConfigError("config: file cohorts need an attribute section");
  }
  if (attribute) attribute->validate();
  if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0)) {
    throw ConfigError("config: test_fraction must be in (0,1)");
  }
  if (split.folds < 1) throw ConfigError("config: folds must be >= 1");
  for (int f : folds_to_run) {
    if (f < 0 || f >= split.folds) {
      throw ConfigError("config: folds_to_run entry " + std::to_string(f) +
                        " out of range");
    }
  }
  hp.validate();
  if (!allow_off_grid && !hp.on_grid()) {
    throw ConfigError(
        "config: hyperparameters are off the search grid; set "
        "allow_off_grid to accept them");
  }
  penalty.validate();
  if (lambda.count < 1) throw ConfigError("config: lambda grid count must be >= 1");
  if (!(lambda.min > 0.0)) throw ConfigError("config: lambda grid min must be > 0");
  if (output_dir.empty()) throw ConfigError("config: output_dir required");
  if (parallelism < 1) throw ConfigError("config: parallelism must be >= 1");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json doc;
  if (synthetic) {
    const SyntheticSpec& s = *synthetic;
    doc["cohort"]["synthetic"] = {
        {"n", s.n},
        {"groups", s.group_count},
        {"group_weights", s.group_weights},
        {"coefficients", s.coefficients},
        {"intercepts", s.intercepts},
        {"feature_dim", s.feature_dim},
        {"feature_sparsity", s.feature_sparsity},
        {"group_indicator_features", s.group_indicator_features},
        {"seed", s.seed}};
  } else {
    doc["cohort"]["file"] = cohort_file;
  }
  if (attribute) {
    doc["attribute"] = {{"name", attribute->name},
                        {"groups", attribute->group_names}};
  }
  doc["split"] = {{"test_fraction", split.test_fraction},
                  {"folds", split.folds},
                  {"seed", split.seed}};
  if (!folds_to_run.empty()) doc["folds_to_run"] = folds_to_run;
  doc["hyperparameters"] = {{"batch_size", hp.batch_size},
                            {"dropout_prob", hp.dropout_prob},
                            {"hidden_dim", hp.hidden_dim},
                            {"learning_rate", hp.learning_rate},
                            {"num_hidden_layers", hp.num_hidden_layers},
                            {"max_iterations", hp.max_iterations},
                            {"batches_per_iteration", hp.batches_per_iteration},
                            {"patience", hp.patience},
                            {"allow_off_grid", allow_off_grid}};
  doc["penalty"] = {{"criterion", to_string(penalty.criterion)},
                    {"distance", to_string(penalty.distance)},
                    {"bandwidth", penalty.bandwidth.median
                                      ? nlohmann::json("median")
                                      : nlohmann::json(penalty.bandwidth.sigma)},
                    {"on_both_components", penalty.on_both_components}};
  doc["lambda_grid"] = {{"count", lambda.count},
                        {"min", lambda.min},
                        {"max", lambda.max}};
  doc["train_seed"] = train_seed;
  doc["output_dir"] = output_dir;
  doc["parallelism"] = parallelism;
  return doc;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc) {
  ExperimentConfig config;
  const auto& cohort = doc.at("cohort");
  if (cohort.contains("file")) {
    config.cohort_file = cohort.at("file").get<std::string>();
  } else if (cohort.contains("synthetic_preset")) {
    const auto& p = cohort.at("synthetic_preset");
    config.synthetic = synthetic_preset(p.at("name").get<std::string>(),
                                        p.at("n").get<std::size_t>(),
                                        p.value("seed", std::uint64_t{0}));
  } else if (cohort.contains("synthetic")) {
    const auto& s = cohort.at("synthetic");
    SyntheticSpec spec;
    spec.n = s.at("n").get<std::size_t>();
    spec.group_count = s.at("groups").get<int>();
    spec.group_weights = s.at("group_weights").get<std::vector<double>>();
    spec.coefficients = s.at("coefficients").get<std::vector<std::vector<double>>>();
    spec.intercepts = s.at("intercepts").get<std::vector<double>>();
    spec.feature_dim = s.at("feature_dim").get<std::uint32_t>();
    spec.feature_sparsity = s.at("feature_sparsity").get<double>();
    spec.group_indicator_features = s.value("group_indicator_features", false);
    spec.seed = s.value("seed", std::uint64_t{0});
    config.synthetic = spec;
  } else {
    throw ConfigError("config: cohort needs 'file', 'synthetic', or 'synthetic_preset'");
  }
  if (doc.contains("attribute")) {
    GroupAttribute attr;
    attr.name = doc.at("attribute").at("name").get<std::string>();
    attr.group_names = doc.at("attribute").at("groups").get<std::vector<std::string>>();
    config.attribute = std::move(attr);
  }
  if (doc.contains("split")) {
    const auto& s = doc.at("split");
    config.split.test_fraction = s.value("test_fraction", 0.1);
    config.split.folds = s.value("folds", 10);
    config.split.seed = s.value("seed", std::uint64_t{0});
  }
  if (doc.contains("folds_to_run")) {
    config.folds_to_run = doc.at("folds_to_run").get<std::vector<int>>();
  }
  if (doc.contains("hyperparameters")) {
    const auto& h = doc.at("hyperparameters");
    if (h.contains("preset")) {
      config.hp = Hyperparameters::preset(h.at("preset").get<std::string>());
      config.allow_off_grid = !config.hp.on_grid();
    }
    config.hp.batch_size = h.value("batch_size", config.hp.batch_size);
    config.hp.dropout_prob = h.value("dropout_prob", config.hp.dropout_prob);
    config.hp.hidden_dim = h.value("hidden_dim", config.hp.hidden_dim);
    config.hp.learning_rate = h.value("learning_rate", config.hp.learning_rate);
    config.hp.num_hidden_layers =
        h.value("num_hidden_layers", config.hp.num_hidden_layers);
    config.hp.max_iterations = h.value("max_iterations", config.hp.max_iterations);
    config.hp.batches_per_iteration =
        h.value("batches_per_iteration", config.hp.batches_per_iteration);
    config.hp.patience = h.value("patience", config.hp.patience);
    config.allow_off_grid = h.value("allow_off_grid", config.allow_off_grid);
  }
  if (doc.contains("penalty")) {
    const auto& p = doc.at("penalty");
    config.penalty.criterion = parse_criterion(p.at("criterion").get<std::string>());
    config.penalty.distance = parse_distance(p.at("distance").get<std::string>());
    config.penalty.lambda = p.value("lambda", 0.0);
    if (p.contains("bandwidth") && !p.at("bandwidth").is_string()) {
      config.penalty.bandwidth = BandwidthPolicy::fixed(p.at("bandwidth").get<double>());
    } else {
      config.penalty.bandwidth = BandwidthPolicy::median_heuristic();
    }
    config.penalty.on_both_components = p.value("on_both_components", false);
  }
  if (doc.contains("lambda_grid")) {
    const auto& l = doc.at("lambda_grid");
    config.lambda.count = l.value("count", 10);
    config.lambda.min = l.value("min", 1e-3);
    config.lambda.max = l.value("max", 10.0);
  }
  config.train_seed = doc.value("train_seed", std::uint64_t{0});
  config.output_dir = doc.value("output_dir", std::string{});
  config.parallelism = doc.value("parallelism", 1);
  return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return ExperimentConfig::from_json(doc);
}

GroupAttribute resolve_attribute(const ExperimentConfig& config) {
  if (config.attribute) return *config.attribute;
  if (!config.synthetic) throw ConfigError("config: attribute required");
  GroupAttribute attr;
  attr.name = "group";
  for (int k = 0; k < config.synthetic->group_count; ++k) {
    attr.group_names.push_back("g" + std::to_string(k));
  }
  return attr;
}

Cohort materialize_cohort(const ExperimentConfig& config) {
  if (config.synthetic) return generate_synthetic(*config.synthetic);
  return load_cohort(config.cohort_file, resolve_attribute(config));
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  // Only result-determining keys participate: where outputs live and how
  // many workers run do not change what gets computed.
  nlohmann::json doc = config.to_json();
  doc.erase("output_dir");
  doc.erase("parallelism");
  const std::string text = doc.dump();
  std::uint64_t hash = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

namespace {

std::string cell_dir_name(int fold, int lambda_index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "fold%02d_lambda%02d", fold, lambda_index);
  return buf;
}

std::vector<int> folds_to_process(const ExperimentConfig& config) {
  if (!config.folds_to_run.empty()) {
    auto folds = config.folds_to_run;
    std::sort(folds.begin(), folds.end());
    folds.erase(std::unique(folds.begin(), folds.end()), folds.end());
    return folds;
  }
  std::vector<int> folds(config.split.folds);
  for (int f = 0; f < config.split.folds; ++f) folds[f] = f;
  return folds;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << content;
  if (!out) throw DataError("write failed for '" + path + "'");
}

// Metric rows for aggregation and CSV reload share this fixed ordering.
const std::vector<std::string>& group_metric_names() {
  static const std::vector<std::string> names = {
      "auroc",    "average_precision", "ce_loss", "ace",     "ace_signed",
      "rce",      "rce_signed",        "xauc_pos", "xauc_neg", "emd_dp",
      "emd_y1",   "emd_y0",            "mean_dp", "mean_y1", "mean_y0"};
  return names;
}

const std::vector<std::string>& aggregate_metric_names() {
  static const std::vector<std::string> names = {
      "agg_emd_dp",  "agg_emd_eqopp",  "agg_emd_eqodds",
      "agg_mean_dp", "agg_mean_eqopp", "agg_mean_eqodds"};
  return names;
}

std::vector<std::optional<double>> group_metric_values(const GroupMetrics& g) {
  return {g.auroc,    g.average_precision, g.ce_loss, g.ace,      g.ace_signed,
          g.rce,      g.rce_signed,        g.xauc_pos, g.xauc_neg, g.emd_dp,
          g.emd_y1,   g.emd_y0,            g.mean_dp, g.mean_y1,  g.mean_y0};
}

std::vector<std::optional<double>> aggregate_metric_values(const FairnessReport& r) {
  return {r.emd_dp_total,  r.emd_eqopp_total,  r.emd_eqodds_total,
          r.mean_dp_total, r.mean_eqopp_total, r.mean_eqodds_total};
}

struct Accumulator {
  AggregateRow row;
  std::vector<double> values;
};

class AggregationBuilder {
 public:
  void add(int lambda_index, double lambda, const std::string& group,
           const std::string& metric, const std::optional<double>& value) {
    const std::string key = std::to_string(lambda_index) + "|" + group + "|" + metric;
    auto it = index_.find(key);
    if (it == index_.end()) {
      Accumulator acc;
      acc.row.lambda_index = lambda_index;
      acc.row.lambda = lambda;
      acc.row.group = group;
      acc.row.metric = metric;
      index_.emplace(key, accumulators_.size());
      accumulators_.push_back(std::move(acc));
      it = index_.find(key);
    }
    if (value) accumulators_[it->second].values.push_back(*value);
  }

  std::vector<AggregateRow> finish() {
    std::vector<AggregateRow> rows;
    rows.reserve(accumulators_.size());
    for (auto& acc : accumulators_) {
      AggregateRow row = acc.row;
      row.count = static_cast<int>(acc.values.size());
      if (!acc.values.empty()) {
        double mean = 0.0;
        for (double v : acc.values) mean += v;
        mean /= static_cast<double>(acc.values.size());
        row.mean = mean;
        if (acc.values.size() >= 2) {
          double ss = 0.0;
          for (double v : acc.values) ss += (v - mean) * (v - mean);
          row.sd = std::sqrt(ss / static_cast<double>(acc.values.size() - 1));
        }
      }
      rows.push_back(std::move(row));
    }
    return rows;
  }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Accumulator> accumulators_;
};

}  // namespace

std::vector<AggregateRow> aggregate_cells(const std::vector<SweepCell>& cells) {
  AggregationBuilder builder;
  for (const auto& cell : cells) {
    if (!cell.ok) continue;
    const FairnessReport& r = cell.report;
    for (const auto& g : r.groups) {
      const auto values = group_metric_values(g);
      for (std::size_t m = 0; m < values.size(); ++m) {
        builder.add(cell.lambda_index, cell.lambda, g.group,
                    group_metric_names()[m], values[m]);
      }
    }
    const auto overall = group_metric_values(r.overall);
    for (std::size_t m = 0; m < overall.size(); ++m) {
      builder.add(cell.lambda_index, cell.lambda, "__overall__",
                  group_metric_names()[m], overall[m]);
    }
    const auto agg = aggregate_metric_values(r);
    for (std::size_t m = 0; m < agg.size(); ++m) {
      builder.add(cell.lambda_index, cell.lambda, "__overall__",
                  aggregate_metric_names()[m], agg[m]);
    }
  }
  return builder.finish();
}

namespace {

SweepResult collect_sweep(const ExperimentConfig& config, bool train_missing) {
  config.validate();
  const fs::path outdir(config.output_dir);
  fs::create_directories(outdir / "cells");

  SweepResult result;
  result.config = config;
  result.attribute = resolve_attribute(config);
  result.lambdas.push_back(0.0);
  const auto grid = lambda_grid(config.lambda.count, config.lambda.min,
                                config.lambda.max);
  result.lambdas.insert(result.lambdas.end(), grid.begin(), grid.end());

  // Manifest guards against resuming into a directory built from a
  // different configuration.
  const std::uint64_t hash = config_hash(config);
  const fs::path manifest_path = outdir / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    nlohmann::json manifest;
    in >> manifest;
    if (manifest.value("config_hash", std::uint64_t{0}) != hash) {
      throw ConfigError("output dir '" + config.output_dir +
                        "' was produced by a different config");
    }
  } else {
    nlohmann::json manifest = {{"format", "fairsweep-manifest"},
                               {"version", 1},
                               {"config_hash", hash},
                               {"split_seed", config.split.seed},
                               {"train_seed", config.train_seed},
                               {"library_version", kVersion},
                               {"lambdas", result.lambdas}};
    write_text_file(manifest_path.string(), manifest.dump(2) + "\n");
  }
  write_text_file((outdir / "config.json").string(),
                  config.to_json().dump(2) + "\n");

  const Cohort cohort = materialize_cohort(config);
  const SplitPlan split = make_split(cohort, config.split.test_fraction,
                                     config.split.folds, config.split.seed);
  write_split(split, (outdir / "split.json").string());

  const auto folds = folds_to_process(config);
  for (int fold : folds) {
    for (int li = 0; li < static_cast<int>(result.lambdas.size()); ++li) {
      SweepCell cell;
      cell.fold = fold;
      cell.lambda_index = li;
      cell.lambda = result.lambdas[li];
      cell.seed = Rng::derive(config.train_seed, static_cast<std::uint64_t>(fold),
                              static_cast<std::uint64_t>(li));
      result.cells.push_back(cell);
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= result.cells.size()) break;
      SweepCell& cell = result.cells[i];
      const fs::path cell_dir = outdir / "cells" / cell_dir_name(cell.fold, cell.lambda_index);
      const fs::path report_path = cell_dir / "report.json";
      try {
        if (fs::exists(report_path)) {
          std::ifstream in(report_path);
          nlohmann::json doc;
          in >> doc;
          cell.report = report_from_json(doc);
          if (cell.report.meta.fold != cell.fold ||
              cell.report.meta.lambda_index != cell.lambda_index) {
            throw DataError("cell report does not match its directory");
          }
          cell.ok = true;
          cell.resumed = true;
          continue;
        }
        if (!train_missing) {
          cell.error = "missing cell output";
          continue;
        }
        PenaltyConfig penalty = config.penalty;
        penalty.lambda = cell.lambda;
        const TrainResult trained =
            train(cohort, split, cell.fold, config.hp, penalty, cell.seed);

        const FoldPartition part = resolve_partition(cohort, split, cell.fold);
        const BatchView test = make_batch(cohort, part.test);
        const std::vector<double> predictions = predict(trained.params, test);

        ReportMetadata meta;
        meta.criterion = to_string(penalty.criterion);
        meta.distance = to_string(penalty.distance);
        meta.bandwidth = penalty.bandwidth.describe();
        meta.lambda = cell.lambda;
        meta.lambda_index = cell.lambda_index;
        meta.fold = cell.fold;
        meta.seed = cell.seed;
        cell.report = evaluate(predictions, test.outcomes, test.groups,
                               result.attribute, meta);

        fs::create_directories(cell_dir);
        save_checkpoint(trained, (cell_dir / "checkpoint.json").string());
        write_text_file(report_path.string(),
                        report_to_json(cell.report).dump(2) + "\n");
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
      }
    }
  };

  const int threads = std::min<int>(config.parallelism,
                                    static_cast<int>(result.cells.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& cell : result.cells) {
    if (!cell.ok) {
      ++result.cells_failed;
    } else if (cell.resumed) {
      ++result.cells_resumed;
    } else {
      ++result.cells_trained;
    }
  }
  result.aggregates = aggregate_cells(result.cells);
  emit_report(result, "csv", config.output_dir);
  emit_report(result, "json", config.output_dir);
  return result;
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& config) {
  return collect_sweep(config, true);
}

SweepResult load_sweep_dir(const std::string& dir) {
  const fs::path config_path = fs::path(dir) / "config.json";
  ExperimentConfig config = load_experiment_config(config_path.string());
  if (config.output_dir != dir) config.output_dir = dir;
  return collect_sweep(config, false);
}

void emit_report(const SweepResult& result, const std::string& format,
                 const std::string& dir) {
  fs::create_directories(dir);
  if (format == "csv") {
    std::string csv = report_csv_header() + "\n";
    for (const auto& cell : result.cells) {
      if (cell.ok) append_report_csv(cell.report, csv);
    }
    write_text_file((fs::path(dir) / "report.csv").string(), csv);

    std::string agg =
        "criterion,distance,bandwidth,lambda,lambda_index,attribute,group,"
        "metric,mean,sd,n\n";
    const std::string prefix = to_string(result.config.penalty.criterion) + "," +
                               to_string(result.config.penalty.distance) + "," +
                               result.config.penalty.bandwidth.describe() + ",";
    for (const auto& row : result.aggregates) {
      agg += prefix + format_double(row.lambda) + "," +
             std::to_string(row.lambda_index) + "," + result.attribute.name +
             "," + row.group + "," + row.metric + "," +
             (row.mean ? format_double(*row.mean) : "NA") + "," +
             (row.sd ? format_double(*row.sd) : "NA") + "," +
             std::to_string(row.count) + "\n";
    }
    write_text_file((fs::path(dir) / "aggregate.csv").string(), agg);
  } else if (format == "json") {
    nlohmann::json doc;
    doc["format"] = "fairsweep-sweep";
    doc["version"] = 1;
    doc["lambdas"] = result.lambdas;
    doc["cells_trained"] = result.cells_trained;
    doc["cells_resumed"] = result.cells_resumed;
    doc["cells_failed"] = result.cells_failed;
    auto& cells = doc["cells"] = nlohmann::json::array();
    for (const auto& cell : result.cells) {
      nlohmann::json c = {{"fold", cell.fold},
                          {"lambda_index", cell.lambda_index},
                          {"lambda", cell.lambda},
                          {"seed", cell.seed},
                          {"ok", cell.ok},
                          {"resumed", cell.resumed}};
      if (cell.ok) {
        c["report"] = report_to_json(cell.report);
      } else {
        c["error"] = cell.error;
      }
      cells.push_back(std::move(c));
    }
    auto& agg = doc["aggregates"] = nlohmann::json::array();
    for (const auto& row : result.aggregates) {
      agg.push_back({{"lambda_index", row.lambda_index},
                     {"lambda", row.lambda},
                     {"group", row.group},
                     {"metric", row.metric},
                     {"mean", row.mean ? nlohmann::json(*row.mean) : nlohmann::json()},
                     {"sd", row.sd ? nlohmann::json(*row.sd) : nlohmann::json()},
                     {"n", row.count}});
    }
    write_text_file((fs::path(dir) / "report.json").string(), doc.dump(2) + "\n");
  } else {
    throw ConfigError("emit_report: format must be 'csv' or 'json'");
  }
}

std::vector<CsvReportRow> read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report csv '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("report csv '" + path + "' is empty");
  if (line != report_csv_header()) {
    throw DataError("report csv '" + path + "' has an unexpected header");
  }
  std::vector<std::string> columns;
  {
    std::stringstream header(line);
    std::string col;
    while (std::getline(header, col, ',')) columns.push_back(col);
  }

  std::vector<CsvReportRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != columns.size()) {
      throw DataError("report csv line " + std::to_string(line_no) +
                      ": wrong field count");
    }
    CsvReportRow row;
    row.lambda = std::stod(fields[3]);
    row.lambda_index = std::stoi(fields[4]);
    row.fold = std::stoi(fields[5]);
    row.group = fields[8];
    for (std::size_t c = 10; c < fields.size(); ++c) {
      std::optional<double> value;
      if (fields[c] != "NA") value = std::stod(fields[c]);
      row.metrics.emplace_back(columns[c], value);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<AggregateRow> aggregate_csv_rows(const std::vector<CsvReportRow>& rows) {
  AggregationBuilder builder;
  for (const auto& row : rows) {
    const bool overall = row.group == "__overall__";
    for (const auto& [metric, value] : row.metrics) {
      const bool aggregate_metric = metric.rfind("agg_", 0) == 0;
      if (aggregate_metric && !overall) continue;  // NA padding on group rows
      builder.add(row.lambda_index, row.lambda, row.group, metric, value);
    }
  }
  return builder.finish();
}

std::vector<std::pair<Hyperparameters, double>> tune_hyperparameters(
    const ExperimentConfig& config, int count, std::uint64_t search_seed) {
  config.validate();
  const Cohort cohort = materialize_cohort(config);
  const SplitPlan split = make_split(cohort, config.split.test_fraction,
                                     config.split.folds, config.split.seed);
  const auto folds = folds_to_process(config);
  auto candidates = Hyperparameters::random_search(count, search_seed);

  PenaltyConfig unpenalized;
  unpenalized.criterion = config.penalty.criterion;
  unpenalized.distance = config.penalty.distance;
  unpenalized.lambda = 0.0;

  std::vector<std::pair<Hyperparameters, double>> ranked;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    Hyperparameters hp = candidates[c];
    hp.max_iterations = config.hp.max_iterations;
    hp.batches_per_iteration = config.hp.batches_per_iteration;
    hp.patience = config.hp.patience;
    double total = 0.0;
    for (int fold : folds) {
      const std::uint64_t seed = Rng::derive(config.train_seed, fold, 1000 + c);
      const TrainResult trained = train(cohort, split, fold, hp, unpenalized, seed);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& entry : trained.log) {
        best = std::min(best, entry.val_cross_entropy);
      }
      total += best;
    }
    ranked.emplace_back(hp, total / static_cast<double>(folds.size()));
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  return ranked;
}

}  // namespace fairsweep
