#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairsweep/errors.hpp"
#include "fairsweep/experiment.hpp"
#include "fairsweep/version.hpp"

namespace fs = std::filesystem;
using namespace fairsweep;

namespace {

nlohmann::json load_raw_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return doc;
}

void write_report_files(const FairnessReport& report, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream json_out(fs::path(dir) / "report.json");
  json_out << report_to_json(report).dump(2) << "\n";
  std::string csv = report_csv_header() + "\n";
  append_report_csv(report, csv);
  std::ofstream csv_out(fs::path(dir) / "report.csv");
  csv_out << csv;
}

int cmd_generate(const std::string& config_path, const std::string& out_path) {
  const ExperimentConfig config = load_experiment_config(config_path);
  if (!config.synthetic) {
    throw ConfigError("generate: config has no synthetic cohort section");
  }
  const Cohort cohort = generate_synthetic(*config.synthetic);
  write_cohort(cohort, out_path);
  std::cout << "wrote " << cohort.size() << " records to " << out_path << "\n";
  return 0;
}

int cmd_split(const std::string& config_path, const std::string& out_path) {
  const ExperimentConfig config = load_experiment_config(config_path);
  const Cohort cohort = materialize_cohort(config);
  const SplitPlan plan = make_split(cohort, config.split.test_fraction,
                                    config.split.folds, config.split.seed);
  write_split(plan, out_path);
  std::cout << "wrote split (" << plan.test_ids.size() << " test ids, "
            << plan.folds.size() << " folds) to " << out_path << "\n";
  return 0;
}

int cmd_extract(const std::string& config_path, const std::string& timelines_path,
                const std::string& out_path, const std::string& vocab_out,
                const std::string& split_in, const std::string& split_out) {
  const nlohmann::json raw = load_raw_config(config_path);
  const ExperimentConfig config = ExperimentConfig::from_json(raw);
  if (!config.attribute) throw ConfigError("extract: config needs an attribute section");
  const GroupAttribute& attribute = *config.attribute;

  IntervalSpec intervals = IntervalSpec::standard_days_prior();
  int min_numeric = 5;
  if (raw.contains("features")) {
    const auto& f = raw.at("features");
    if (f.contains("intervals")) intervals = interval_spec_from_json(f.at("intervals"));
    min_numeric = f.value("min_numeric_for_quintiles", 5);
  }

  const TimelineFile timelines = load_timelines(timelines_path);

  // Split over record ids (a featureless cohort has the same ids and order,
  // so the plan matches the one for the final feature cohort).
  std::vector<CohortRecord> bare;
  for (const auto& t : timelines.timelines) {
    CohortRecord rec;
    rec.id = t.record_id;
    const auto group = attribute.index_of(t.group_label);
    if (!group) {
      throw DataError("record '" + t.record_id + "': unknown group label '" +
                      t.group_label + "'");
    }
    rec.group = *group;
    rec.outcome = t.outcome;
    bare.push_back(std::move(rec));
  }
  const Cohort bare_cohort(attribute, 0, std::move(bare));
  SplitPlan plan;
  if (!split_in.empty()) {
    plan = load_split(split_in);
  } else {
    plan = make_split(bare_cohort, config.split.test_fraction, config.split.folds,
                      config.split.seed);
  }
  if (!split_out.empty()) write_split(plan, split_out);

  // Vocabulary from non-test timelines only.
  std::set<std::string> test_ids(plan.test_ids.begin(), plan.test_ids.end());
  std::vector<Timeline> training;
  for (const auto& t : timelines.timelines) {
    if (test_ids.count(t.record_id) == 0) training.push_back(t);
  }
  const FeatureVocabulary vocab = build_vocabulary(training, intervals, min_numeric);
  if (!vocab_out.empty()) vocab.save(vocab_out);

  const Cohort cohort = timelines_to_cohort(timelines, attribute, vocab);
  write_cohort(cohort, out_path);
  std::cout << "extracted " << vocab.size() << " features for " << cohort.size()
            << " records to " << out_path << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, int fold, double lambda,
              const std::string& out_dir) {
  const ExperimentConfig config = load_experiment_config(config_path);
  config.validate();
  const Cohort cohort = materialize_cohort(config);
  const SplitPlan split = make_split(cohort, config.split.test_fraction,
                                     config.split.folds, config.split.seed);
  PenaltyConfig penalty = config.penalty;
  penalty.lambda = lambda;
  const std::uint64_t seed = Rng::derive(config.train_seed, fold, 0);
  const TrainResult trained = train(cohort, split, fold, config.hp, penalty, seed);

  const FoldPartition part = resolve_partition(cohort, split, fold);
  const BatchView test = make_batch(cohort, part.test);
  const std::vector<double> predictions = predict(trained.params, test);
  ReportMetadata meta;
  meta.criterion = to_string(penalty.criterion);
  meta.distance = to_string(penalty.distance);
  meta.bandwidth = penalty.bandwidth.describe();
  meta.lambda = lambda;
  meta.fold = fold;
  meta.seed = seed;
  const FairnessReport report =
      evaluate(predictions, test.outcomes, test.groups, resolve_attribute(config), meta);

  fs::create_directories(out_dir);
  save_checkpoint(trained, (fs::path(out_dir) / "checkpoint.json").string());
  write_report_files(report, out_dir);
  std::cout << "trained fold " << fold << " lambda " << lambda << " ("
            << trained.log.size() << " iterations, best "
            << trained.best_iteration << ") -> " << out_dir << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_override) {
  ExperimentConfig config = load_experiment_config(config_path);
  if (!out_override.empty()) config.output_dir = out_override;
  const SweepResult result = run_sweep(config);
  for (const auto& cell : result.cells) {
    std::cout << "fold " << cell.fold << " lambda " << cell.lambda << ": "
              << (cell.ok ? (cell.resumed ? "resumed" : "trained") : "FAILED")
              << (cell.error.empty() ? "" : " (" + cell.error + ")") << "\n";
  }
  std::cout << "sweep: " << result.cells_trained << " trained, "
            << result.cells_resumed << " resumed, " << result.cells_failed
            << " failed; outputs in " << config.output_dir << "\n";
  return result.cells_failed > 0 ? 3 : 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& checkpoint_path,
                 int fold, const std::string& out_dir) {
  const ExperimentConfig config = load_experiment_config(config_path);
  const Cohort cohort = materialize_cohort(config);
  const SplitPlan split = make_split(cohort, config.split.test_fraction,
                                     config.split.folds, config.split.seed);
  const TrainResult checkpoint = load_checkpoint(checkpoint_path);
  const FoldPartition part = resolve_partition(cohort, split, fold);
  const BatchView test = make_batch(cohort, part.test);
  const std::vector<double> predictions = predict(checkpoint.params, test);
  ReportMetadata meta;
  meta.criterion = to_string(checkpoint.penalty.criterion);
  meta.distance = to_string(checkpoint.penalty.distance);
  meta.bandwidth = checkpoint.penalty.bandwidth.describe();
  meta.lambda = checkpoint.penalty.lambda;
  meta.fold = fold;
  meta.seed = checkpoint.seed;
  const FairnessReport report =
      evaluate(predictions, test.outcomes, test.groups, resolve_attribute(config), meta);
  write_report_files(report, out_dir);
  std::cout << "evaluated " << checkpoint_path << " on " << test.size()
            << " test records -> " << out_dir << "\n";
  return 0;
}

int cmd_report(const std::string& sweep_dir, const std::string& format,
               const std::string& out_dir) {
  const SweepResult result = load_sweep_dir(sweep_dir);
  emit_report(result, format, out_dir.empty() ? sweep_dir : out_dir);
  std::cout << "emitted " << format << " report for " << result.cells.size()
            << " cells\n";
  return result.cells_failed > 0 ? 3 : 0;
}

int cmd_tune(const std::string& config_path, int count, std::uint64_t seed,
             const std::string& out_path) {
  const ExperimentConfig config = load_experiment_config(config_path);
  const auto ranked = tune_hyperparameters(config, count, seed);
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& [hp, val_ce] : ranked) {
    doc.push_back({{"batch_size", hp.batch_size},
                   {"dropout_prob", hp.dropout_prob},
                   {"hidden_dim", hp.hidden_dim},
                   {"learning_rate", hp.learning_rate},
                   {"num_hidden_layers", hp.num_hidden_layers},
                   {"mean_val_cross_entropy", val_ce}});
  }
  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write '" + out_path + "'");
  out << doc.dump(2) << "\n";
  std::cout << "ranked " << ranked.size() << " configurations -> " << out_path
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairness-penalized risk model training and evaluation"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path, out_path, timelines_path, vocab_out, split_in, split_out;
  std::string checkpoint_path, sweep_dir, format = "csv";
  int fold = 0;
  double lambda = 0.0;
  int tune_count = 50;
  std::uint64_t tune_seed = 0;

  auto* generate = app.add_subcommand("generate", "write a synthetic cohort file");
  generate->add_option("--config", config_path)->required();
  generate->add_option("--out", out_path)->required();

  auto* split_cmd = app.add_subcommand("split", "write a test/fold split plan");
  split_cmd->add_option("--config", config_path)->required();
  split_cmd->add_option("--out", out_path)->required();

  auto* extract = app.add_subcommand("extract", "timelines -> cohort features");
  extract->add_option("--config", config_path)->required();
  extract->add_option("--timelines", timelines_path)->required();
  extract->add_option("--out", out_path)->required();
  extract->add_option("--vocab-out", vocab_out);
  extract->add_option("--split", split_in, "reuse an existing split plan");
  extract->add_option("--split-out", split_out);

  auto* train_cmd = app.add_subcommand("train", "train a single (fold, lambda) cell");
  train_cmd->add_option("--config", config_path)->required();
  train_cmd->add_option("--fold", fold)->required();
  train_cmd->add_option("--lambda", lambda)->required();
  train_cmd->add_option("--out", out_path)->required();

  auto* sweep = app.add_subcommand("sweep", "run the full lambda sweep");
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--out", out_path, "override output_dir");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on the test set");
  evaluate_cmd->add_option("--config", config_path)->required();
  evaluate_cmd->add_option("--checkpoint", checkpoint_path)->required();
  evaluate_cmd->add_option("--fold", fold);
  evaluate_cmd->add_option("--out", out_path)->required();

  auto* report = app.add_subcommand("report", "re-emit reports from a sweep directory");
  report->add_option("--sweep-dir", sweep_dir)->required();
  report->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));
  report->add_option("--out", out_path);

  auto* tune = app.add_subcommand("tune", "random hyperparameter search");
  tune->add_option("--config", config_path)->required();
  tune->add_option("--count", tune_count);
  tune->add_option("--seed", tune_seed);
  tune->add_option("--out", out_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(config_path, out_path);
    if (split_cmd->parsed()) return cmd_split(config_path, out_path);
    if (extract->parsed()) {
      return cmd_extract(config_path, timelines_path, out_path, vocab_out,
                         split_in, split_out);
    }
    if (train_cmd->parsed()) return cmd_train(config_path, fold, lambda, out_path);
    if (sweep->parsed()) return cmd_sweep(config_path, out_path);
    if (evaluate_cmd->parsed()) {
      return cmd_evaluate(config_path, checkpoint_path, fold, out_path);
    }
    if (report->parsed()) return cmd_report(sweep_dir, format, out_path);
    if (tune->parsed()) return cmd_tune(config_path, tune_count, tune_seed, out_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
