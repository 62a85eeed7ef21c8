#include "fairsweep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "fairsweep/errors.hpp"
#include "fairsweep/lbfgs.hpp"

namespace fairsweep {

namespace {

constexpr double kProbClamp = 1e-15;

double clamp_prob(double f) {
  return std::min(1.0 - kProbClamp, std::max(kProbClamp, f));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Midrank-based pairwise ranking probability with ties counted 1/2:
// P(pos > neg) + P(pos == neg)/2. Equals the O(n^2) pairwise count exactly.
std::optional<double> ranking_probability(std::span<const double> scores,
                                          std::span<const int> is_positive) {
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int p : is_positive) n_pos += static_cast<std::size_t>(p != 0);
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t t = i; t < j; ++t) {
      if (is_positive[order[t]] != 0) pos_rank_sum += midrank;
    }
    i = j;
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) *
                                      static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct NegLogLik {
  std::span<const double> log_f;
  std::span<const int> y;

  double operator()(std::span<const double> params, std::span<double> grad) const {
    const double w = params[0];
    const double b = params[1];
    double nll = 0.0, gw = 0.0, gb = 0.0;
    for (std::size_t i = 0; i < log_f.size(); ++i) {
      const double z = w * log_f[i] + b;
      // log(1 + exp(z)) - y z, stably
      nll += (z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) -
             static_cast<double>(y[i]) * z;
      const double resid = sigmoid(z) - static_cast<double>(y[i]);
      gw += resid * log_f[i];
      gb += resid;
    }
    const double inv_n = 1.0 / static_cast<double>(log_f.size());
    grad[0] = gw * inv_n;
    grad[1] = gb * inv_n;
    return nll * inv_n;
  }
};

std::vector<double> to_log_clamped(std::span<const double> predictions) {
  std::vector<double> out(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    out[i] = std::log(clamp_prob(predictions[i]));
  }
  return out;
}

}  // namespace

double Calibrator::predict(double f) const {
  return sigmoid(slope * std::log(clamp_prob(f)) + intercept);
}

Calibrator fit_calibrator(std::span<const double> predictions,
                          std::span<const int> outcomes) {
  if (predictions.size() != outcomes.size() || predictions.empty()) {
    throw ConfigError("fit_calibrator: misaligned or empty inputs");
  }
  std::size_t positives = 0;
  for (int y : outcomes) positives += static_cast<std::size_t>(y != 0);
  if (positives == 0 || positives == outcomes.size()) {
    throw DataError("fit_calibrator: outcomes are single-class");
  }

  const std::vector<double> log_f = to_log_clamped(predictions);
  const auto [lo, hi] = std::minmax_element(log_f.begin(), log_f.end());
  Calibrator calib;
  if (*hi - *lo < 1e-12) {
    // Constant predictions: slope unidentifiable, intercept matches the rate.
    const double rate =
        static_cast<double>(positives) / static_cast<double>(outcomes.size());
    calib.slope = 0.0;
    calib.intercept = std::log(rate / (1.0 - rate));
    calib.converged = true;
    return calib;
  }

  NegLogLik nll{log_f, outcomes};
  LbfgsOptions options;
  options.max_iterations = 500;
  options.gradient_tolerance = 1e-8;
  const LbfgsResult result = lbfgs_minimize(
      [&nll](std::span<const double> x, std::span<double> g) { return nll(x, g); },
      {0.0, 0.0}, options);
  calib.slope = result.x[0];
  calib.intercept = result.x[1];
  calib.iterations = result.iterations;
  calib.gradient_norm = result.gradient_norm;
  calib.converged = result.converged;
  return calib;
}

std::optional<double> auroc(std::span<const double> scores,
                            std::span<const int> outcomes) {
  if (scores.size() != outcomes.size()) throw ConfigError("auroc: misaligned inputs");
  return ranking_probability(scores, outcomes);
}

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const int> outcomes) {
  if (scores.size() != outcomes.size()) {
    throw ConfigError("average_precision: misaligned inputs");
  }
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int y : outcomes) n_pos += static_cast<std::size_t>(y != 0);
  if (n_pos == 0) return std::nullopt;

  // Descending score; ties broken by original position (stable).
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  double ap = 0.0;
  std::size_t true_positives = 0;
  for (std::size_t rank = 1; rank <= n; ++rank) {
    if (outcomes[order[rank - 1]] != 0) {
      ++true_positives;
      ap += static_cast<double>(true_positives) / static_cast<double>(rank);
    }
  }
  return ap / static_cast<double>(n_pos);
}

double cross_entropy(std::span<const double> predictions,
                     std::span<const int> outcomes) {
  if (predictions.size() != outcomes.size() || predictions.empty()) {
    throw ConfigError("cross_entropy: misaligned or empty inputs");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double f = clamp_prob(predictions[i]);
    total -= outcomes[i] != 0 ? std::log(f) : std::log1p(-f);
  }
  return total / static_cast<double>(predictions.size());
}

double emd_1d(std::span<const double> sample_a, std::span<const double> sample_b) {
  if (sample_a.empty() || sample_b.empty()) {
    throw DataError("emd_1d: samples must be nonempty");
  }
  std::vector<double> a(sample_a.begin(), sample_a.end());
  std::vector<double> b(sample_b.begin(), sample_b.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());

  const double inv_m = 1.0 / static_cast<double>(a.size());
  const double inv_n = 1.0 / static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double prev = 0.0, distance = 0.0;
  bool started = false;
  while (i < a.size() || j < b.size()) {
    double current;
    if (i < a.size() && j < b.size()) {
      current = std::min(a[i], b[j]);
    } else if (i < a.size()) {
      current = a[i];
    } else {
      current = b[j];
    }
    if (started) {
      const double cdf_gap = std::abs(static_cast<double>(i) * inv_m -
                                      static_cast<double>(j) * inv_n);
      distance += cdf_gap * (current - prev);
    }
    while (i < a.size() && a[i] == current) ++i;
    while (j < b.size() && b[j] == current) ++j;
    prev = current;
    started = true;
  }
  return distance;
}

ParityDecomposition parity_decomposition(std::span<const double> predictions,
                                         std::span<const int> outcomes,
                                         std::span<const int> groups,
                                         int group_count, Stratum stratum,
                                         ParityForm form) {
  if (predictions.size() != outcomes.size() || predictions.size() != groups.size()) {
    throw ConfigError("parity_decomposition: misaligned inputs");
  }
  std::vector<double> marginal;
  std::vector<std::vector<double>> cells(group_count);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool in_stratum = stratum == Stratum::all ||
                            (stratum == Stratum::positive && outcomes[i] == 1) ||
                            (stratum == Stratum::negative && outcomes[i] == 0);
    if (!in_stratum) continue;
    marginal.push_back(predictions[i]);
    cells[groups[i]].push_back(predictions[i]);
  }

  ParityDecomposition out;
  out.group_values.assign(group_count, std::nullopt);
  if (marginal.empty()) return out;  // whole stratum empty -> all undefined

  const double marginal_mean =
      std::accumulate(marginal.begin(), marginal.end(), 0.0) /
      static_cast<double>(marginal.size());
  double aggregate = 0.0;
  bool any = false;
  for (int k = 0; k < group_count; ++k) {
    if (cells[k].empty()) continue;
    any = true;
    double value;
    if (form == ParityForm::mean) {
      const double cell_mean =
          std::accumulate(cells[k].begin(), cells[k].end(), 0.0) /
          static_cast<double>(cells[k].size());
      value = cell_mean - marginal_mean;  // signed
      aggregate += value * value;
    } else {
      value = emd_1d(cells[k], marginal);
      aggregate += value;
    }
    out.group_values[k] = value;
  }
  if (any) out.aggregate = aggregate;
  return out;
}

namespace {

// Shared by ace()/rce()/evaluate(): calibration gaps given fitted models.
double calibration_gap_mean(std::span<const double> predictions,
                            const Calibrator& calib, bool signed_form) {
  double total = 0.0;
  for (double f : predictions) {
    const double gap = calib.predict(f) - clamp_prob(f);
    total += signed_form ? gap : gap * gap;
  }
  return total / static_cast<double>(predictions.size());
}

double relative_gap_mean(std::span<const double> predictions,
                         const Calibrator& group_calib,
                         const Calibrator& marginal_calib, bool signed_form) {
  double total = 0.0;
  for (double f : predictions) {
    const double gap = group_calib.predict(f) - marginal_calib.predict(f);
    total += signed_form ? gap : gap * gap;
  }
  return total / static_cast<double>(predictions.size());
}

}  // namespace

double ace(std::span<const double> predictions, std::span<const int> outcomes,
           bool signed_form) {
  const Calibrator calib = fit_calibrator(predictions, outcomes);
  return calibration_gap_mean(predictions, calib, signed_form);
}

std::optional<double> rce(std::span<const double> predictions,
                          std::span<const int> outcomes,
                          std::span<const int> groups, int group,
                          bool signed_form) {
  std::vector<double> group_f;
  std::vector<int> group_y;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (groups[i] == group) {
      group_f.push_back(predictions[i]);
      group_y.push_back(outcomes[i]);
    }
  }
  if (group_f.empty()) return std::nullopt;
  try {
    const Calibrator marginal = fit_calibrator(predictions, outcomes);
    const Calibrator in_group = fit_calibrator(group_f, group_y);
    return relative_gap_mean(group_f, in_group, marginal, signed_form);
  } catch (const DataError&) {
    return std::nullopt;  // a class is missing somewhere
  }
}

std::optional<double> xauc(std::span<const double> scores,
                           std::span<const int> outcomes,
                           std::span<const int> groups, int group,
                           bool positive_direction) {
  std::vector<double> selected;
  std::vector<int> labels;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool in_group = groups[i] == group;
    if (positive_direction) {
      // group-k positives vs other-group negatives
      if (in_group && outcomes[i] == 1) {
        selected.push_back(scores[i]);
        labels.push_back(1);
      } else if (!in_group && outcomes[i] == 0) {
        selected.push_back(scores[i]);
        labels.push_back(0);
      }
    } else {
      // other-group positives vs group-k negatives
      if (!in_group && outcomes[i] == 1) {
        selected.push_back(scores[i]);
        labels.push_back(1);
      } else if (in_group && outcomes[i] == 0) {
        selected.push_back(scores[i]);
        labels.push_back(0);
      }
    }
  }
  return ranking_probability(selected, labels);
}

FairnessReport evaluate(std::span<const double> predictions,
                        std::span<const int> outcomes,
                        std::span<const int> groups,
                        const GroupAttribute& attribute,
                        const ReportMetadata& meta) {
  if (predictions.size() != outcomes.size() || predictions.size() != groups.size()) {
    throw ConfigError("evaluate: misaligned inputs");
  }
  if (predictions.empty()) throw ConfigError("evaluate: empty inputs");
  attribute.validate();
  const int k = attribute.group_count();
  for (int g : groups) {
    if (g < 0 || g >= k) throw DataError("evaluate: group index out of range");
  }

  FairnessReport report;
  report.meta = meta;
  report.attribute = attribute.name;

  // Parity decompositions, both forms, all three strata.
  struct Decomp {
    ParityDecomposition emd, mean;
  };
  auto decompose = [&](Stratum s) {
    return Decomp{parity_decomposition(predictions, outcomes, groups, k, s,
                                       ParityForm::emd),
                  parity_decomposition(predictions, outcomes, groups, k, s,
                                       ParityForm::mean)};
  };
  const Decomp d_all = decompose(Stratum::all);
  const Decomp d_pos = decompose(Stratum::positive);
  const Decomp d_neg = decompose(Stratum::negative);

  report.emd_dp_total = d_all.emd.aggregate;
  report.emd_eqopp_total = d_pos.emd.aggregate;
  if (d_pos.emd.aggregate && d_neg.emd.aggregate) {
    report.emd_eqodds_total = *d_pos.emd.aggregate + *d_neg.emd.aggregate;
  }
  report.mean_dp_total = d_all.mean.aggregate;
  report.mean_eqopp_total = d_pos.mean.aggregate;
  if (d_pos.mean.aggregate && d_neg.mean.aggregate) {
    report.mean_eqodds_total = *d_pos.mean.aggregate + *d_neg.mean.aggregate;
  }

  // Marginal calibrator shared by every group's RCE.
  std::optional<Calibrator> marginal_calib;
  try {
    marginal_calib = fit_calibrator(predictions, outcomes);
  } catch (const DataError&) {
    marginal_calib = std::nullopt;
  }

  report.groups.resize(k);
  for (int g = 0; g < k; ++g) {
    GroupMetrics& gm = report.groups[g];
    gm.group = attribute.group_names[g];
    std::vector<double> f;
    std::vector<int> y;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      if (groups[i] == g) {
        f.push_back(predictions[i]);
        y.push_back(outcomes[i]);
      }
    }
    gm.count = f.size();
    if (!f.empty()) {
      gm.auroc = auroc(f, y);
      gm.average_precision = average_precision(f, y);
      gm.ce_loss = cross_entropy(f, y);
      try {
        const Calibrator calib = fit_calibrator(f, y);
        gm.ace = calibration_gap_mean(f, calib, false);
        gm.ace_signed = calibration_gap_mean(f, calib, true);
        if (marginal_calib) {
          gm.rce = relative_gap_mean(f, calib, *marginal_calib, false);
          gm.rce_signed = relative_gap_mean(f, calib, *marginal_calib, true);
        }
      } catch (const DataError&) {
        // single-class group: calibration metrics stay undefined
      }
    }
    if (k > 1) {
      gm.xauc_pos = xauc(predictions, outcomes, groups, g, true);
      gm.xauc_neg = xauc(predictions, outcomes, groups, g, false);
    }
    gm.emd_dp = d_all.emd.group_values[g];
    gm.emd_y1 = d_pos.emd.group_values[g];
    gm.emd_y0 = d_neg.emd.group_values[g];
    gm.mean_dp = d_all.mean.group_values[g];
    gm.mean_y1 = d_pos.mean.group_values[g];
    gm.mean_y0 = d_neg.mean.group_values[g];
  }

  GroupMetrics& overall = report.overall;
  overall.group = "__overall__";
  overall.count = predictions.size();
  overall.auroc = auroc(predictions, outcomes);
  overall.average_precision = average_precision(predictions, outcomes);
  overall.ce_loss = cross_entropy(predictions, outcomes);
  if (marginal_calib) {
    overall.ace = calibration_gap_mean(predictions, *marginal_calib, false);
    overall.ace_signed = calibration_gap_mean(predictions, *marginal_calib, true);
  }
  return report;
}

FairnessReport evaluate(const Cohort& cohort, std::span<const double> predictions,
                        const ReportMetadata& meta) {
  if (predictions.size() != cohort.size()) {
    throw ConfigError("evaluate: predictions not aligned with cohort");
  }
  std::vector<int> outcomes(cohort.size()), groups(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    outcomes[i] = cohort[i].outcome;
    groups[i] = cohort[i].group;
  }
  return evaluate(predictions, outcomes, groups, cohort.attribute(), meta);
}

// ---------------------------------------------------------------------------
// serialization

namespace {

constexpr const char* kUndefined = "NA";

std::string cell(const std::optional<double>& v) {
  if (!v) return kUndefined;
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", *v);
  return buf;
}

nlohmann::json opt_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

std::optional<double> opt_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

nlohmann::json group_to_json(const GroupMetrics& g) {
  return {{"group", g.group},
          {"count", g.count},
          {"auroc", opt_json(g.auroc)},
          {"average_precision", opt_json(g.average_precision)},
          {"ce_loss", opt_json(g.ce_loss)},
          {"ace", opt_json(g.ace)},
          {"ace_signed", opt_json(g.ace_signed)},
          {"rce", opt_json(g.rce)},
          {"rce_signed", opt_json(g.rce_signed)},
          {"xauc_pos", opt_json(g.xauc_pos)},
          {"xauc_neg", opt_json(g.xauc_neg)},
          {"emd_dp", opt_json(g.emd_dp)},
          {"emd_y1", opt_json(g.emd_y1)},
          {"emd_y0", opt_json(g.emd_y0)},
          {"mean_dp", opt_json(g.mean_dp)},
          {"mean_y1", opt_json(g.mean_y1)},
          {"mean_y0", opt_json(g.mean_y0)}};
}

GroupMetrics group_from_json(const nlohmann::json& j) {
  GroupMetrics g;
  g.group = j.at("group").get<std::string>();
  g.count = j.at("count").get<std::size_t>();
  g.auroc = opt_from_json(j.at("auroc"));
  g.average_precision = opt_from_json(j.at("average_precision"));
  g.ce_loss = opt_from_json(j.at("ce_loss"));
  g.ace = opt_from_json(j.at("ace"));
  g.ace_signed = opt_from_json(j.at("ace_signed"));
  g.rce = opt_from_json(j.at("rce"));
  g.rce_signed = opt_from_json(j.at("rce_signed"));
  g.xauc_pos = opt_from_json(j.at("xauc_pos"));
  g.xauc_neg = opt_from_json(j.at("xauc_neg"));
  g.emd_dp = opt_from_json(j.at("emd_dp"));
  g.emd_y1 = opt_from_json(j.at("emd_y1"));
  g.emd_y0 = opt_from_json(j.at("emd_y0"));
  g.mean_dp = opt_from_json(j.at("mean_dp"));
  g.mean_y1 = opt_from_json(j.at("mean_y1"));
  g.mean_y0 = opt_from_json(j.at("mean_y0"));
  return g;
}

}  // namespace

std::string report_csv_header() {
  return "criterion,distance,bandwidth,lambda,lambda_index,fold,seed,attribute,"
         "group,count,auroc,average_precision,ce_loss,ace,ace_signed,rce,"
         "rce_signed,xauc_pos,xauc_neg,emd_dp,emd_y1,emd_y0,mean_dp,mean_y1,"
         "mean_y0,agg_emd_dp,agg_emd_eqopp,agg_emd_eqodds,agg_mean_dp,"
         "agg_mean_eqopp,agg_mean_eqodds";
}

void append_report_csv(const FairnessReport& report, std::string& out) {
  const ReportMetadata& m = report.meta;
  char lambda_buf[40];
  std::snprintf(lambda_buf, sizeof(lambda_buf), "%.17g", m.lambda);
  const std::string prefix = m.criterion + "," + m.distance + "," + m.bandwidth +
                             "," + lambda_buf + "," + std::to_string(m.lambda_index) +
                             "," + std::to_string(m.fold) + "," +
                             std::to_string(m.seed) + "," + report.attribute + ",";
  auto row = [&](const GroupMetrics& g, bool with_aggregates) {
    out += prefix;
    out += g.group + "," + std::to_string(g.count);
    for (const auto* v :
         {&g.auroc, &g.average_precision, &g.ce_loss, &g.ace, &g.ace_signed,
          &g.rce, &g.rce_signed, &g.xauc_pos, &g.xauc_neg, &g.emd_dp, &g.emd_y1,
          &g.emd_y0, &g.mean_dp, &g.mean_y1, &g.mean_y0}) {
      out += "," + cell(*v);
    }
    if (with_aggregates) {
      for (const auto* v : {&report.emd_dp_total, &report.emd_eqopp_total,
                            &report.emd_eqodds_total, &report.mean_dp_total,
                            &report.mean_eqopp_total, &report.mean_eqodds_total}) {
        out += "," + cell(*v);
      }
    } else {
      for (int i = 0; i < 6; ++i) out += ",NA";
    }
    out += "\n";
  };
  for (const auto& g : report.groups) row(g, false);
  row(report.overall, true);
}

nlohmann::json report_to_json(const FairnessReport& report) {
  nlohmann::json doc;
  doc["metadata"] = {{"criterion", report.meta.criterion},
                     {"distance", report.meta.distance},
                     {"bandwidth", report.meta.bandwidth},
                     {"lambda", report.meta.lambda},
                     {"lambda_index", report.meta.lambda_index},
                     {"fold", report.meta.fold},
                     {"seed", report.meta.seed},
                     {"attribute", report.attribute}};
  doc["groups"] = nlohmann::json::array();
  for (const auto& g : report.groups) doc["groups"].push_back(group_to_json(g));
  doc["overall"] = group_to_json(report.overall);
  doc["aggregates"] = {{"emd_dp", opt_json(report.emd_dp_total)},
                       {"emd_eqopp", opt_json(report.emd_eqopp_total)},
                       {"emd_eqodds", opt_json(report.emd_eqodds_total)},
                       {"mean_dp", opt_json(report.mean_dp_total)},
                       {"mean_eqopp", opt_json(report.mean_eqopp_total)},
                       {"mean_eqodds", opt_json(report.mean_eqodds_total)}};
  return doc;
}

FairnessReport report_from_json(const nlohmann::json& doc) {
  FairnessReport report;
  const auto& m = doc.at("metadata");
  report.meta.criterion = m.at("criterion").get<std::string>();
  report.meta.distance = m.at("distance").get<std::string>();
  report.meta.bandwidth = m.at("bandwidth").get<std::string>();
  report.meta.lambda = m.at("lambda").get<double>();
  report.meta.lambda_index = m.at("lambda_index").get<int>();
  report.meta.fold = m.at("fold").get<int>();
  report.meta.seed = m.at("seed").get<std::uint64_t>();
  report.attribute = m.at("attribute").get<std::string>();
  for (const auto& g : doc.at("groups")) {
    report.groups.push_back(group_from_json(g));
  }
  report.overall = group_from_json(doc.at("overall"));
  const auto& agg = doc.at("aggregates");
  report.emd_dp_total = opt_from_json(agg.at("emd_dp"));
  report.emd_eqopp_total = opt_from_json(agg.at("emd_eqopp"));
  report.emd_eqodds_total = opt_from_json(agg.at("emd_eqodds"));
  report.mean_dp_total = opt_from_json(agg.at("mean_dp"));
  report.mean_eqopp_total = opt_from_json(agg.at("mean_eqopp"));
  report.mean_eqodds_total = opt_from_json(agg.at("mean_eqodds"));
  return report;
}

}  // namespace fairsweep
