#include "fairsweep/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "fairsweep/errors.hpp"
#include "fairsweep/rng.hpp"

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

double parse_double(const std::string& token, std::size_t line_no,
                    const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(token, &pos);
    if (pos != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": bad " + what +
                    " '" + token + "'");
  }
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(std::move(tok));
  return out;
}

}  // namespace

std::optional<int> GroupAttribute::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < group_names.size(); ++i) {
    if (group_names[i] == label) return static_cast<int>(i);
  }
  return std::nullopt;
}

namespace {

bool token_safe(const std::string& text) {
  return !text.empty() &&
         text.find_first_of(" \t\r\n,") == std::string::npos;
}

}  // namespace

void GroupAttribute::validate() const {
  // names travel through whitespace-delimited files and CSV columns
  if (!token_safe(name)) throw ConfigError("attribute name must be a plain token");
  if (group_names.size() < 2) {
    throw ConfigError("attribute '" + name + "' needs at least 2 groups");
  }
  std::set<std::string> seen;
  for (const auto& g : group_names) {
    if (!token_safe(g)) {
      throw ConfigError("attribute '" + name + "' has a group label with whitespace or commas");
    }
    if (!seen.insert(g).second) {
      throw ConfigError("attribute '" + name + "' has duplicate group label '" + g + "'");
    }
  }
}

Cohort::Cohort(GroupAttribute attribute, std::uint32_t vocab_size,
               std::vector<CohortRecord> records)
    : attribute_(std::move(attribute)),
      vocab_size_(vocab_size),
      records_(std::move(records)) {
  attribute_.validate();
  const int k = attribute_.group_count();
  std::set<std::string> ids;
  for (const auto& r : records_) {
    if (!token_safe(r.id)) {
      throw DataError("record id '" + r.id + "' must be a plain token");
    }
    if (r.outcome != 0 && r.outcome != 1) {
      throw DataError("record '" + r.id + "': outcome must be 0 or 1, got " +
                      std::to_string(r.outcome));
    }
    if (r.group < 0 || r.group >= k) {
      throw DataError("record '" + r.id + "': group index " +
                      std::to_string(r.group) + " out of range [0," +
                      std::to_string(k) + ")");
    }
    for (std::uint32_t f : r.features) {
      if (f >= vocab_size_) {
        throw DataError("record '" + r.id + "': feature index " +
                        std::to_string(f) + " >= vocabulary size " +
                        std::to_string(vocab_size_));
      }
    }
    if (!std::is_sorted(r.features.begin(), r.features.end()) ||
        std::adjacent_find(r.features.begin(), r.features.end()) !=
            r.features.end()) {
      throw DataError("record '" + r.id + "': feature indices must be sorted and unique");
    }
    if (!ids.insert(r.id).second) {
      throw DataError("duplicate record id '" + r.id + "'");
    }
  }
}

Cohort load_cohort(const std::string& path, const GroupAttribute& attribute) {
  attribute.validate();
  std::ifstream in(path);
  if (!in) throw DataError("cannot open cohort file '" + path + "'");

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError("cohort file '" + path + "' is empty");
  ++line_no;

  // Header: "#cohort attribute=<name> vocab_size=<n>"
  auto header = split_ws(line);
  if (header.size() != 3 || header[0] != "#cohort" ||
      header[1].rfind("attribute=", 0) != 0 ||
      header[2].rfind("vocab_size=", 0) != 0) {
    throw DataError("line 1: expected '#cohort attribute=<name> vocab_size=<n>'");
  }
  const std::string attr_name = header[1].substr(10);
  if (attr_name != attribute.name) {
    throw DataError("cohort file declares attribute '" + attr_name +
                    "' but '" + attribute.name + "' was requested");
  }
  const double vs = parse_double(header[2].substr(11), 1, "vocab_size");
  if (vs < 0 || vs != std::floor(vs)) throw DataError("line 1: bad vocab_size");
  const auto vocab_size = static_cast<std::uint32_t>(vs);

  std::vector<CohortRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto tokens = split_ws(line);
    if (tokens.size() < 3) {
      throw DataError("line " + std::to_string(line_no) +
                      ": expected at least 'id group outcome'");
    }
    CohortRecord rec;
    rec.id = tokens[0];
    const auto group = attribute.index_of(tokens[1]);
    if (!group) {
      throw DataError("line " + std::to_string(line_no) +
                      ": unknown group label '" + tokens[1] + "' for attribute '" +
                      attribute.name + "'");
    }
    rec.group = *group;
    if (tokens[2] == "0") {
      rec.outcome = 0;
    } else if (tokens[2] == "1") {
      rec.outcome = 1;
    } else {
      throw DataError("line " + std::to_string(line_no) + ": record '" +
                      rec.id + "' has outcome '" + tokens[2] +
                      "', expected 0 or 1");
    }
    for (std::size_t t = 3; t < tokens.size(); ++t) {
      const std::string& tok = tokens[t];
      if (tok.rfind("truth=", 0) == 0) {
        rec.true_prob = parse_double(tok.substr(6), line_no, "truth");
        continue;
      }
      const auto colon = tok.find(':');
      if (colon == std::string::npos || tok.substr(colon + 1) != "1") {
        throw DataError("line " + std::to_string(line_no) +
                        ": bad feature token '" + tok + "', expected '<index>:1'");
      }
      const double idx = parse_double(tok.substr(0, colon), line_no, "feature index");
      if (idx < 0 || idx != std::floor(idx)) {
        throw DataError("line " + std::to_string(line_no) + ": bad feature index");
      }
      rec.features.push_back(static_cast<std::uint32_t>(idx));
    }
    std::sort(rec.features.begin(), rec.features.end());
    records.push_back(std::move(rec));
  }
  return Cohort(attribute, vocab_size, std::move(records));
}

void write_cohort(const Cohort& cohort, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write cohort file '" + path + "'");
  out << "#cohort attribute=" << cohort.attribute().name
      << " vocab_size=" << cohort.vocab_size() << "\n";
  for (const auto& r : cohort.records()) {
    out << r.id << ' ' << cohort.attribute().group_names[r.group] << ' '
        << r.outcome;
    if (r.true_prob) out << " truth=" << format_double(*r.true_prob);
    for (std::uint32_t f : r.features) out << ' ' << f << ":1";
    out << "\n";
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

SplitPlan make_split(const Cohort& cohort, double test_fraction, int folds,
                     std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must be in (0,1)");
  }
  if (folds < 1) throw ConfigError("fold count must be >= 1");
  const std::size_t n = cohort.size();
  if (n < static_cast<std::size_t>(folds) + 1) {
    throw DataError("insufficient data: " + std::to_string(n) +
                    " records for " + std::to_string(folds) + " folds");
  }
  const auto test_size = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * test_fraction));
  const std::size_t remainder = n - test_size;
  if (remainder < static_cast<std::size_t>(folds)) {
    throw DataError("insufficient data: only " + std::to_string(remainder) +
                    " records left for " + std::to_string(folds) + " folds");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  SplitPlan plan;
  plan.test_ids.reserve(test_size);
  for (std::size_t i = 0; i < test_size; ++i) {
    plan.test_ids.push_back(cohort[order[i]].id);
  }
  plan.folds.resize(folds);
  const std::size_t base = remainder / folds;
  const std::size_t extra = remainder % folds;
  std::size_t cursor = test_size;
  for (int f = 0; f < folds; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) {
      plan.folds[f].push_back(cohort[order[cursor++]].id);
    }
  }
  return plan;
}

void write_split(const SplitPlan& plan, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write split file '" + path + "'");
  out << "#split folds=" << plan.folds.size() << "\n";
  out << "test";
  for (const auto& id : plan.test_ids) out << ' ' << id;
  out << "\n";
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    out << "fold" << f;
    for (const auto& id : plan.folds[f]) out << ' ' << id;
    out << "\n";
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

SplitPlan load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("split file '" + path + "' is empty");
  auto header = split_ws(line);
  if (header.size() != 2 || header[0] != "#split" ||
      header[1].rfind("folds=", 0) != 0) {
    throw DataError("line 1: expected '#split folds=<n>'");
  }
  const int folds = std::stoi(header[1].substr(6));
  SplitPlan plan;
  plan.folds.resize(folds);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tokens = split_ws(line);
    if (tokens[0] == "test") {
      plan.test_ids.assign(tokens.begin() + 1, tokens.end());
    } else if (tokens[0].rfind("fold", 0) == 0) {
      const int f = std::stoi(tokens[0].substr(4));
      if (f < 0 || f >= folds) {
        throw DataError("line " + std::to_string(line_no) + ": fold index out of range");
      }
      plan.folds[f].assign(tokens.begin() + 1, tokens.end());
    } else {
      throw DataError("line " + std::to_string(line_no) + ": unknown row '" + tokens[0] + "'");
    }
  }
  return plan;
}

void SyntheticSpec::validate() const {
  if (n == 0) throw ConfigError("synthetic spec: n must be positive");
  if (group_count < 2) throw ConfigError("synthetic spec: need at least 2 groups");
  if (feature_dim == 0) throw ConfigError("synthetic spec: feature_dim must be positive");
  if (group_weights.size() != static_cast<std::size_t>(group_count) ||
      coefficients.size() != static_cast<std::size_t>(group_count) ||
      intercepts.size() != static_cast<std::size_t>(group_count)) {
    throw ConfigError("synthetic spec: per-group fields must have K entries");
  }
  double total = 0.0;
  for (double w : group_weights) {
    if (w < 0.0) throw ConfigError("synthetic spec: negative group weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ConfigError("synthetic spec: group weights must sum to 1");
  }
  for (const auto& c : coefficients) {
    if (c.size() != feature_dim) {
      throw ConfigError("synthetic spec: coefficient vector length must equal feature_dim");
    }
  }
  if (feature_sparsity < 0.0 || feature_sparsity > 1.0) {
    throw ConfigError("synthetic spec: feature_sparsity must be in [0,1]");
  }
  if (group_indicator_features &&
      feature_dim < static_cast<std::uint32_t>(group_count)) {
    throw ConfigError("synthetic spec: feature_dim too small for group indicator features");
  }
}

Cohort generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  std::vector<double> cumulative(spec.group_weights.size());
  std::partial_sum(spec.group_weights.begin(), spec.group_weights.end(),
                   cumulative.begin());
  cumulative.back() = 1.0;

  GroupAttribute attribute;
  attribute.name = "group";
  for (int k = 0; k < spec.group_count; ++k) {
    attribute.group_names.push_back("g" + std::to_string(k));
  }

  const std::uint32_t first_random =
      spec.group_indicator_features ? static_cast<std::uint32_t>(spec.group_count) : 0;

  std::vector<CohortRecord> records;
  records.reserve(spec.n);
  char idbuf[24];
  for (std::size_t i = 0; i < spec.n; ++i) {
    CohortRecord rec;
    std::snprintf(idbuf, sizeof(idbuf), "s%08zu", i);
    rec.id = idbuf;

    const double u = rng.uniform01();
    int group = 0;
    while (group + 1 < spec.group_count && u >= cumulative[group]) ++group;
    rec.group = group;

    if (spec.group_indicator_features) {
      rec.features.push_back(static_cast<std::uint32_t>(group));
    }
    for (std::uint32_t j = first_random; j < spec.feature_dim; ++j) {
      if (rng.bernoulli(spec.feature_sparsity)) rec.features.push_back(j);
    }

    double logit = spec.intercepts[group];
    for (std::uint32_t f : rec.features) logit += spec.coefficients[group][f];
    const double p = sigmoid(logit);
    rec.true_prob = p;
    rec.outcome = rng.bernoulli(p) ? 1 : 0;
    records.push_back(std::move(rec));
  }
  return Cohort(std::move(attribute), spec.feature_dim, std::move(records));
}

Cohort aggregate_rare_groups(const Cohort& cohort, std::size_t min_outcomes,
                             const std::string& other_label) {
  const int k = cohort.attribute().group_count();
  std::vector<std::size_t> outcomes(k, 0);
  for (const auto& r : cohort.records()) {
    outcomes[r.group] += static_cast<std::size_t>(r.outcome);
  }

  std::vector<bool> keep(k);
  for (int g = 0; g < k; ++g) {
    keep[g] = outcomes[g] >= min_outcomes ||
              cohort.attribute().group_names[g] == other_label;
  }

  GroupAttribute merged;
  merged.name = cohort.attribute().name;
  std::vector<int> remap(k, -1);
  for (int g = 0; g < k; ++g) {
    if (keep[g]) {
      remap[g] = merged.group_count();
      merged.group_names.push_back(cohort.attribute().group_names[g]);
    }
  }
  const bool any_merged =
      std::any_of(remap.begin(), remap.end(), [](int g) { return g < 0; });
  int other_index = -1;
  if (const auto existing = merged.index_of(other_label)) other_index = *existing;
  if (any_merged && other_index < 0) {
    other_index = merged.group_count();
    merged.group_names.push_back(other_label);
  }
  for (int g = 0; g < k; ++g) {
    if (remap[g] < 0) remap[g] = other_index;
  }
  if (merged.group_count() < 2) {
    throw DataError("aggregating rare groups would leave fewer than 2 groups");
  }

  std::vector<CohortRecord> records = cohort.records();
  for (auto& r : records) r.group = remap[r.group];
  return Cohort(std::move(merged), cohort.vocab_size(), std::move(records));
}

std::vector<GroupIncidence> incidence_table(const Cohort& cohort) {
  if (cohort.size() == 0) throw DataError("incidence_table: empty cohort");
  const int k = cohort.attribute().group_count();
  std::vector<std::size_t> counts(k, 0), positives(k, 0);
  for (const auto& r : cohort.records()) {
    ++counts[r.group];
    positives[r.group] += static_cast<std::size_t>(r.outcome);
  }
  std::vector<GroupIncidence> table(k);
  for (int g = 0; g < k; ++g) {
    table[g].group = cohort.attribute().group_names[g];
    table[g].count = counts[g];
    if (counts[g] > 0) {
      table[g].incidence = static_cast<double>(positives[g]) /
                           static_cast<double>(counts[g]);
    }
  }
  return table;
}

}  // namespace fairsweep
