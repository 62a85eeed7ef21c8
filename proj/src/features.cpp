#include "fairsweep/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fairsweep/errors.hpp"

namespace fairsweep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::occurrence: return "occurrence";
    case FeatureKind::above_range: return "above_range";
    case FeatureKind::below_range: return "below_range";
    case FeatureKind::quintile: return "quintile";
  }
  return "?";
}

FeatureKind kind_from_name(const std::string& name) {
  if (name == "occurrence") return FeatureKind::occurrence;
  if (name == "above_range") return FeatureKind::above_range;
  if (name == "below_range") return FeatureKind::below_range;
  if (name == "quintile") return FeatureKind::quintile;
  throw DataError("unknown feature kind '" + name + "'");
}

}  // namespace

void IntervalSpec::validate() const {
  if (intervals.empty()) throw ConfigError("interval spec is empty");
  std::set<std::string> names;
  for (const auto& iv : intervals) {
    if (iv.name.empty()) throw ConfigError("interval with empty name");
    if (!(iv.lower_hours < iv.upper_hours)) {
      throw ConfigError("interval '" + iv.name + "' is empty: (" +
                        std::to_string(iv.lower_hours) + ", " +
                        std::to_string(iv.upper_hours) + "]");
    }
    if (!names.insert(iv.name).second) {
      throw ConfigError("duplicate interval name '" + iv.name + "'");
    }
  }
}

IntervalSpec IntervalSpec::standard_days_prior() {
  IntervalSpec spec;
  spec.intervals = {
      {"days_29_to_1", -29.0 * 24.0, -24.0},
      {"days_89_to_30", -89.0 * 24.0, -30.0 * 24.0},
      {"days_179_to_90", -179.0 * 24.0, -90.0 * 24.0},
      {"days_364_to_180", -364.0 * 24.0, -180.0 * 24.0},
      {"any_prior", -kInf, 0.0},
  };
  return spec;
}

FeatureVocabulary::FeatureVocabulary(
    IntervalSpec intervals, std::map<FeatureKey, std::uint32_t> index,
    std::map<std::pair<int, std::int64_t>, std::array<double, 4>> cuts)
    : intervals_(std::move(intervals)),
      index_(std::move(index)),
      quintile_cuts_(std::move(cuts)) {}

std::optional<std::uint32_t> FeatureVocabulary::find(const FeatureKey& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::array<double, 4>* FeatureVocabulary::cuts_for(
    int interval, std::int64_t concept_id) const {
  const auto it = quintile_cuts_.find({interval, concept_id});
  if (it == quintile_cuts_.end()) return nullptr;
  return &it->second;
}

double interpolated_percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ConfigError("percentile of empty sample");
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::array<double, 4> quintile_cut_points(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return {interpolated_percentile(values, 0.2), interpolated_percentile(values, 0.4),
          interpolated_percentile(values, 0.6), interpolated_percentile(values, 0.8)};
}

int quintile_bin(double value, const std::array<double, 4>& cuts) {
  int bin = 0;
  for (double cut : cuts) {
    if (cut <= value) ++bin;  // equal to a cut -> higher bin
  }
  return bin;
}

FeatureVocabulary build_vocabulary(std::span<const Timeline> training,
                                   const IntervalSpec& intervals,
                                   int min_numeric_for_quintiles) {
  intervals.validate();
  if (training.empty()) throw DataError("build_vocabulary: no training timelines");

  std::set<FeatureKey> keys;
  std::map<std::pair<int, std::int64_t>, std::vector<double>> numeric_values;

  for (const auto& timeline : training) {
    for (std::int64_t concept_id : timeline.demographics) {
      keys.insert({FeatureVocabulary::kDemographics, concept_id,
                   FeatureKind::occurrence, 0});
    }
    for (int iv = 0; iv < static_cast<int>(intervals.intervals.size()); ++iv) {
      const Interval& window = intervals.intervals[iv];
      for (const Event& ev : timeline.events) {
        if (!window.contains(ev.hours)) continue;
        keys.insert({iv, ev.concept_id, FeatureKind::occurrence, 0});
        if (ev.value) {
          numeric_values[{iv, ev.concept_id}].push_back(*ev.value);
          if (ev.reference_low || ev.reference_high) {
            keys.insert({iv, ev.concept_id, FeatureKind::above_range, 0});
            keys.insert({iv, ev.concept_id, FeatureKind::below_range, 0});
          }
        }
      }
    }
  }

  std::map<std::pair<int, std::int64_t>, std::array<double, 4>> cuts;
  for (auto& [key, values] : numeric_values) {
    if (static_cast<int>(values.size()) < min_numeric_for_quintiles) continue;
    cuts[key] = quintile_cut_points(std::move(values));
    for (int bin = 0; bin < 5; ++bin) {
      keys.insert({key.first, key.second, FeatureKind::quintile, bin});
    }
  }

  std::map<FeatureKey, std::uint32_t> index;
  std::uint32_t next = 0;
  for (const auto& key : keys) index[key] = next++;
  return FeatureVocabulary(intervals, std::move(index), std::move(cuts));
}

std::vector<std::uint32_t> extract(const Timeline& timeline,
                                   const FeatureVocabulary& vocab) {
  std::set<std::uint32_t> out;
  for (std::int64_t concept_id : timeline.demographics) {
    if (auto idx = vocab.find({FeatureVocabulary::kDemographics, concept_id,
                               FeatureKind::occurrence, 0})) {
      out.insert(*idx);
    }
  }
  const auto& intervals = vocab.intervals().intervals;
  for (int iv = 0; iv < static_cast<int>(intervals.size()); ++iv) {
    const Interval& window = intervals[iv];
    for (const Event& ev : timeline.events) {
      if (!window.contains(ev.hours)) continue;
      if (auto idx = vocab.find({iv, ev.concept_id, FeatureKind::occurrence, 0})) {
        out.insert(*idx);
      }
      if (!ev.value) continue;
      if (ev.reference_high && *ev.value > *ev.reference_high) {
        if (auto idx = vocab.find({iv, ev.concept_id, FeatureKind::above_range, 0})) {
          out.insert(*idx);
        }
      }
      if (ev.reference_low && *ev.value < *ev.reference_low) {
        if (auto idx = vocab.find({iv, ev.concept_id, FeatureKind::below_range, 0})) {
          out.insert(*idx);
        }
      }
      if (const auto* cuts = vocab.cuts_for(iv, ev.concept_id)) {
        const int bin = quintile_bin(*ev.value, *cuts);
        if (auto idx = vocab.find({iv, ev.concept_id, FeatureKind::quintile, bin})) {
          out.insert(*idx);
        }
      }
    }
  }
  return {out.begin(), out.end()};
}

void FeatureVocabulary::save(const std::string& path) const {
  nlohmann::json doc;
  doc["format"] = "fairsweep-vocabulary";
  doc["version"] = 1;
  auto& ivs = doc["intervals"] = nlohmann::json::array();
  for (const auto& iv : intervals_.intervals) {
    ivs.push_back({{"name", iv.name},
                   {"lower_hours", iv.lower_hours},
                   {"upper_hours", iv.upper_hours}});
  }
  auto& feats = doc["features"] = nlohmann::json::array();
  for (const auto& [key, idx] : index_) {
    feats.push_back({{"interval", key.interval},
                     {"concept", key.concept_id},
                     {"kind", kind_name(key.kind)},
                     {"bin", key.bin},
                     {"index", idx}});
  }
  auto& cuts = doc["quintile_cuts"] = nlohmann::json::array();
  for (const auto& [key, values] : quintile_cuts_) {
    cuts.push_back({{"interval", key.first},
                    {"concept", key.second},
                    {"cuts", values}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary file '" + path + "'");
  out << doc.dump(2) << "\n";
}

FeatureVocabulary FeatureVocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("vocabulary file '" + path + "': " + e.what());
  }
  if (doc.value("format", "") != "fairsweep-vocabulary") {
    throw DataError("'" + path + "' is not a vocabulary file");
  }
  IntervalSpec intervals;
  for (const auto& iv : doc.at("intervals")) {
    intervals.intervals.push_back({iv.at("name").get<std::string>(),
                                   iv.at("lower_hours").get<double>(),
                                   iv.at("upper_hours").get<double>()});
  }
  std::map<FeatureKey, std::uint32_t> index;
  for (const auto& f : doc.at("features")) {
    FeatureKey key{f.at("interval").get<int>(), f.at("concept").get<std::int64_t>(),
                   kind_from_name(f.at("kind").get<std::string>()),
                   f.at("bin").get<int>()};
    index[key] = f.at("index").get<std::uint32_t>();
  }
  std::map<std::pair<int, std::int64_t>, std::array<double, 4>> cuts;
  for (const auto& c : doc.at("quintile_cuts")) {
    cuts[{c.at("interval").get<int>(), c.at("concept").get<std::int64_t>()}] =
        c.at("cuts").get<std::array<double, 4>>();
  }
  return FeatureVocabulary(std::move(intervals), std::move(index), std::move(cuts));
}

namespace {

std::optional<double> parse_optional_field(const std::string& token,
                                           std::size_t line_no, const char* what) {
  if (token == "-") return std::nullopt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(token, &pos);
    if (pos != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": bad " + what + " '" +
                    token + "'");
  }
}

}  // namespace

TimelineFile load_timelines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open timelines file '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError("timelines file '" + path + "' is empty");
  ++line_no;
  std::istringstream header(line);
  std::string tag, attr;
  header >> tag >> attr;
  if (tag != "#timelines" || attr.rfind("attribute=", 0) != 0) {
    throw DataError("line 1: expected '#timelines attribute=<name>'");
  }

  TimelineFile file;
  file.attribute_name = attr.substr(10);
  std::map<std::string, std::size_t> position;

  auto timeline_for = [&](const std::string& id, std::size_t at_line) -> Timeline& {
    const auto it = position.find(id);
    if (it == position.end()) {
      throw DataError("line " + std::to_string(at_line) + ": record '" + id +
                      "' referenced before its R line");
    }
    return file.timelines[it->second];
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string kind;
    row >> kind;
    if (kind == "R") {
      Timeline t;
      std::string outcome;
      if (!(row >> t.record_id >> t.group_label >> outcome)) {
        throw DataError("line " + std::to_string(line_no) + ": expected 'R id group outcome'");
      }
      if (outcome == "0") {
        t.outcome = 0;
      } else if (outcome == "1") {
        t.outcome = 1;
      } else {
        throw DataError("line " + std::to_string(line_no) + ": record '" +
                        t.record_id + "' has outcome '" + outcome + "', expected 0 or 1");
      }
      if (position.count(t.record_id) != 0) {
        throw DataError("line " + std::to_string(line_no) + ": duplicate record '" +
                        t.record_id + "'");
      }
      position[t.record_id] = file.timelines.size();
      file.timelines.push_back(std::move(t));
    } else if (kind == "D") {
      std::string id;
      if (!(row >> id)) throw DataError("line " + std::to_string(line_no) + ": expected 'D id concepts...'");
      Timeline& t = timeline_for(id, line_no);
      std::int64_t concept_id = 0;
      while (row >> concept_id) t.demographics.push_back(concept_id);
    } else if (kind == "E") {
      std::string id, value_tok, low_tok, high_tok;
      Event ev;
      if (!(row >> id >> ev.concept_id >> ev.hours >> value_tok >> low_tok >> high_tok)) {
        throw DataError("line " + std::to_string(line_no) +
                        ": expected 'E id concept hours value|- low|- high|-'");
      }
      ev.value = parse_optional_field(value_tok, line_no, "value");
      ev.reference_low = parse_optional_field(low_tok, line_no, "reference_low");
      ev.reference_high = parse_optional_field(high_tok, line_no, "reference_high");
      if (!ev.value && (ev.reference_low || ev.reference_high)) {
        throw DataError("line " + std::to_string(line_no) +
                        ": reference range without a numeric value");
      }
      if (ev.reference_low && ev.reference_high &&
          *ev.reference_low > *ev.reference_high) {
        throw DataError("line " + std::to_string(line_no) +
                        ": reference_low > reference_high");
      }
      timeline_for(id, line_no).events.push_back(ev);
    } else {
      throw DataError("line " + std::to_string(line_no) + ": unknown row type '" + kind + "'");
    }
  }

  for (auto& t : file.timelines) {
    std::stable_sort(t.events.begin(), t.events.end(),
                     [](const Event& a, const Event& b) { return a.hours < b.hours; });
  }
  return file;
}

void write_timelines(const TimelineFile& file, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write timelines file '" + path + "'");
  out << "#timelines attribute=" << file.attribute_name << "\n";
  char buf[40];
  auto fmt = [&](const std::optional<double>& v) -> std::string {
    if (!v) return "-";
    std::snprintf(buf, sizeof(buf), "%.17g", *v);
    return buf;
  };
  for (const auto& t : file.timelines) {
    out << "R " << t.record_id << ' ' << t.group_label << ' ' << t.outcome << "\n";
    if (!t.demographics.empty()) {
      out << "D " << t.record_id;
      for (auto c : t.demographics) out << ' ' << c;
      out << "\n";
    }
    for (const auto& ev : t.events) {
      std::snprintf(buf, sizeof(buf), "%.17g", ev.hours);
      out << "E " << t.record_id << ' ' << ev.concept_id << ' ' << buf << ' '
          << fmt(ev.value) << ' ' << fmt(ev.reference_low) << ' '
          << fmt(ev.reference_high) << "\n";
    }
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

Cohort timelines_to_cohort(const TimelineFile& file,
                           const GroupAttribute& attribute,
                           const FeatureVocabulary& vocab) {
  if (file.attribute_name != attribute.name) {
    throw DataError("timelines declare attribute '" + file.attribute_name +
                    "' but '" + attribute.name + "' was requested");
  }
  std::vector<CohortRecord> records;
  records.reserve(file.timelines.size());
  for (const auto& t : file.timelines) {
    CohortRecord rec;
    rec.id = t.record_id;
    const auto group = attribute.index_of(t.group_label);
    if (!group) {
      throw DataError("record '" + t.record_id + "': unknown group label '" +
                      t.group_label + "'");
    }
    rec.group = *group;
    rec.outcome = t.outcome;
    rec.features = extract(t, vocab);
    records.push_back(std::move(rec));
  }
  return Cohort(attribute, vocab.size(), std::move(records));
}

}  // namespace fairsweep
