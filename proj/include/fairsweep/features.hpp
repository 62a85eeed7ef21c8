#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairsweep/cohort.hpp"

namespace fairsweep {

// One clinical event: a concept observed at an hour offset relative to the
// index time (negative = before), optionally carrying a numeric result and
// its reference range.
struct Event {
  std::int64_t concept_id = 0;
  double hours = 0.0;
  std::optional<double> value;
  std::optional<double> reference_low;
  std::optional<double> reference_high;
};

struct Timeline {
  std::string record_id;
  std::string group_label;
  int outcome = 0;
  std::vector<Event> events;  // kept sorted by hours
  std::vector<std::int64_t> demographics;
};

// Half-open window (lower, upper] of hour offsets. lower may be -inf.
struct Interval {
  std::string name;
  double lower_hours = 0.0;
  double upper_hours = 0.0;

  bool contains(double hours) const {
    return hours > lower_hours && hours <= upper_hours;
  }
};

struct IntervalSpec {
  std::vector<Interval> intervals;

  void validate() const;
  // 29-1, 89-30, 179-90, 364-180 days prior, plus any time prior.
  static IntervalSpec standard_days_prior();
};

enum class FeatureKind : int { occurrence = 0, above_range = 1, below_range = 2, quintile = 3 };

struct FeatureKey {
  int interval = 0;  // index into IntervalSpec; kDemographics for demographics
  std::int64_t concept_id = 0;
  FeatureKind kind = FeatureKind::occurrence;
  int bin = 0;  // quintile bin [0,5); 0 otherwise

  auto operator<=>(const FeatureKey&) const = default;
};

// Bijection key -> feature index, plus the quintile cut points learned from
// the training split. Cuts are the 20/40/60/80th percentiles with linear
// interpolation between order statistics; a value equal to a cut goes to the
// higher bin.
class FeatureVocabulary {
 public:
  static constexpr int kDemographics = -1;

  FeatureVocabulary() = default;
  FeatureVocabulary(IntervalSpec intervals,
                    std::map<FeatureKey, std::uint32_t> index,
                    std::map<std::pair<int, std::int64_t>, std::array<double, 4>> cuts);

  std::uint32_t size() const { return static_cast<std::uint32_t>(index_.size()); }
  const IntervalSpec& intervals() const { return intervals_; }
  const std::map<FeatureKey, std::uint32_t>& index() const { return index_; }
  std::optional<std::uint32_t> find(const FeatureKey& key) const;
  const std::array<double, 4>* cuts_for(int interval, std::int64_t concept_id) const;

  void save(const std::string& path) const;
  static FeatureVocabulary load(const std::string& path);

 private:
  IntervalSpec intervals_;
  std::map<FeatureKey, std::uint32_t> index_;
  std::map<std::pair<int, std::int64_t>, std::array<double, 4>> quintile_cuts_;
};

// Percentile with linear interpolation between order statistics; `sorted`
// must be ascending.
double interpolated_percentile(std::span<const double> sorted, double p);
std::array<double, 4> quintile_cut_points(std::vector<double> values);
int quintile_bin(double value, const std::array<double, 4>& cuts);

// Builds the vocabulary from training-split timelines only. Concepts with
// fewer than `min_numeric_for_quintiles` numeric observations in an interval
// get occurrence (and, when reference ranges appear, range) features but no
// quintile features.
FeatureVocabulary build_vocabulary(std::span<const Timeline> training,
                                   const IntervalSpec& intervals,
                                   int min_numeric_for_quintiles = 5);

// Sparse binary feature vector (sorted unique indices). Concepts unseen at
// vocabulary-build time are ignored.
std::vector<std::uint32_t> extract(const Timeline& timeline,
                                   const FeatureVocabulary& vocab);

struct TimelineFile {
  std::string attribute_name;
  std::vector<Timeline> timelines;
};

TimelineFile load_timelines(const std::string& path);
void write_timelines(const TimelineFile& file, const std::string& path);

// Extracts every timeline against the vocabulary and assembles a cohort.
Cohort timelines_to_cohort(const TimelineFile& file,
                           const GroupAttribute& attribute,
                           const FeatureVocabulary& vocab);

}  // namespace fairsweep
