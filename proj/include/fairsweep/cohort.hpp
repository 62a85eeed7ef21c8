#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fairsweep {

// A named discrete attribute with an ordered list of group labels. The label
// order fixes the group index used everywhere else.
struct GroupAttribute {
  std::string name;
  std::vector<std::string> group_names;

  int group_count() const { return static_cast<int>(group_names.size()); }
  std::optional<int> index_of(const std::string& label) const;
  void validate() const;  // K >= 2, labels unique and nonempty
};

// One subject: sparse binary feature set, outcome, group index. Synthetic
// records additionally carry the generating probability P(y=1|x) so that
// calibration behavior can be checked against ground truth.
struct CohortRecord {
  std::string id;
  std::vector<std::uint32_t> features;  // sorted, unique indices with value 1
  int outcome = 0;                      // 0 or 1
  int group = 0;                        // [0, K)
  std::optional<double> true_prob;

  bool operator==(const CohortRecord&) const = default;
};

class Cohort {
 public:
  Cohort(GroupAttribute attribute, std::uint32_t vocab_size,
         std::vector<CohortRecord> records);

  const GroupAttribute& attribute() const { return attribute_; }
  std::uint32_t vocab_size() const { return vocab_size_; }
  const std::vector<CohortRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const CohortRecord& operator[](std::size_t i) const { return records_[i]; }

 private:
  GroupAttribute attribute_;
  std::uint32_t vocab_size_ = 0;
  std::vector<CohortRecord> records_;
};

// Held-out test ids plus F disjoint validation folds covering the remainder.
struct SplitPlan {
  std::vector<std::string> test_ids;
  std::vector<std::vector<std::string>> folds;

  std::size_t fold_count() const { return folds.size(); }
};

struct SyntheticSpec {
  std::size_t n = 0;
  int group_count = 0;
  std::vector<double> group_weights;              // sums to 1
  std::vector<std::vector<double>> coefficients;  // one vector per group
  std::vector<double> intercepts;                 // one per group
  std::uint32_t feature_dim = 0;
  double feature_sparsity = 0.0;  // P(feature = 1)
  // When set, features [0, K) are a one-hot group indicator and only the
  // remaining features are drawn Bernoulli(sparsity). Lets a model see group
  // membership the same way demographic concept features do.
  bool group_indicator_features = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroupIncidence {
  std::string group;
  std::size_t count = 0;
  std::optional<double> incidence;  // unset for empty groups
};

// --- operations ---

// Reads the line-delimited cohort format (see README for the exact layout).
// Group labels are mapped to indices by `attribute` order; the file header
// must declare the same attribute name.
Cohort load_cohort(const std::string& path, const GroupAttribute& attribute);

void write_cohort(const Cohort& cohort, const std::string& path);

// Deterministic random partition: round(n * test_fraction) test records, the
// remainder dealt into `folds` nearly equal folds (earliest folds take the
// extra records).
SplitPlan make_split(const Cohort& cohort, double test_fraction, int folds,
                     std::uint64_t seed);

SplitPlan load_split(const std::string& path);
void write_split(const SplitPlan& plan, const std::string& path);

Cohort generate_synthetic(const SyntheticSpec& spec);

std::vector<GroupIncidence> incidence_table(const Cohort& cohort);

// Merges every group with fewer than min_outcomes observed positive outcomes
// into `other_label` (reusing that group when it already exists, appending it
// otherwise). Kept groups preserve their relative order.
Cohort aggregate_rare_groups(const Cohort& cohort, std::size_t min_outcomes,
                             const std::string& other_label = "Other");

}  // namespace fairsweep
