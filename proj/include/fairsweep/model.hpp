#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fairsweep/cohort.hpp"
#include "fairsweep/penalty.hpp"
#include "fairsweep/rng.hpp"

namespace fairsweep {

struct Hyperparameters {
  int batch_size = 256;
  double dropout_prob = 0.0;
  int hidden_dim = 128;
  double learning_rate = 1e-3;
  int num_hidden_layers = 1;
  int max_iterations = 150;
  int batches_per_iteration = 100;
  int patience = 10;

  void validate() const;
  // Checks the architectural/training values against the search grid
  // (batch {128,256,512}, dropout {0,.25,.5,.75}, hidden {128,256},
  // lr {1e-3,1e-4,1e-5}, layers {1,2,3}).
  bool on_grid() const;

  static Hyperparameters preset(const std::string& name);
  static std::vector<std::string> preset_names();
  // Random sample (without replacement) from the full grid, for tuning.
  static std::vector<Hyperparameters> random_search(int count, std::uint64_t seed);
};

// Fully-connected net: input -> num_hidden_layers x hidden_dim (ReLU,
// inverted dropout) -> 2 logits -> log-softmax. All parameters live in one
// flat buffer, layer by layer: weights row-major (out x in), then bias.
struct ModelParameters {
  std::vector<std::size_t> dims;  // [input, hidden..., 2]
  std::vector<double> values;

  static ModelParameters initialize(std::size_t input_dim,
                                    const Hyperparameters& hp, Rng& rng);
  static std::size_t value_count(const std::vector<std::size_t>& dims);

  std::size_t layer_count() const { return dims.size() - 1; }
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
  void validate() const;
};

enum class DropoutMode { train, eval };

// A batch is a view over cohort records: sparse binary rows plus aligned
// outcome and group arrays.
struct BatchView {
  std::uint32_t feature_dim = 0;
  int group_count = 0;
  std::vector<const std::vector<std::uint32_t>*> rows;
  std::vector<int> outcomes;
  std::vector<int> groups;

  std::size_t size() const { return rows.size(); }
};

BatchView make_batch(const Cohort& cohort, std::span<const std::size_t> indices);

struct ForwardOutput {
  std::vector<double> log_pos;  // log f
  std::vector<double> log_neg;  // log(1 - f)
};

ForwardOutput forward(const ModelParameters& params, const BatchView& batch,
                      DropoutMode mode, double dropout_prob, Rng* rng);

// Positive-class probabilities in eval mode.
std::vector<double> predict(const ModelParameters& params, const BatchView& batch);

struct LossBreakdown {
  double objective = 0.0;      // mean CE + lambda * R
  double cross_entropy = 0.0;  // mean CE
  double penalty = 0.0;        // R (unscaled); 0 when lambda == 0
  double bandwidth = 0.0;      // last resolved kernel bandwidth (mmd only)
};

// Objective and, when grad != nullptr, its exact gradient with respect to
// every parameter (same layout as params.values; grad is overwritten). The
// median-heuristic bandwidth is resolved from the batch and held constant in
// the gradient. Dropout masks are drawn from rng in train mode and the
// gradient is exact for the realized masks.
LossBreakdown penalized_loss_and_grad(const ModelParameters& params,
                                      const BatchView& batch,
                                      const PenaltyConfig& penalty,
                                      DropoutMode mode, double dropout_prob,
                                      Rng* rng, std::vector<double>* grad);

// Record indices for one training cell: validation = the chosen fold, train
// = every other fold, test = the held-out set.
struct FoldPartition {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

FoldPartition resolve_partition(const Cohort& cohort, const SplitPlan& split,
                                int fold_index);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainState {
  std::vector<double> moment1;
  std::vector<double> moment2;
  long step = 0;
  double best_objective = std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  Rng batch_rng;
  Rng dropout_rng;

  TrainState(std::size_t parameter_count, std::uint64_t seed);
};

struct TrainLogEntry {
  int iteration = 0;
  double train_objective = 0.0;  // mean over the iteration's batches
  double val_cross_entropy = 0.0;
  double val_penalty = 0.0;
  double val_objective = 0.0;
  bool improved = false;
};

struct TrainResult {
  ModelParameters params;  // from the best validation iteration
  Hyperparameters hp;
  PenaltyConfig penalty;
  std::uint64_t seed = 0;
  int fold = 0;
  int best_iteration = 0;
  AdamSettings adam;
  std::vector<TrainLogEntry> log;
};

// The training protocol: Adam over batches_per_iteration batches per
// iteration, early stopping on the validation objective (cross-entropy when
// lambda == 0, penalized objective otherwise) with the configured patience.
// Deterministic given the seed.
TrainResult train(const Cohort& cohort, const SplitPlan& split, int fold_index,
                  const Hyperparameters& hp, const PenaltyConfig& penalty,
                  std::uint64_t seed);

void save_checkpoint(const TrainResult& result, const std::string& path);
TrainResult load_checkpoint(const std::string& path);

}  // namespace fairsweep
