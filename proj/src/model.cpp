#include "fairsweep/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "fairsweep/errors.hpp"

namespace fairsweep {

namespace {

constexpr int kBatchGrid[] = {128, 256, 512};
constexpr double kDropoutGrid[] = {0.0, 0.25, 0.5, 0.75};
constexpr int kHiddenGrid[] = {128, 256};
constexpr double kLearningRateGrid[] = {1e-3, 1e-4, 1e-5};
constexpr int kLayerGrid[] = {1, 2, 3};

template <typename T, std::size_t N>
bool grid_contains(const T (&grid)[N], T value) {
  for (const T& g : grid) {
    if (g == value) return true;
  }
  return false;
}

}  // namespace

void Hyperparameters::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (dropout_prob < 0.0 || dropout_prob >= 1.0) {
    throw ConfigError("dropout_prob must be in [0, 1)");
  }
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (num_hidden_layers < 1) throw ConfigError("num_hidden_layers must be >= 1");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (batches_per_iteration < 1) throw ConfigError("batches_per_iteration must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
}

bool Hyperparameters::on_grid() const {
  return grid_contains(kBatchGrid, batch_size) &&
         grid_contains(kDropoutGrid, dropout_prob) &&
         grid_contains(kHiddenGrid, hidden_dim) &&
         grid_contains(kLearningRateGrid, learning_rate) &&
         grid_contains(kLayerGrid, num_hidden_layers);
}

Hyperparameters Hyperparameters::preset(const std::string& name) {
  // batch, dropout, hidden, lr, layers
  static const std::map<std::string, std::array<double, 5>> kPresets = {
      {"starr-hospital-mortality", {512, 0.75, 256, 1e-4, 3}},
      {"starr-length-of-stay", {256, 0.75, 128, 1e-4, 1}},
      {"starr-readmission", {512, 0.75, 128, 1e-5, 3}},
      {"optum-readmission", {512, 0.25, 128, 1e-5, 3}},
      {"optum-length-of-stay", {512, 0.25, 128, 1e-5, 3}},
      {"mimic-icu-los3", {128, 0.75, 256, 1e-5, 1}},
      {"mimic-icu-los7", {512, 0.75, 128, 1e-5, 3}},
      {"mimic-hospital-mortality", {128, 0.75, 256, 1e-5, 1}},
      {"mimic-icu-mortality", {128, 0.75, 256, 1e-5, 1}},
  };
  Hyperparameters hp;
  if (name == "synthetic-fast") {
    // Small network for synthetic cohorts; off the paper grid on purpose.
    hp.batch_size = 256;
    hp.dropout_prob = 0.0;
    hp.hidden_dim = 32;
    hp.learning_rate = 1e-3;
    hp.num_hidden_layers = 1;
    hp.max_iterations = 25;
    hp.batches_per_iteration = 40;
    hp.patience = 6;
    return hp;
  }
  const auto it = kPresets.find(name);
  if (it == kPresets.end()) {
    throw ConfigError("unknown hyperparameter preset '" + name + "'");
  }
  hp.batch_size = static_cast<int>(it->second[0]);
  hp.dropout_prob = it->second[1];
  hp.hidden_dim = static_cast<int>(it->second[2]);
  hp.learning_rate = it->second[3];
  hp.num_hidden_layers = static_cast<int>(it->second[4]);
  return hp;
}

std::vector<std::string> Hyperparameters::preset_names() {
  return {"starr-hospital-mortality", "starr-length-of-stay", "starr-readmission",
          "optum-readmission", "optum-length-of-stay", "mimic-icu-los3",
          "mimic-icu-los7", "mimic-hospital-mortality", "mimic-icu-mortality",
          "synthetic-fast"};
}

std::vector<Hyperparameters> Hyperparameters::random_search(int count,
                                                            std::uint64_t seed) {
  std::vector<Hyperparameters> grid;
  for (int batch : kBatchGrid) {
    for (double dropout : kDropoutGrid) {
      for (int hidden : kHiddenGrid) {
        for (double lr : kLearningRateGrid) {
          for (int layers : kLayerGrid) {
            Hyperparameters hp;
            hp.batch_size = batch;
            hp.dropout_prob = dropout;
            hp.hidden_dim = hidden;
            hp.learning_rate = lr;
            hp.num_hidden_layers = layers;
            grid.push_back(hp);
          }
        }
      }
    }
  }
  if (count < 1 || static_cast<std::size_t>(count) > grid.size()) {
    throw ConfigError("random_search: count must be in [1, " +
                      std::to_string(grid.size()) + "]");
  }
  Rng rng(seed);
  rng.shuffle(grid);
  grid.resize(count);
  return grid;
}

std::size_t ModelParameters::value_count(const std::vector<std::size_t>& dims) {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    total += dims[l + 1] * dims[l] + dims[l + 1];
  }
  return total;
}

std::size_t ModelParameters::weight_offset(std::size_t layer) const {
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layer; ++l) {
    offset += dims[l + 1] * dims[l] + dims[l + 1];
  }
  return offset;
}

std::size_t ModelParameters::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + dims[layer + 1] * dims[layer];
}

void ModelParameters::validate() const {
  if (dims.size() < 2) throw ConfigError("model needs at least one layer");
  if (dims.back() != 2) throw ConfigError("output layer must have width 2");
  for (std::size_t d : dims) {
    if (d == 0) throw ConfigError("zero-width layer");
  }
  if (values.size() != value_count(dims)) {
    throw ConfigError("parameter buffer does not match layer shapes");
  }
}

ModelParameters ModelParameters::initialize(std::size_t input_dim,
                                            const Hyperparameters& hp,
                                            Rng& rng) {
  hp.validate();
  if (input_dim == 0) throw ConfigError("input dimension must be positive");
  ModelParameters params;
  params.dims.push_back(input_dim);
  for (int l = 0; l < hp.num_hidden_layers; ++l) {
    params.dims.push_back(static_cast<std::size_t>(hp.hidden_dim));
  }
  params.dims.push_back(2);
  params.values.resize(value_count(params.dims));

  // Uniform +-1/sqrt(fan_in) for weights and biases, layer by layer.
  for (std::size_t l = 0; l + 1 < params.dims.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(params.dims[l]));
    double* w = params.values.data() + params.weight_offset(l);
    const std::size_t block = params.dims[l + 1] * params.dims[l] + params.dims[l + 1];
    for (std::size_t i = 0; i < block; ++i) w[i] = rng.uniform(-bound, bound);
  }
  return params;
}

BatchView make_batch(const Cohort& cohort, std::span<const std::size_t> indices) {
  BatchView batch;
  batch.feature_dim = cohort.vocab_size();
  batch.group_count = cohort.attribute().group_count();
  batch.rows.reserve(indices.size());
  batch.outcomes.reserve(indices.size());
  batch.groups.reserve(indices.size());
  for (std::size_t idx : indices) {
    const CohortRecord& rec = cohort[idx];
    batch.rows.push_back(&rec.features);
    batch.outcomes.push_back(rec.outcome);
    batch.groups.push_back(rec.group);
  }
  return batch;
}

namespace {

struct ForwardCache {
  // activations[l]: output of hidden layer l after ReLU and dropout, n x dim
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> dropout_masks;  // 0 or 1/(1-p)
  std::vector<double> logits;                      // n x 2
  std::vector<double> prob_pos;                    // softmax component 1
  ForwardOutput output;
};

ForwardCache run_forward(const ModelParameters& params, const BatchView& batch,
                         DropoutMode mode, double dropout_prob, Rng* rng) {
  params.validate();
  if (batch.feature_dim != params.dims[0]) {
    throw ConfigError("batch feature dimension " + std::to_string(batch.feature_dim) +
                      " does not match model input " + std::to_string(params.dims[0]));
  }
  if (mode == DropoutMode::train && dropout_prob > 0.0 && rng == nullptr) {
    throw ConfigError("train-mode dropout needs an rng");
  }
  const std::size_t n = batch.size();
  const std::size_t layers = params.layer_count();
  const bool apply_dropout = mode == DropoutMode::train && dropout_prob > 0.0;
  const double keep = 1.0 - dropout_prob;

  ForwardCache cache;
  cache.activations.resize(layers - 1);
  cache.dropout_masks.resize(layers - 1);

  // Hidden layers.
  const std::vector<double>* previous = nullptr;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    const std::size_t out_dim = params.dims[l + 1];
    const std::size_t in_dim = params.dims[l];
    const double* weight = params.values.data() + params.weight_offset(l);
    const double* bias = params.values.data() + params.bias_offset(l);
    auto& act = cache.activations[l];
    act.assign(n * out_dim, 0.0);
    auto& mask = cache.dropout_masks[l];
    if (apply_dropout) mask.assign(n * out_dim, 0.0);

    for (std::size_t r = 0; r < n; ++r) {
      double* row_out = act.data() + r * out_dim;
      if (l == 0) {
        for (std::size_t i = 0; i < out_dim; ++i) {
          double z = bias[i];
          const double* w_row = weight + i * in_dim;
          for (std::uint32_t j : *batch.rows[r]) z += w_row[j];
          row_out[i] = z;
        }
      } else {
        const double* row_in = previous->data() + r * in_dim;
        for (std::size_t i = 0; i < out_dim; ++i) {
          double z = bias[i];
          const double* w_row = weight + i * in_dim;
          for (std::size_t j = 0; j < in_dim; ++j) z += w_row[j] * row_in[j];
          row_out[i] = z;
        }
      }
      for (std::size_t i = 0; i < out_dim; ++i) {
        double a = row_out[i] > 0.0 ? row_out[i] : 0.0;  // ReLU
        if (apply_dropout) {
          const double m = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
          mask[r * out_dim + i] = m;
          a *= m;
        }
        row_out[i] = a;
      }
    }
    previous = &act;
  }

  // Output layer: 2 logits, then log-softmax.
  {
    const std::size_t l = layers - 1;
    const std::size_t in_dim = params.dims[l];
    const double* weight = params.values.data() + params.weight_offset(l);
    const double* bias = params.values.data() + params.bias_offset(l);
    cache.logits.assign(n * 2, 0.0);
    cache.prob_pos.assign(n, 0.0);
    cache.output.log_pos.assign(n, 0.0);
    cache.output.log_neg.assign(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      double z0, z1;
      if (layers == 1) {
        z0 = bias[0];
        z1 = bias[1];
        for (std::uint32_t j : *batch.rows[r]) {
          z0 += weight[j];
          z1 += weight[in_dim + j];
        }
      } else {
        const double* row_in = previous->data() + r * in_dim;
        z0 = bias[0];
        z1 = bias[1];
        for (std::size_t j = 0; j < in_dim; ++j) {
          z0 += weight[j] * row_in[j];
          z1 += weight[in_dim + j] * row_in[j];
        }
      }
      cache.logits[r * 2] = z0;
      cache.logits[r * 2 + 1] = z1;
      const double m = std::max(z0, z1);
      const double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
      cache.output.log_neg[r] = z0 - lse;
      cache.output.log_pos[r] = z1 - lse;
      cache.prob_pos[r] = std::exp(z1 - lse);
    }
  }
  return cache;
}

}  // namespace

ForwardOutput forward(const ModelParameters& params, const BatchView& batch,
                      DropoutMode mode, double dropout_prob, Rng* rng) {
  return run_forward(params, batch, mode, dropout_prob, rng).output;
}

std::vector<double> predict(const ModelParameters& params, const BatchView& batch) {
  auto cache = run_forward(params, batch, DropoutMode::eval, 0.0, nullptr);
  return std::move(cache.prob_pos);
}

LossBreakdown penalized_loss_and_grad(const ModelParameters& params,
                                      const BatchView& batch,
                                      const PenaltyConfig& penalty,
                                      DropoutMode mode, double dropout_prob,
                                      Rng* rng, std::vector<double>* grad) {
  penalty.validate();
  if (batch.size() == 0) throw ConfigError("penalized_loss_and_grad: empty batch");
  const std::size_t n = batch.size();
  ForwardCache cache = run_forward(params, batch, mode, dropout_prob, rng);

  LossBreakdown loss;
  for (std::size_t r = 0; r < n; ++r) {
    loss.cross_entropy -= batch.outcomes[r] == 1 ? cache.output.log_pos[r]
                                                 : cache.output.log_neg[r];
  }
  loss.cross_entropy /= static_cast<double>(n);

  std::vector<double> penalty_grad_pos;  // dR / d log_pos
  std::vector<double> penalty_grad_neg;  // dR / d log_neg (both-components mode)
  if (penalty.lambda > 0.0) {
    auto component_penalty = [&](const std::vector<double>& values,
                                 std::vector<double>* component_grad) {
      double bandwidth = 1.0;
      if (penalty.distance == Distance::mmd) {
        bandwidth = resolve_bandwidth(values, penalty.bandwidth);
        loss.bandwidth = bandwidth;
      }
      if (component_grad != nullptr) {
        component_grad->assign(n, 0.0);
        return regularizer_with_grad(values, batch.outcomes, batch.groups,
                                     batch.group_count, penalty, bandwidth,
                                     *component_grad);
      }
      return regularizer(values, batch.outcomes, batch.groups, batch.group_count,
                         penalty, bandwidth);
    };
    loss.penalty = component_penalty(cache.output.log_pos,
                                     grad != nullptr ? &penalty_grad_pos : nullptr);
    if (penalty.on_both_components) {
      loss.penalty += component_penalty(
          cache.output.log_neg, grad != nullptr ? &penalty_grad_neg : nullptr);
    }
  }
  loss.objective = loss.cross_entropy + penalty.lambda * loss.penalty;
  if (grad == nullptr) return loss;

  grad->assign(params.values.size(), 0.0);
  const std::size_t layers = params.layer_count();
  const double inv_n = 1.0 / static_cast<double>(n);

  // d objective / d logits, via log-softmax backward. log_pos is logit 1.
  std::vector<double> delta(n * 2, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double d_log_neg = batch.outcomes[r] == 1 ? 0.0 : -inv_n;
    double d_log_pos = batch.outcomes[r] == 1 ? -inv_n : 0.0;
    if (!penalty_grad_pos.empty()) d_log_pos += penalty.lambda * penalty_grad_pos[r];
    if (!penalty_grad_neg.empty()) d_log_neg += penalty.lambda * penalty_grad_neg[r];
    const double total = d_log_neg + d_log_pos;
    const double p1 = cache.prob_pos[r];
    delta[r * 2] = d_log_neg - (1.0 - p1) * total;
    delta[r * 2 + 1] = d_log_pos - p1 * total;
  }

  // Backward through the layers.
  std::vector<double> delta_below;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t out_dim = params.dims[l + 1];
    const std::size_t in_dim = params.dims[l];
    const double* weight = params.values.data() + params.weight_offset(l);
    double* w_grad = grad->data() + params.weight_offset(l);
    double* b_grad = grad->data() + params.bias_offset(l);
    const bool input_layer = l == 0;
    const std::vector<double>* acts = input_layer ? nullptr : &cache.activations[l - 1];

    if (!input_layer) delta_below.assign(n * in_dim, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const double* d_row = delta.data() + r * out_dim;
      for (std::size_t i = 0; i < out_dim; ++i) {
        const double d = d_row[i];
        if (d == 0.0) continue;
        b_grad[i] += d;
        double* w_row = w_grad + i * in_dim;
        if (input_layer) {
          for (std::uint32_t j : *batch.rows[r]) w_row[j] += d;
        } else {
          const double* a_row = acts->data() + r * in_dim;
          double* db_row = delta_below.data() + r * in_dim;
          const double* weight_row = weight + i * in_dim;
          for (std::size_t j = 0; j < in_dim; ++j) {
            w_row[j] += d * a_row[j];
            db_row[j] += d * weight_row[j];
          }
        }
      }
    }
    if (input_layer) break;

    // Through dropout and ReLU of hidden layer l-1.
    const auto& act = cache.activations[l - 1];
    const auto& mask = cache.dropout_masks[l - 1];
    for (std::size_t t = 0; t < delta_below.size(); ++t) {
      double d = delta_below[t];
      if (!mask.empty()) d *= mask[t];
      delta_below[t] = act[t] > 0.0 ? d : 0.0;
    }
    delta.swap(delta_below);
  }
  return loss;
}

FoldPartition resolve_partition(const Cohort& cohort, const SplitPlan& split,
                                int fold_index) {
  if (fold_index < 0 || static_cast<std::size_t>(fold_index) >= split.fold_count()) {
    throw ConfigError("fold index " + std::to_string(fold_index) +
                      " out of range for " + std::to_string(split.fold_count()) +
                      " folds");
  }
  std::unordered_map<std::string, std::size_t> position;
  position.reserve(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    position[cohort[i].id] = i;
  }
  std::vector<char> used(cohort.size(), 0);
  auto lookup = [&](const std::string& id) {
    const auto it = position.find(id);
    if (it == position.end()) {
      throw DataError("split references unknown record '" + id + "'");
    }
    if (used[it->second]) {
      throw DataError("split references record '" + id + "' twice");
    }
    used[it->second] = 1;
    return it->second;
  };

  FoldPartition part;
  for (const auto& id : split.test_ids) part.test.push_back(lookup(id));
  for (std::size_t f = 0; f < split.fold_count(); ++f) {
    auto& dest = static_cast<int>(f) == fold_index ? part.validation : part.train;
    for (const auto& id : split.folds[f]) dest.push_back(lookup(id));
  }
  return part;
}

TrainState::TrainState(std::size_t parameter_count, std::uint64_t seed)
    : moment1(parameter_count, 0.0),
      moment2(parameter_count, 0.0),
      batch_rng(Rng::derive(seed, 1)),
      dropout_rng(Rng::derive(seed, 2)) {}

TrainResult train(const Cohort& cohort, const SplitPlan& split, int fold_index,
                  const Hyperparameters& hp, const PenaltyConfig& penalty,
                  std::uint64_t seed) {
  hp.validate();
  penalty.validate();
  FoldPartition part = resolve_partition(cohort, split, fold_index);
  if (part.train.empty()) throw DataError("training partition is empty");
  if (part.validation.empty()) throw DataError("validation partition is empty");

  Rng init_rng(Rng::derive(seed, 0));
  ModelParameters params =
      ModelParameters::initialize(cohort.vocab_size(), hp, init_rng);
  TrainState state(params.values.size(), seed);
  const AdamSettings adam;

  const BatchView validation = make_batch(cohort, part.validation);
  const bool penalized = penalty.lambda > 0.0;

  // Shuffled index stream over the training split; reshuffles on wrap, so an
  // iteration's 100 batches may revisit records when the split is small.
  std::vector<std::size_t> stream = part.train;
  state.batch_rng.shuffle(stream);
  std::size_t cursor = 0;
  auto next_batch_indices = [&](std::vector<std::size_t>& out) {
    out.clear();
    for (int i = 0; i < hp.batch_size; ++i) {
      if (cursor == stream.size()) {
        state.batch_rng.shuffle(stream);
        cursor = 0;
      }
      out.push_back(stream[cursor++]);
    }
  };

  TrainResult result;
  result.hp = hp;
  result.penalty = penalty;
  result.seed = seed;
  result.fold = fold_index;
  result.adam = adam;
  ModelParameters best_params = params;
  std::vector<double> grad;
  std::vector<std::size_t> batch_indices;

  for (int iteration = 1; iteration <= hp.max_iterations; ++iteration) {
    double train_objective = 0.0;
    for (int b = 0; b < hp.batches_per_iteration; ++b) {
      next_batch_indices(batch_indices);
      const BatchView batch = make_batch(cohort, batch_indices);
      const LossBreakdown loss = penalized_loss_and_grad(
          params, batch, penalty, DropoutMode::train, hp.dropout_prob,
          &state.dropout_rng, &grad);
      train_objective += loss.objective;

      ++state.step;
      const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.step));
      const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.step));
      for (std::size_t i = 0; i < params.values.size(); ++i) {
        const double g = grad[i];
        state.moment1[i] = adam.beta1 * state.moment1[i] + (1.0 - adam.beta1) * g;
        state.moment2[i] = adam.beta2 * state.moment2[i] + (1.0 - adam.beta2) * g * g;
        const double m_hat = state.moment1[i] / bc1;
        const double v_hat = state.moment2[i] / bc2;
        params.values[i] -= hp.learning_rate * m_hat / (std::sqrt(v_hat) + adam.epsilon);
      }
    }
    train_objective /= static_cast<double>(hp.batches_per_iteration);

    // Validation objective in eval mode; early stopping uses plain
    // cross-entropy for unpenalized runs and the penalized loss otherwise.
    const LossBreakdown val = penalized_loss_and_grad(
        params, validation, penalty, DropoutMode::eval, 0.0, nullptr, nullptr);
    const double val_objective = penalized ? val.objective : val.cross_entropy;

    TrainLogEntry entry;
    entry.iteration = iteration;
    entry.train_objective = train_objective;
    entry.val_cross_entropy = val.cross_entropy;
    entry.val_penalty = val.penalty;
    entry.val_objective = val_objective;
    entry.improved = val_objective < state.best_objective;
    result.log.push_back(entry);

    if (entry.improved) {
      state.best_objective = val_objective;
      state.since_improvement = 0;
      best_params = params;
      result.best_iteration = iteration;
    } else {
      ++state.since_improvement;
      if (state.since_improvement >= hp.patience) break;
    }
  }

  result.params = std::move(best_params);
  return result;
}

void save_checkpoint(const TrainResult& result, const std::string& path) {
  nlohmann::json doc;
  doc["format"] = "fairsweep-checkpoint";
  doc["version"] = 1;
  doc["hyperparameters"] = {{"batch_size", result.hp.batch_size},
                            {"dropout_prob", result.hp.dropout_prob},
                            {"hidden_dim", result.hp.hidden_dim},
                            {"learning_rate", result.hp.learning_rate},
                            {"num_hidden_layers", result.hp.num_hidden_layers},
                            {"max_iterations", result.hp.max_iterations},
                            {"batches_per_iteration", result.hp.batches_per_iteration},
                            {"patience", result.hp.patience}};
  doc["penalty"] = {{"criterion", to_string(result.penalty.criterion)},
                    {"distance", to_string(result.penalty.distance)},
                    {"lambda", result.penalty.lambda},
                    {"bandwidth", result.penalty.bandwidth.median
                                      ? nlohmann::json("median")
                                      : nlohmann::json(result.penalty.bandwidth.sigma)},
                    {"on_both_components", result.penalty.on_both_components}};
  doc["seed"] = result.seed;
  doc["fold"] = result.fold;
  doc["best_iteration"] = result.best_iteration;
  doc["adam"] = {{"beta1", result.adam.beta1},
                 {"beta2", result.adam.beta2},
                 {"epsilon", result.adam.epsilon}};
  doc["dims"] = result.params.dims;
  doc["values"] = result.params.values;
  auto& log = doc["log"] = nlohmann::json::array();
  for (const auto& e : result.log) {
    log.push_back({{"iteration", e.iteration},
                   {"train_objective", e.train_objective},
                   {"val_cross_entropy", e.val_cross_entropy},
                   {"val_penalty", e.val_penalty},
                   {"val_objective", e.val_objective},
                   {"improved", e.improved}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out << doc.dump(2) << "\n";
  if (!out) throw DataError("write failed for '" + path + "'");
}

TrainResult load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint '" + path + "': " + e.what());
  }
  if (doc.value("format", "") != "fairsweep-checkpoint") {
    throw DataError("'" + path + "' is not a checkpoint file");
  }
  TrainResult result;
  const auto& hp = doc.at("hyperparameters");
  result.hp.batch_size = hp.at("batch_size").get<int>();
  result.hp.dropout_prob = hp.at("dropout_prob").get<double>();
  result.hp.hidden_dim = hp.at("hidden_dim").get<int>();
  result.hp.learning_rate = hp.at("learning_rate").get<double>();
  result.hp.num_hidden_layers = hp.at("num_hidden_layers").get<int>();
  result.hp.max_iterations = hp.at("max_iterations").get<int>();
  result.hp.batches_per_iteration = hp.at("batches_per_iteration").get<int>();
  result.hp.patience = hp.at("patience").get<int>();
  const auto& pen = doc.at("penalty");
  result.penalty.criterion = parse_criterion(pen.at("criterion").get<std::string>());
  result.penalty.distance = parse_distance(pen.at("distance").get<std::string>());
  result.penalty.lambda = pen.at("lambda").get<double>();
  if (pen.at("bandwidth").is_string()) {
    result.penalty.bandwidth = BandwidthPolicy::median_heuristic();
  } else {
    result.penalty.bandwidth = BandwidthPolicy::fixed(pen.at("bandwidth").get<double>());
  }
  result.penalty.on_both_components = pen.value("on_both_components", false);
  result.seed = doc.at("seed").get<std::uint64_t>();
  result.fold = doc.at("fold").get<int>();
  result.best_iteration = doc.at("best_iteration").get<int>();
  result.adam.beta1 = doc.at("adam").at("beta1").get<double>();
  result.adam.beta2 = doc.at("adam").at("beta2").get<double>();
  result.adam.epsilon = doc.at("adam").at("epsilon").get<double>();
  result.params.dims = doc.at("dims").get<std::vector<std::size_t>>();
  result.params.values = doc.at("values").get<std::vector<double>>();
  result.params.validate();
  for (const auto& e : doc.at("log")) {
    TrainLogEntry entry;
    entry.iteration = e.at("iteration").get<int>();
    entry.train_objective = e.at("train_objective").get<double>();
    entry.val_cross_entropy = e.at("val_cross_entropy").get<double>();
    entry.val_penalty = e.at("val_penalty").get<double>();
    entry.val_objective = e.at("val_objective").get<double>();
    entry.improved = e.at("improved").get<bool>();
    result.log.push_back(entry);
  }
  return result;
}

}  // namespace fairsweep
