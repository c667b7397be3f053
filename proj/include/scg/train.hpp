#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scg/data.hpp"
#include "scg/graph.hpp"
#include "scg/model.hpp"
#include "scg/tensor.hpp"

namespace scg {

struct TrainConfig {
  std::size_t latent_dim = 32;
  std::size_t layers = 3;
  std::size_t window = 2;
  Pooling pooling = Pooling::mean;
  double regularization = 1e-2;
  double learning_rate = 1e-3;
  std::size_t max_epochs = 1000;
  std::size_t patience = 30;
  std::uint64_t seed = 1;
  AdjacencyMode adjacency = AdjacencyMode::binary;
  // Share of the training entries held out for early stopping. With 0 the
  // monitored quantity is the RMSE on the training entries themselves.
  double validation_fraction = 0.1;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Throws ConfigError naming the violated rule.
void validate(const TrainConfig& config);
void validate(const TrainConfig& config, const TensorDims& dims);

// Ordered key/value view of every field, used for checkpoints, manifests and
// config files.
std::vector<std::pair<std::string, std::string>> to_key_values(const TrainConfig& config);
// Returns false when the key is not a TrainConfig field.
bool apply_setting(TrainConfig& config, const std::string& key, const std::string& value);

// Mixing matrix and Θ-folded normalized adjacency built from training data.
struct ModelGraph {
  MixingMatrix theta;
  NormalizedAdjacency adjacency;
};

ModelGraph build_model_graph(const TrainConfig& config, const SparseQosTensor& train);

// Trained parameters plus everything needed to predict with them.
struct Model {
  TrainConfig config;
  ModelGraph graph;
  FeatureTensor users;
  FeatureTensor services;

  PooledFeatures pooled() const;
  std::vector<double> predict(std::span<const QosEntry> entries) const;
};

// Sum of squared residuals over `observed` plus tau (|U0|^2 + |S0|^2).
double loss(std::span<const double> predictions, const SparseQosTensor& observed, const FeatureTensor& users,
            const FeatureTensor& services, double regularization);

// Objective value at (users, services) for the given graph and entries.
double objective(const TrainConfig& config, const ModelGraph& graph, const FeatureTensor& users,
                 const FeatureTensor& services, const SparseQosTensor& entries);

struct Gradients {
  FeatureTensor users;
  FeatureTensor services;
  double objective = 0.0;
  // Pooled features of the forward pass the gradient was taken at.
  PooledFeatures pooled;
};

// Exact gradient of the objective with respect to the layer-0 features,
// obtained by running the adjoint of the linear propagation.
Gradients gradients(const TrainConfig& config, const ModelGraph& graph, const FeatureTensor& users,
                    const FeatureTensor& services, const SparseQosTensor& entries);

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainState {
  std::size_t epoch = 0;
  std::size_t step = 0;
  FeatureTensor users;
  FeatureTensor services;
  FeatureTensor users_m, users_v;
  FeatureTensor services_m, services_v;
  double best_val_rmse = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;

  static TrainState start(FeatureTensor users, FeatureTensor services);
};

TrainState adam_step(TrainState state, const Gradients& grads, const AdamParams& params);

// Stops after `patience` consecutive observations without strict improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}
  // Returns true when training should stop after this observation.
  bool observe(double value);
  bool improved() const { return stale_ == 0; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct EpochRecord {
  std::size_t epoch;
  double train_loss;
  double val_rmse;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct FitResult {
  Model model;        // parameters of the best monitored epoch
  TrainState state;   // optimizer state when the loop ended
  std::vector<EpochRecord> history;
  std::size_t fit_entries = 0;
  std::size_t validation_entries = 0;
};

// Splits train into fitting and validation parts per config.
std::pair<SparseQosTensor, SparseQosTensor> carve_validation(const TrainConfig& config,
                                                             const SparseQosTensor& train);

// Full-batch training. Epoch e records the objective and monitored RMSE of the
// parameters before its update. The adjacency is built from all of split.train.
FitResult fit(const TrainConfig& config, const DatasetSplit& split);

// "epoch,train_loss,val_rmse" with round-trip exact numbers.
void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

double rmse_of(std::span<const double> predictions, const SparseQosTensor& observed);

}  // namespace scg
