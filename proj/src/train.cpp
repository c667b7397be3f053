#include "scg/train.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include "scg/error.hpp"
#include "scg/format.hpp"
#include "scg/rng.hpp"

namespace scg {

namespace {

// Seed streams derived from TrainConfig::seed.
constexpr std::uint64_t kUserInitStream = 1;
constexpr std::uint64_t kServiceInitStream = 2;
constexpr std::uint64_t kValidationStream = 3;

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("invalid value '" + text + "' for " + key);
  return value;
}

void require_entries_in(const SparseQosTensor& entries, const FeatureTensor& users, const FeatureTensor& services) {
  const auto& d = entries.dims();
  if (d.users != users.rows() || d.services != services.rows() || d.slices != users.slices()) {
    throw DimensionError("entries are " + std::to_string(d.users) + "x" + std::to_string(d.services) + "x" +
                         std::to_string(d.slices) + " but features cover " + std::to_string(users.rows()) + "x" +
                         std::to_string(services.rows()) + "x" + std::to_string(users.slices()));
  }
}

// Splits a pooled-feature gradient back onto the layers it was pooled from.
FeatureTensor unpool_layer(const FeatureTensor& pooled_grad, Pooling kind, std::size_t layer, std::size_t depth,
                           std::size_t dim) {
  switch (kind) {
    case Pooling::sum:
      return pooled_grad;
    case Pooling::mean: {
      FeatureTensor g = pooled_grad;
      g *= 1.0 / static_cast<double>(depth);
      return g;
    }
    case Pooling::concatenation: {
      FeatureTensor g(pooled_grad.rows(), dim, pooled_grad.slices());
      for (std::size_t t = 0; t < g.slices(); ++t) {
        for (std::size_t i = 0; i < g.rows(); ++i) {
          const auto src = pooled_grad.row(i, t).subspan(layer * dim, dim);
          std::copy(src.begin(), src.end(), g.row(i, t).begin());
        }
      }
      return g;
    }
  }
  return pooled_grad;
}

}  // namespace

void validate(const TrainConfig& c) {
  if (c.latent_dim == 0) throw ConfigError("latent dimension d must be positive");
  if (!(c.regularization >= 0.0) || !std::isfinite(c.regularization)) {
    throw ConfigError("regularization tau must be >= 0");
  }
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
    throw ConfigError("learning rate must be > 0");
  }
  if (c.max_epochs == 0) throw ConfigError("max epochs must be >= 1");
  if (c.patience == 0) throw ConfigError("patience must be >= 1");
  if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in [0, 1)");
  }
}

void validate(const TrainConfig& c, const TensorDims& dims) {
  validate(c);
  if (dims.slices == 0) throw ConfigError("dataset has no slices");
  if (2 * c.window + 1 > dims.slices) {
    throw ConfigError("temporal window K=" + std::to_string(c.window) + " violates 2K+1 <= T with T=" +
                      std::to_string(dims.slices));
  }
}

std::vector<std::pair<std::string, std::string>> to_key_values(const TrainConfig& c) {
  return {
      {"d", std::to_string(c.latent_dim)},
      {"L", std::to_string(c.layers)},
      {"K", std::to_string(c.window)},
      {"pooling", std::string(to_string(c.pooling))},
      {"tau", format_double(c.regularization)},
      {"lr", format_double(c.learning_rate)},
      {"epochs", std::to_string(c.max_epochs)},
      {"patience", std::to_string(c.patience)},
      {"seed", std::to_string(c.seed)},
      {"adjacency", std::string(to_string(c.adjacency))},
      {"val_fraction", format_double(c.validation_fraction)},
  };
}

bool apply_setting(TrainConfig& c, const std::string& key, const std::string& value) {
  if (key == "d") {
    c.latent_dim = parse_value<std::size_t>(key, value);
  } else if (key == "L") {
    c.layers = parse_value<std::size_t>(key, value);
  } else if (key == "K") {
    c.window = parse_value<std::size_t>(key, value);
  } else if (key == "pooling") {
    c.pooling = parse_pooling(value);
  } else if (key == "tau") {
    c.regularization = parse_value<double>(key, value);
  } else if (key == "lr") {
    c.learning_rate = parse_value<double>(key, value);
  } else if (key == "epochs") {
    c.max_epochs = parse_value<std::size_t>(key, value);
  } else if (key == "patience") {
    c.patience = parse_value<std::size_t>(key, value);
  } else if (key == "seed") {
    c.seed = parse_value<std::uint64_t>(key, value);
  } else if (key == "adjacency") {
    c.adjacency = parse_adjacency_mode(value);
  } else if (key == "val_fraction") {
    c.validation_fraction = parse_value<double>(key, value);
  } else {
    return false;
  }
  return true;
}

ModelGraph build_model_graph(const TrainConfig& config, const SparseQosTensor& train) {
  validate(config, train.dims());
  auto theta = MixingMatrix::build(train.dims().slices, config.window);
  auto adjacency = fold_theta(normalize_adjacency(build_adjacency(train, config.adjacency)), theta);
  return {std::move(theta), std::move(adjacency)};
}

PooledFeatures Model::pooled() const {
  return pool(propagate(graph.adjacency, graph.theta, users, services, config.layers), config.pooling);
}

std::vector<double> Model::predict(std::span<const QosEntry> entries) const {
  const auto features = pooled();
  return predict_entries(features.users, features.services, entries);
}

double loss(std::span<const double> predictions, const SparseQosTensor& observed, const FeatureTensor& users,
            const FeatureTensor& services, double regularization) {
  if (predictions.size() != observed.size()) {
    throw DimensionError(std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(observed.size()) + " observed entries");
  }
  double residual_sum = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const double r = observed.entries()[k].value - predictions[k];
    residual_sum += r * r;
  }
  return residual_sum + regularization * (frobenius_squared(users) + frobenius_squared(services));
}

double objective(const TrainConfig& config, const ModelGraph& graph, const FeatureTensor& users,
                 const FeatureTensor& services, const SparseQosTensor& entries) {
  require_entries_in(entries, users, services);
  const auto features =
      pool(propagate(graph.adjacency, graph.theta, users, services, config.layers), config.pooling);
  const auto predictions = predict_entries(features.users, features.services, entries.entries());
  return loss(predictions, entries, users, services, config.regularization);
}

Gradients gradients(const TrainConfig& config, const ModelGraph& graph, const FeatureTensor& users,
                    const FeatureTensor& services, const SparseQosTensor& entries) {
  require_entries_in(entries, users, services);
  if (!all_finite(users) || !all_finite(services)) throw DivergenceError("non-finite parameters", 0);

  const std::size_t layers = config.layers;
  const std::size_t depth = layers + 1;
  const std::size_t dim = users.cols();
  const auto stack = propagate(graph.adjacency, graph.theta, users, services, layers);
  Gradients out;
  out.pooled = pool(stack, config.pooling);
  const auto& pu = out.pooled.users;
  const auto& ps = out.pooled.services;

  // d/dU of sum (q - <u, s>)^2 is -2 r s, and symmetrically for s.
  FeatureTensor grad_pu(pu.rows(), pu.cols(), pu.slices());
  FeatureTensor grad_ps(ps.rows(), ps.cols(), ps.slices());
  double residual_sum = 0.0;
  for (const auto& e : entries.entries()) {
    const auto u = pu.row(e.user, e.slice);
    const auto s = ps.row(e.service, e.slice);
    double prediction = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) prediction += u[k] * s[k];
    const double r = e.value - prediction;
    residual_sum += r * r;
    auto gu = grad_pu.row(e.user, e.slice);
    auto gs = grad_ps.row(e.service, e.slice);
    for (std::size_t k = 0; k < u.size(); ++k) {
      gu[k] -= 2.0 * r * s[k];
      gs[k] -= 2.0 * r * u[k];
    }
  }
  out.objective =
      residual_sum + config.regularization * (frobenius_squared(users) + frobenius_squared(services));

  std::vector<FeatureTensor> grad_users, grad_services;
  grad_users.reserve(depth);
  grad_services.reserve(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    grad_users.push_back(unpool_layer(grad_pu, config.pooling, l, depth, dim));
    grad_services.push_back(unpool_layer(grad_ps, config.pooling, l, depth, dim));
  }

  // Adjoint of U(l+1) = A_us theta(S(l)) is theta^T(A_su g), and the same with
  // roles swapped; layer l+1 is final before layer l is touched.
  const auto theta_t = graph.theta.transposed();
  for (std::size_t l = layers; l-- > 0;) {
    grad_services[l] += theta_transform(sparse_facewise_apply(graph.adjacency.service_to_user, grad_users[l + 1]), theta_t);
    grad_users[l] += theta_transform(sparse_facewise_apply(graph.adjacency.user_to_service, grad_services[l + 1]), theta_t);
  }

  out.users = std::move(grad_users.front());
  out.services = std::move(grad_services.front());
  out.users.add_scaled(users, 2.0 * config.regularization);
  out.services.add_scaled(services, 2.0 * config.regularization);
  return out;
}

TrainState TrainState::start(FeatureTensor users, FeatureTensor services) {
  TrainState state;
  state.users_m = FeatureTensor(users.rows(), users.cols(), users.slices());
  state.users_v = state.users_m;
  state.services_m = FeatureTensor(services.rows(), services.cols(), services.slices());
  state.services_v = state.services_m;
  state.users = std::move(users);
  state.services = std::move(services);
  return state;
}

namespace {

void adam_update(FeatureTensor& param, FeatureTensor& m, FeatureTensor& v, const FeatureTensor& grad,
                 const AdamParams& p, double m_correction, double v_correction) {
  if (!param.same_shape(grad) || !param.same_shape(m) || !param.same_shape(v)) {
    throw DimensionError("optimizer state and gradient shapes differ");
  }
  auto x = param.values();
  auto mv = m.values();
  auto vv = v.values();
  const auto g = grad.values();
  for (std::size_t k = 0; k < x.size(); ++k) {
    mv[k] = p.beta1 * mv[k] + (1.0 - p.beta1) * g[k];
    vv[k] = p.beta2 * vv[k] + (1.0 - p.beta2) * g[k] * g[k];
    x[k] -= p.learning_rate * (mv[k] / m_correction) / (std::sqrt(vv[k] / v_correction) + p.epsilon);
  }
}

}  // namespace

TrainState adam_step(TrainState state, const Gradients& grads, const AdamParams& params) {
  state.step += 1;
  const double step = static_cast<double>(state.step);
  const double m_correction = 1.0 - std::pow(params.beta1, step);
  const double v_correction = 1.0 - std::pow(params.beta2, step);
  adam_update(state.users, state.users_m, state.users_v, grads.users, params, m_correction, v_correction);
  adam_update(state.services, state.services_m, state.services_v, grads.services, params, m_correction,
              v_correction);
  return state;
}

bool EarlyStopper::observe(double value) {
  if (value < best_) {
    best_ = value;
    stale_ = 0;
    return false;
  }
  ++stale_;
  return stale_ >= patience_;
}

std::pair<SparseQosTensor, SparseQosTensor> carve_validation(const TrainConfig& config,
                                                             const SparseQosTensor& train) {
  if (config.validation_fraction <= 0.0 || train.size() < 2) return {train, SparseQosTensor(train.dims(), {})};
  auto parts = split(train, 1.0 - config.validation_fraction, derive_seed(config.seed, kValidationStream));
  return {std::move(parts.train), std::move(parts.test)};
}

double rmse_of(std::span<const double> predictions, const SparseQosTensor& observed) {
  if (predictions.size() != observed.size() || observed.empty()) {
    throw DimensionError("rmse needs one prediction per observed entry");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const double r = observed.entries()[k].value - predictions[k];
    total += r * r;
  }
  return std::sqrt(total / static_cast<double>(predictions.size()));
}

FitResult fit(const TrainConfig& config, const DatasetSplit& data) {
  const auto& dims = data.train.dims();
  validate(config, dims);
  if (data.train.empty()) throw DataError("training split is empty");

  auto [fit_entries, validation] = carve_validation(config, data.train);
  const bool has_validation = !validation.empty();

  FitResult result;
  result.fit_entries = fit_entries.size();
  result.validation_entries = validation.size();
  result.model.config = config;
  result.model.graph = build_model_graph(config, data.train);

  auto state = TrainState::start(
      init_features(dims.users, config.latent_dim, dims.slices, derive_seed(config.seed, kUserInitStream)),
      init_features(dims.services, config.latent_dim, dims.slices, derive_seed(config.seed, kServiceInitStream)));
  const AdamParams adam{config.learning_rate};
  EarlyStopper stopper(config.patience);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    state.epoch = epoch;
    Gradients grads;
    try {
      grads = gradients(config, result.model.graph, state.users, state.services, fit_entries);
    } catch (const DivergenceError& err) {
      throw DivergenceError(std::string(err.what()) + " at epoch " + std::to_string(epoch), epoch);
    }
    if (!std::isfinite(grads.objective) || !all_finite(grads.users) || !all_finite(grads.services)) {
      throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch), epoch);
    }
    const auto& monitored = has_validation ? validation : fit_entries;
    const double monitored_rmse =
        rmse_of(predict_entries(grads.pooled.users, grads.pooled.services, monitored.entries()), monitored);
    result.history.push_back({epoch, grads.objective, monitored_rmse});

    const bool stop = stopper.observe(monitored_rmse);
    if (stopper.improved()) {
      state.best_val_rmse = monitored_rmse;
      state.best_epoch = epoch;
      result.model.users = state.users;
      result.model.services = state.services;
    }
    if (stop) break;
    state = adam_step(std::move(state), grads, adam);
  }
  result.state = std::move(state);
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,val_rmse\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_rmse) << '\n';
  }
}

}  // namespace scg
