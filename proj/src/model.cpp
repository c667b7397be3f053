#include "scg/model.hpp"

#include <cmath>
#include <string>

#include "scg/error.hpp"
#include "scg/rng.hpp"

namespace scg {

namespace {

void require_finite(const FeatureTensor& x, std::size_t layer) {
  if (!all_finite(x)) {
    throw DivergenceError("non-finite features at propagation layer " + std::to_string(layer), 0);
  }
}

void check_propagation_inputs(const NormalizedAdjacency& adjacency, const MixingMatrix& theta,
                              const FeatureTensor& users, const FeatureTensor& services) {
  const auto& a = adjacency.user_to_service;
  if (a.rows() != users.rows() || a.cols() != services.rows()) {
    throw DimensionError("adjacency is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " but features have " + std::to_string(users.rows()) + " users and " +
                         std::to_string(services.rows()) + " services");
  }
  if (users.cols() != services.cols() || users.slices() != services.slices() || a.slices() != users.slices() ||
      theta.slices() != users.slices()) {
    throw DimensionError("feature dims and slice counts must agree");
  }
}

void activate(DenseTensor3& x, Activation activation) {
  if (activation == Activation::identity) return;
  for (double& v : x.values()) v = 1.0 / (1.0 + std::exp(-v));
}

}  // namespace

FeatureTensor init_features(std::size_t nodes, std::size_t dim, std::size_t slices, std::uint64_t seed) {
  if (nodes == 0 || dim == 0 || slices == 0) throw ConfigError("feature dims must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(nodes + dim));
  FeatureTensor x(nodes, dim, slices);
  Rng rng(seed);
  for (double& v : x.values()) v = rng.uniform(-bound, bound);
  return x;
}

LayerStack propagate(const NormalizedAdjacency& adjacency, const MixingMatrix& theta, const FeatureTensor& users,
                     const FeatureTensor& services, std::size_t layers) {
  check_propagation_inputs(adjacency, theta, users, services);
  LayerStack stack;
  stack.users.reserve(layers + 1);
  stack.services.reserve(layers + 1);
  stack.users.push_back(users);
  stack.services.push_back(services);
  for (std::size_t l = 0; l < layers; ++l) {
    auto next_users = sparse_facewise_apply(adjacency.user_to_service, theta_transform(stack.services[l], theta));
    auto next_services = sparse_facewise_apply(adjacency.service_to_user, theta_transform(stack.users[l], theta));
    require_finite(next_users, l + 1);
    require_finite(next_services, l + 1);
    stack.users.push_back(std::move(next_users));
    stack.services.push_back(std::move(next_services));
  }
  return stack;
}

LayerStack propagate_full(const NormalizedAdjacency& adjacency, const MixingMatrix& theta,
                          const FeatureTensor& users, const FeatureTensor& services,
                          const FullLayerParams& params, std::size_t layers) {
  check_propagation_inputs(adjacency, theta, users, services);
  if (params.user_transforms.size() < layers || params.service_transforms.size() < layers) {
    throw DimensionError("need " + std::to_string(layers) + " transform tensors per side");
  }
  const std::size_t d = users.cols();
  for (std::size_t l = 0; l < layers; ++l) {
    for (const auto* w : {&params.user_transforms[l], &params.service_transforms[l]}) {
      if (w->rows() != d || w->cols() != d || w->slices() != users.slices()) {
        throw DimensionError("layer transforms must be " + std::to_string(d) + "x" + std::to_string(d) + "x" +
                             std::to_string(users.slices()));
      }
    }
  }
  LayerStack stack;
  stack.users.push_back(users);
  stack.services.push_back(services);
  for (std::size_t l = 0; l < layers; ++l) {
    auto aggregated_users =
        sparse_facewise_apply(adjacency.user_to_service, theta_transform(stack.services[l], theta));
    auto aggregated_services =
        sparse_facewise_apply(adjacency.service_to_user, theta_transform(stack.users[l], theta));
    auto next_users = theta_product(aggregated_users, params.user_transforms[l], theta);
    auto next_services = theta_product(aggregated_services, params.service_transforms[l], theta);
    activate(next_users, params.activation);
    activate(next_services, params.activation);
    require_finite(next_users, l + 1);
    require_finite(next_services, l + 1);
    stack.users.push_back(std::move(next_users));
    stack.services.push_back(std::move(next_services));
  }
  return stack;
}

namespace {

FeatureTensor pool_side(const std::vector<FeatureTensor>& layers, Pooling kind) {
  const auto& first = layers.front();
  for (const auto& layer : layers) {
    if (!layer.same_shape(first)) throw DimensionError("layer shapes differ within a stack");
  }
  if (kind == Pooling::concatenation) {
    const std::size_t d = first.cols();
    FeatureTensor out(first.rows(), d * layers.size(), first.slices());
    for (std::size_t t = 0; t < first.slices(); ++t) {
      for (std::size_t i = 0; i < first.rows(); ++i) {
        auto dst = out.row(i, t);
        for (std::size_t l = 0; l < layers.size(); ++l) {
          const auto src = layers[l].row(i, t);
          std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(l * d));
        }
      }
    }
    return out;
  }
  FeatureTensor out = first;
  for (std::size_t l = 1; l < layers.size(); ++l) out += layers[l];
  if (kind == Pooling::mean) out *= 1.0 / static_cast<double>(layers.size());
  return out;
}

}  // namespace

PooledFeatures pool(const LayerStack& stack, Pooling kind) {
  if (stack.users.empty() || stack.services.empty()) throw DimensionError("cannot pool an empty layer stack");
  if (stack.users.size() != stack.services.size()) throw DimensionError("user and service stacks differ in depth");
  return {pool_side(stack.users, kind), pool_side(stack.services, kind)};
}

DenseTensor3 predict_dense(const FeatureTensor& users, const FeatureTensor& services) {
  return facewise_product(users, facewise_transpose(services));
}

double predict_entry(const FeatureTensor& users, const FeatureTensor& services, std::size_t user,
                     std::size_t service, std::size_t slice) {
  const auto u = users.row(user, slice);
  const auto s = services.row(service, slice);
  double total = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) total += u[k] * s[k];
  return total;
}

std::vector<double> predict_entries(const FeatureTensor& users, const FeatureTensor& services,
                                    std::span<const QosEntry> entries) {
  if (users.cols() != services.cols() || users.slices() != services.slices()) {
    throw DimensionError("user and service features must share dimension and slice count");
  }
  std::vector<double> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.user >= users.rows() || e.service >= services.rows() || e.slice >= users.slices()) {
      throw DimensionError("entry outside feature dims");
    }
    out.push_back(predict_entry(users, services, e.user, e.service, e.slice));
  }
  return out;
}

std::string_view to_string(Pooling kind) {
  switch (kind) {
    case Pooling::concatenation: return "concat";
    case Pooling::sum: return "sum";
    case Pooling::mean: return "mean";
  }
  return "mean";
}

Pooling parse_pooling(std::string_view text) {
  if (text == "concat" || text == "concatenation") return Pooling::concatenation;
  if (text == "sum") return Pooling::sum;
  if (text == "mean") return Pooling::mean;
  throw ConfigError("unknown pooling '" + std::string(text) + "' (expected concat, sum or mean)");
}

std::string_view to_string(AdjacencyMode mode) {
  return mode == AdjacencyMode::binary ? "binary" : "weighted";
}

AdjacencyMode parse_adjacency_mode(std::string_view text) {
  if (text == "binary") return AdjacencyMode::binary;
  if (text == "weighted") return AdjacencyMode::weighted;
  throw ConfigError("unknown adjacency mode '" + std::string(text) + "' (expected binary or weighted)");
}

}  // namespace scg
