#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "scg/data.hpp"
#include "scg/graph.hpp"
#include "scg/tensor.hpp"

namespace scg {

// n x d x T latent features; rows are nodes.
using FeatureTensor = DenseTensor3;

// Features of every propagation depth, layer 0 first.
struct LayerStack {
  std::vector<FeatureTensor> users;
  std::vector<FeatureTensor> services;
};

enum class Pooling { concatenation, sum, mean };

enum class Activation { identity, sigmoid };

// Per-layer d x d x T feature transforms of the heavier propagation rule.
struct FullLayerParams {
  std::vector<DenseTensor3> user_transforms;
  std::vector<DenseTensor3> service_transforms;
  Activation activation = Activation::sigmoid;
};

struct PooledFeatures {
  FeatureTensor users;
  FeatureTensor services;
};

// Uniform in [-b, b] with b = sqrt(6 / (n + d)).
FeatureTensor init_features(std::size_t nodes, std::size_t dim, std::size_t slices, std::uint64_t seed);

// Linear bipartite propagation:
//   U(l+1) = A * S(l),  S(l+1) = A^T * U(l)
// where * is the mixing-matrix product. `adjacency` must already carry the
// folded mixing matrix; features are transformed here every layer.
LayerStack propagate(const NormalizedAdjacency& adjacency, const MixingMatrix& theta, const FeatureTensor& users,
                     const FeatureTensor& services, std::size_t layers);

// U(l+1) = act(A * S(l) * W(l)), S(l+1) = act(A^T * U(l) * B(l)).
LayerStack propagate_full(const NormalizedAdjacency& adjacency, const MixingMatrix& theta,
                          const FeatureTensor& users, const FeatureTensor& services,
                          const FullLayerParams& params, std::size_t layers);

// Concatenation yields (L+1)*d columns, layer 0 first.
PooledFeatures pool(const LayerStack& stack, Pooling kind);

// Prediction for every (u, s, t): U(:,:,t) * S(:,:,t)^T.
DenseTensor3 predict_dense(const FeatureTensor& users, const FeatureTensor& services);
double predict_entry(const FeatureTensor& users, const FeatureTensor& services, std::size_t user,
                     std::size_t service, std::size_t slice);
std::vector<double> predict_entries(const FeatureTensor& users, const FeatureTensor& services,
                                    std::span<const QosEntry> entries);

std::string_view to_string(Pooling kind);
Pooling parse_pooling(std::string_view text);
std::string_view to_string(AdjacencyMode mode);
AdjacencyMode parse_adjacency_mode(std::string_view text);

}  // namespace scg
