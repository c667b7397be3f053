#include "scg/graph.hpp"

#include <cmath>

#include "scg/error.hpp"

namespace scg {

SparseSliceMatrix build_adjacency(const SparseQosTensor& observed, AdjacencyMode mode) {
  const auto& dims = observed.dims();
  std::vector<std::vector<SliceEntry>> per_slice(dims.slices);
  for (const auto& e : observed.entries()) {
    const double weight = mode == AdjacencyMode::binary ? 1.0 : e.value;
    per_slice[e.slice].push_back({e.user, e.service, weight});
  }
  return SparseSliceMatrix(dims.users, dims.services, std::move(per_slice));
}

NormalizedAdjacency normalize_adjacency(const SparseSliceMatrix& adjacency) {
  std::vector<std::vector<SliceEntry>> normalized(adjacency.slices());
  std::vector<double> user_degree(adjacency.rows());
  std::vector<double> service_degree(adjacency.cols());
  for (std::size_t t = 0; t < adjacency.slices(); ++t) {
    const auto entries = adjacency.slice(t);
    std::fill(user_degree.begin(), user_degree.end(), 0.0);
    std::fill(service_degree.begin(), service_degree.end(), 0.0);
    for (const auto& e : entries) {
      if (e.weight < 0.0 || !std::isfinite(e.weight)) {
        throw DataError("adjacency weights must be finite and non-negative (slice " + std::to_string(t) + ")");
      }
      user_degree[e.row] += e.weight;
      service_degree[e.col] += e.weight;
    }
    auto& out = normalized[t];
    out.reserve(entries.size());
    for (const auto& e : entries) {
      if (e.weight == 0.0) continue;
      out.push_back({e.row, e.col, e.weight / std::sqrt(user_degree[e.row] * service_degree[e.col])});
    }
  }
  NormalizedAdjacency result;
  result.user_to_service = SparseSliceMatrix(adjacency.rows(), adjacency.cols(), std::move(normalized));
  result.service_to_user = result.user_to_service.transposed();
  return result;
}

NormalizedAdjacency fold_theta(const NormalizedAdjacency& adjacency, const MixingMatrix& theta) {
  if (adjacency.theta_applied) throw ConfigError("mixing matrix already folded into adjacency");
  NormalizedAdjacency folded;
  folded.user_to_service = theta_transform(adjacency.user_to_service, theta);
  folded.service_to_user = folded.user_to_service.transposed();
  folded.theta_applied = true;
  return folded;
}

}  // namespace scg
