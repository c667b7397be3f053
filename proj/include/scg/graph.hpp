#pragma once

#include "scg/data.hpp"
#include "scg/tensor.hpp"

namespace scg {

enum class AdjacencyMode { binary, weighted };

// Per-slice bipartite operator in both directions. Before folding, each weight
// is a / sqrt(deg_u(t) * deg_s(t)); after folding both directions carry the
// slice-mixed weights.
struct NormalizedAdjacency {
  SparseSliceMatrix user_to_service;  // users x services x T
  SparseSliceMatrix service_to_user;  // services x users x T
  bool theta_applied = false;
};

// One triple (u, s, w) per observed (u, s, t): w = 1 in binary mode, the
// observed value in weighted mode.
SparseSliceMatrix build_adjacency(const SparseQosTensor& observed, AdjacencyMode mode);

// Symmetric bipartite normalization D_u^{-1/2} A D_s^{-1/2} within each slice.
// Zero-weight edges and edges touching zero-degree nodes are dropped.
NormalizedAdjacency normalize_adjacency(const SparseSliceMatrix& adjacency);

// Mixes both directions along the slice axis. Throws if already folded.
NormalizedAdjacency fold_theta(const NormalizedAdjacency& adjacency, const MixingMatrix& theta);

}  // namespace scg
