#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "skelfall/tensor.hpp"

namespace skelfall {

/// Skeleton wiring: joints are nodes, bones are edges. Must be a connected
/// tree; center_joint is the gravity-center proxy for partitioning.
struct SkeletonTopology {
  int joint_count = 0;
  std::vector<std::pair<int, int>> edges;
  int center_joint = 0;
};

/// The 25-joint NTU RGB+D skeleton with the spine hub as center.
SkeletonTopology ntu_topology();

/// Plain-text format: first non-comment line `N` (optionally `N center`),
/// then one `i j` edge per line. Lines starting with '#' are ignored.
/// When no center is given, the node with minimal eccentricity is used.
SkeletonTopology load_topology(const std::string& path);

void validate_topology(const SkeletonTopology& topo);

/// All-pairs shortest path edge counts (BFS per source).
std::vector<std::vector<int>> hop_distance_matrix(const SkeletonTopology& topo);

/// Three normalized partition matrices over the <= H hop neighborhood:
/// root (diagonal), centripetal (closer to center), centrifugal (rest).
struct AdjacencySet {
  static constexpr int kPartitions = 3;
  int hop_limit = 0;
  int joint_count = 0;
  std::array<Tensor, kPartitions> partitions;
};

AdjacencySet build_adjacency(const SkeletonTopology& topo, int hops);

/// Per-layer learnable reweighting of the static partitions, all-ones at init.
struct EdgeImportance {
  std::array<Tensor, AdjacencySet::kPartitions> theta;
  static EdgeImportance make(int joint_count);
};

/// A_p (elementwise) theta_p for each partition; differentiable in theta.
std::array<Tensor, AdjacencySet::kPartitions> effective_adjacency(
    const AdjacencySet& adj, const EdgeImportance& importance);

}  // namespace skelfall
