#include "skelfall/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

namespace skelfall {

SkeletonTopology ntu_topology() {
  // Kinect v2 joint map used by the NTU RGB+D distribution, 0-indexed.
  // Joint 20 (spine shoulder) is the wiring hub and the center proxy.
  SkeletonTopology topo;
  topo.joint_count = 25;
  topo.center_joint = 20;
  topo.edges = {
      {0, 1},   {1, 20},  {2, 20},  {3, 2},   {4, 20},  {5, 4},
      {6, 5},   {7, 6},   {8, 20},  {9, 8},   {10, 9},  {11, 10},
      {12, 0},  {13, 12}, {14, 13}, {15, 14}, {16, 0},  {17, 16},
      {18, 17}, {19, 18}, {21, 22}, {22, 7},  {23, 24}, {24, 11},
  };
  return topo;
}

void validate_topology(const SkeletonTopology& topo) {
  const int n = topo.joint_count;
  if (n < 2) fail(ErrorCode::topology_mismatch, "topology needs at least 2 joints");
  if (static_cast<int>(topo.edges.size()) != n - 1)
    fail(ErrorCode::topology_mismatch,
         "topology must be a tree: expected " + std::to_string(n - 1) + " edges, got " +
             std::to_string(topo.edges.size()));
  if (topo.center_joint < 0 || topo.center_joint >= n)
    fail(ErrorCode::topology_mismatch, "center joint out of range");
  std::set<std::pair<int, int>> seen;
  for (auto [i, j] : topo.edges) {
    if (i < 0 || i >= n || j < 0 || j >= n)
      fail(ErrorCode::topology_mismatch, "edge (" + std::to_string(i) + ", " + std::to_string(j) +
                                             ") out of range for " + std::to_string(n) + " joints");
    if (i == j) fail(ErrorCode::topology_mismatch, "self loop at joint " + std::to_string(i));
    auto key = std::minmax(i, j);
    if (!seen.insert(key).second)
      fail(ErrorCode::topology_mismatch,
           "duplicate edge (" + std::to_string(key.first) + ", " + std::to_string(key.second) + ")");
  }
  hop_distance_matrix(topo);  // throws when disconnected
}

std::vector<std::vector<int>> hop_distance_matrix(const SkeletonTopology& topo) {
  const int n = topo.joint_count;
  std::vector<std::vector<int>> adj(n);
  for (auto [i, j] : topo.edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
  for (int s = 0; s < n; ++s) {
    dist[s][s] = 0;
    std::deque<int> queue{s};
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int w : adj[u])
        if (dist[s][w] < 0) {
          dist[s][w] = dist[s][u] + 1;
          queue.push_back(w);
        }
    }
    for (int j = 0; j < n; ++j)
      if (dist[s][j] < 0)
        fail(ErrorCode::topology_mismatch,
             "topology is disconnected: joint " + std::to_string(j) + " unreachable from " +
                 std::to_string(s));
  }
  return dist;
}

SkeletonTopology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open topology file: " + path);
  SkeletonTopology topo;
  topo.center_joint = -1;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    if (!have_header) {
      int n = 0, center = -1;
      if (!(ls >> n)) continue;  // blank/comment line before header
      ls >> center;
      topo.joint_count = n;
      topo.center_joint = center;
      have_header = true;
      continue;
    }
    int i, j;
    if (!(ls >> i)) continue;
    if (!(ls >> j))
      fail(ErrorCode::format, path + ":" + std::to_string(lineno) + ": expected `i j` edge line");
    topo.edges.emplace_back(i, j);
  }
  if (!have_header) fail(ErrorCode::format, path + ": missing joint-count header line");
  if (topo.center_joint < 0) {
    // Graph center: minimal eccentricity, lowest index on ties.
    topo.center_joint = 0;
    const auto dist = hop_distance_matrix(topo);
    int best = -1;
    for (int s = 0; s < topo.joint_count; ++s) {
      const int ecc = *std::max_element(dist[s].begin(), dist[s].end());
      if (best < 0 || ecc < best) {
        best = ecc;
        topo.center_joint = s;
      }
    }
  }
  validate_topology(topo);
  return topo;
}

AdjacencySet build_adjacency(const SkeletonTopology& topo, int hops) {
  if (hops < 1) fail(ErrorCode::invalid_argument, "hop limit must be >= 1, got " + std::to_string(hops));
  validate_topology(topo);
  const int n = topo.joint_count;
  const auto hop = hop_distance_matrix(topo);
  const int center = topo.center_joint;

  // Lambda_ii counts the <= H neighborhood including the node itself, i.e.
  // row sums of the masked matrix plus the identity self loop.
  std::vector<real> lam(n);
  for (int i = 0; i < n; ++i) {
    int deg = 0;
    for (int j = 0; j < n; ++j)
      if (hop[i][j] <= hops) ++deg;
    lam[i] = static_cast<real>(deg);
  }

  AdjacencySet out;
  out.hop_limit = hops;
  out.joint_count = n;
  for (auto& p : out.partitions) p = Tensor::zeros({n, n});
  auto& root = out.partitions[0].data();
  auto& centripetal = out.partitions[1].data();
  auto& centrifugal = out.partitions[2].data();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (hop[i][j] > hops) continue;
      const real norm = real(1) / std::sqrt(lam[i] * lam[j]);
      if (i == j)
        root[i * n + j] = norm;
      else if (hop[j][center] < hop[i][center])
        centripetal[i * n + j] = norm;
      else
        centrifugal[i * n + j] = norm;
    }
  return out;
}

EdgeImportance EdgeImportance::make(int joint_count) {
  EdgeImportance imp;
  for (auto& t : imp.theta)
    t = Tensor::ones({joint_count, joint_count}, true);
  return imp;
}

std::array<Tensor, AdjacencySet::kPartitions> effective_adjacency(
    const AdjacencySet& adj, const EdgeImportance& importance) {
  std::array<Tensor, AdjacencySet::kPartitions> out;
  for (int p = 0; p < AdjacencySet::kPartitions; ++p)
    out[p] = mul(adj.partitions[p], importance.theta[p]);
  return out;
}

}  // namespace skelfall
