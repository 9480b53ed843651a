#pragma once

#include <map>

#include "regionedit/diffusion.hpp"
#include "regionedit/layout.hpp"

namespace regionedit {

// Per-frame self-attention features harvested during inversion.
struct FeatureStack {
  std::vector<Tensor> per_frame;  // each T x d_f

  int frames() const { return static_cast<int>(per_frame.size()); }
};

struct ClusterLayout {
  int k = 0;
  std::vector<std::vector<int>> labels;  // [frame][token], values in [0, k)
  std::vector<Tensor> centroids;         // per frame, k x d_f
};

struct KmeansResult {
  std::vector<int> labels;
  Tensor centroids;  // k x d_f
  double inertia = 0.0;
  int iterations = 0;
};

FeatureStack collect_features(const Trajectory& trajectory, int block, int node_index);

// Seeded k-means++ init then Lloyd until the max centroid shift drops below
// tol. Empty clusters are re-seeded to the point farthest from its assigned
// centroid; inertia is asserted non-increasing every iteration.
KmeansResult kmeans(const Tensor& features, int k, std::uint64_t seed, int max_iters = 100,
                    double tol = 1e-8);

// kmeans per frame; frame f uses substream seed  + f so frames differ but the
// whole run is reproducible.
ClusterLayout cluster_frames(const FeatureStack& features, int k, std::uint64_t seed,
                             int max_iters = 100, double tol = 1e-8);

// Relabels frames 1.. so their clusters line up with frame 0's, via the
// optimal one-to-one max-total-cosine assignment between centroid sets.
ClusterLayout match_clusters(const ClusterLayout& layout);

// Bound clusters become region masks at the given resolution; unbound
// clusters fall to background.
LayoutSet layout_from_clusters(const ClusterLayout& clusters,
                               const std::map<int, RegionSpec>& region_bindings, int height,
                               int width);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace regionedit
