#include "regionedit/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace regionedit {

FeatureStack collect_features(const Trajectory& trajectory, int block, int node_index) {
  auto it = trajectory.features.find({block, node_index});
  if (it == trajectory.features.end()) throw std::runtime_error("features not captured");
  FeatureStack out;
  out.per_frame = it->second;
  return out;
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

KmeansResult kmeans(const Tensor& features, int k, std::uint64_t seed, int max_iters, double tol) {
  const std::size_t n = features.rows(), d = features.cols();
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw ValidationError("kmeans: k must be in [1, point count]");

  Rng rng = Rng(seed).substream("kmeans");
  Tensor centroids = Tensor::zeros({static_cast<std::size_t>(k), d});

  // k-means++ seeding: first uniform, then proportional to squared distance.
  std::vector<double> dist2(n, std::numeric_limits<double>::max());
  {
    const std::size_t first = rng.uniform_int(static_cast<int>(n));
    std::copy(features.row(first), features.row(first) + d, centroids.row(0));
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        dist2[i] = std::min(dist2[i], sq_dist(features.row(i), centroids.row(c - 1), d));
        total += dist2[i];
      }
      std::size_t pick = 0;
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += dist2[i];
          if (acc >= target) {
            pick = i;
            break;
          }
        }
      } else {
        pick = rng.uniform_int(static_cast<int>(n));
      }
      std::copy(features.row(pick), features.row(pick) + d, centroids.row(c));
    }
  }

  KmeansResult result;
  result.labels.assign(n, 0);
  double prev_inertia = std::numeric_limits<double>::max();
  for (int iter = 0; iter < max_iters; ++iter) {
    // Assign. Ties go to the lowest cluster index.
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = sq_dist(features.row(i), centroids.row(0), d);
      int best_c = 0;
      for (int c = 1; c < k; ++c) {
        const double dd = sq_dist(features.row(i), centroids.row(c), d);
        if (dd < best) {
          best = dd;
          best_c = c;
        }
      }
      result.labels[i] = best_c;
      inertia += best;
    }
    if (inertia > prev_inertia + 1e-9 * (1.0 + prev_inertia))
      throw std::runtime_error("kmeans: inertia increased");
    // Update.
    Tensor next = Tensor::zeros(centroids.shape);
    std::vector<long> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      double* c = next.row(result.labels[i]);
      const double* f = features.row(i);
      for (std::size_t j = 0; j < d; ++j) c[j] += f[j];
      counts[result.labels[i]] += 1;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        double* row = next.row(c);
        for (std::size_t j = 0; j < d; ++j) row[j] /= counts[c];
      } else {
        // Re-seed an empty cluster to the point farthest from its centroid.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dd = sq_dist(features.row(i), centroids.row(result.labels[i]), d);
          if (dd > far_d) {
            far_d = dd;
            far = i;
          }
        }
        std::copy(features.row(far), features.row(far) + d, next.row(c));
      }
    }
    double shift = 0.0;
    for (std::size_t i = 0; i < centroids.data.size(); ++i)
      shift = std::max(shift, std::abs(next.data[i] - centroids.data[i]));
    centroids = std::move(next);
    result.iterations = iter + 1;
    result.inertia = inertia;
    prev_inertia = inertia;
    if (shift < tol) break;
  }
  // Final assignment against the converged centroids.
  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = sq_dist(features.row(i), centroids.row(0), d);
    int best_c = 0;
    for (int c = 1; c < k; ++c) {
      const double dd = sq_dist(features.row(i), centroids.row(c), d);
      if (dd < best) {
        best = dd;
        best_c = c;
      }
    }
    result.labels[i] = best_c;
    inertia += best;
  }
  if (inertia > prev_inertia + 1e-9 * (1.0 + prev_inertia))
    throw std::runtime_error("kmeans: inertia increased");
  result.inertia = inertia;
  result.centroids = std::move(centroids);
  return result;
}

ClusterLayout cluster_frames(const FeatureStack& features, int k, std::uint64_t seed, int max_iters,
                             double tol) {
  ClusterLayout out;
  out.k = k;
  for (int f = 0; f < features.frames(); ++f) {
    KmeansResult r = kmeans(features.per_frame[f], k, seed + static_cast<std::uint64_t>(f),
                            max_iters, tol);
    out.labels.push_back(std::move(r.labels));
    out.centroids.push_back(std::move(r.centroids));
  }
  return out;
}

namespace {

double centroid_cosine(const double* a, const double* b, std::size_t d) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

// Max-total-similarity one-to-one assignment by bitmask DP; k stays small.
std::vector<int> best_assignment(const Tensor& sim) {
  const int k = static_cast<int>(sim.rows());
  if (k > 20) throw ValidationError("match_clusters: k too large for assignment");
  const int full = 1 << k;
  std::vector<double> best(full, -std::numeric_limits<double>::max());
  std::vector<int> choice(static_cast<std::size_t>(full) * k, -1);
  best[0] = 0.0;
  for (int row = 0; row < k; ++row) {
    std::vector<double> next(full, -std::numeric_limits<double>::max());
    for (int mask = 0; mask < full; ++mask) {
      if (best[mask] == -std::numeric_limits<double>::max()) continue;
      if (__builtin_popcount(static_cast<unsigned>(mask)) != row) continue;
      for (int col = 0; col < k; ++col) {
        if (mask & (1 << col)) continue;
        const int nm = mask | (1 << col);
        const double v = best[mask] + sim.at(row, col);
        if (v > next[nm]) {
          next[nm] = v;
          choice[static_cast<std::size_t>(nm) * k + row] = col;
        }
      }
    }
    best = std::move(next);
  }
  // Walk back from the full mask.
  std::vector<int> assign(k, -1);
  int mask = full - 1;
  for (int row = k - 1; row >= 0; --row) {
    const int col = choice[static_cast<std::size_t>(mask) * k + row];
    assign[row] = col;
    mask &= ~(1 << col);
  }
  return assign;
}

}  // namespace

ClusterLayout match_clusters(const ClusterLayout& layout) {
  ClusterLayout out = layout;
  if (layout.centroids.size() < 2) return out;
  const Tensor& ref = layout.centroids[0];
  const std::size_t d = ref.cols();
  for (std::size_t f = 1; f < layout.centroids.size(); ++f) {
    const Tensor& cur = layout.centroids[f];
    Tensor sim = Tensor::zeros({static_cast<std::size_t>(layout.k),
                                static_cast<std::size_t>(layout.k)});
    // sim[row=current cluster][col=reference cluster]
    for (int i = 0; i < layout.k; ++i)
      for (int j = 0; j < layout.k; ++j)
        sim.at(i, j) = centroid_cosine(cur.row(i), ref.row(j), d);
    const std::vector<int> to_ref = best_assignment(sim);
    for (int& label : out.labels[f]) label = to_ref[label];
    Tensor reordered = Tensor::zeros(cur.shape);
    for (int i = 0; i < layout.k; ++i)
      std::copy(cur.row(i), cur.row(i) + d, reordered.row(to_ref[i]));
    out.centroids[f] = std::move(reordered);
  }
  return out;
}

LayoutSet layout_from_clusters(const ClusterLayout& clusters,
                               const std::map<int, RegionSpec>& region_bindings, int height,
                               int width) {
  LayoutSet layout;
  layout.frames = static_cast<int>(clusters.labels.size());
  layout.height = height;
  layout.width = width;
  for (const auto& [cluster_id, spec] : region_bindings) {
    if (cluster_id < 0 || cluster_id >= clusters.k)
      throw ValidationError("binding references missing cluster " + std::to_string(cluster_id));
    layout.regions.push_back(spec);
    for (int f = 0; f < layout.frames; ++f) {
      BoolGrid g(height, width);
      const std::vector<int>& labels = clusters.labels[f];
      if (static_cast<int>(labels.size()) != height * width)
        throw ValidationError("cluster labels do not match the requested resolution");
      for (std::size_t i = 0; i < labels.size(); ++i) g.cells[i] = labels[i] == cluster_id ? 1 : 0;
      layout.set_mask(f, spec.id, std::move(g));
    }
  }
  return layout;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("adjusted_rand_index: label vectors must match and be non-empty");
  std::map<int, int> ia, ib;
  for (int v : a)
    if (!ia.count(v)) ia[v] = static_cast<int>(ia.size());
  for (int v : b)
    if (!ib.count(v)) ib[v] = static_cast<int>(ib.size());
  const std::size_t ka = ia.size(), kb = ib.size();
  std::vector<long> table(ka * kb, 0), ra(ka, 0), cb(kb, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int x = ia[a[i]], y = ib[b[i]];
    table[x * kb + y] += 1;
    ra[x] += 1;
    cb[y] += 1;
  }
  auto comb2 = [](long v) { return 0.5 * v * (v - 1); };
  double sum_table = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (long v : table) sum_table += comb2(v);
  for (long v : ra) sum_a += comb2(v);
  for (long v : cb) sum_b += comb2(v);
  const double total = comb2(static_cast<long>(a.size()));
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both partitions trivial
  return (sum_table - expected) / (max_index - expected);
}

}  // namespace regionedit
