#include "regionedit/metrics.hpp"

#include <cmath>

namespace regionedit {

ProxyEmbedder ProxyEmbedder::seeded(int channels, int d, std::uint64_t seed) {
  ProxyEmbedder e;
  Rng rng = Rng(seed).substream("weights");
  e.w_in = Tensor::zeros({static_cast<std::size_t>(channels), static_cast<std::size_t>(d)});
  const double scale = 1.0 / std::sqrt(static_cast<double>(channels));
  for (double& v : e.w_in.data) v = scale * rng.gaussian();
  return e;
}

Tensor ProxyEmbedder::embed(const VideoLatent& video, int frame) const {
  Tensor features = matmul(video.frame_tokens(frame), w_in);
  Tensor pooled = Tensor::zeros({features.cols()});
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const double* r = features.row(i);
    for (std::size_t j = 0; j < features.cols(); ++j) pooled.data[j] += r[j];
  }
  scale_inplace(pooled, 1.0 / features.rows());
  return pooled;
}

double warp_error(const VideoLatent& frames, const FlowField& flow) {
  if (frames.frames < 2) throw ValidationError("warp_error: need at least 2 frames");
  if (static_cast<int>(flow.pairs.size()) < frames.frames - 1)
    throw ValidationError("warp_error: missing flow for a frame pair");
  if (flow.height != frames.height || flow.width != frames.width)
    throw ValidationError("warp_error: flow resolution mismatch");
  double total = 0.0;
  long samples = 0;
  for (int p = 0; p + 1 < frames.frames; ++p) {
    for (int y = 0; y < frames.height; ++y) {
      for (int x = 0; x < frames.width; ++x) {
        const double sx = x + flow.dx(p, y, x);
        const double sy = y + flow.dy(p, y, x);
        if (sx < 0.0 || sx > frames.width - 1 || sy < 0.0 || sy > frames.height - 1) continue;
        // Base corner clamped so integer displacements stay exact at the far
        // edge (weight on the clamped neighbour is then exactly 1).
        int x0 = std::min(static_cast<int>(sx), frames.width - 2);
        int y0 = std::min(static_cast<int>(sy), frames.height - 2);
        const double wx = sx - x0, wy = sy - y0;
        for (int c = 0; c < frames.channels; ++c) {
          const double v00 = frames.at(p + 1, y0, x0, c);
          const double v01 = frames.at(p + 1, y0, x0 + 1, c);
          const double v10 = frames.at(p + 1, y0 + 1, x0, c);
          const double v11 = frames.at(p + 1, y0 + 1, x0 + 1, c);
          const double warped = (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) +
                                wy * ((1.0 - wx) * v10 + wx * v11);
          total += std::abs(warped - frames.at(p, y, x, c));
          ++samples;
        }
      }
    }
  }
  if (samples == 0) return 0.0;
  return 100.0 * total / samples;
}

namespace {

double cosine(const Tensor& a, const Tensor& b) {
  const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

double cosine_vec(const Descriptor& a, const Descriptor& b) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return d / std::sqrt(na * nb);
}

}  // namespace

double frame_consistency(const VideoLatent& frames, const ProxyEmbedder& embedder) {
  if (frames.frames < 2) throw ValidationError("frame_consistency: need at least 2 frames");
  double acc = 0.0;
  Tensor prev = embedder.embed(frames, 0);
  for (int f = 1; f < frames.frames; ++f) {
    Tensor cur = embedder.embed(frames, f);
    acc += cosine(prev, cur);
    prev = std::move(cur);
  }
  return 100.0 * acc / (frames.frames - 1);
}

std::map<int, double> prompt_alignment_per_region(const VideoLatent& frames,
                                                  const LayoutSet& layout,
                                                  const std::map<int, Descriptor>& targets) {
  std::map<int, double> out;
  for (const RegionSpec& r : layout.regions) {
    if (r.preserve) continue;
    auto target = targets.find(r.id);
    if (target == targets.end())
      throw ValidationError("prompt_alignment: no descriptor for region " + std::to_string(r.id));
    double acc = 0.0;
    int counted = 0;
    for (int f = 0; f < frames.frames; ++f) {
      const BoolGrid& g = layout.mask(f, r.id);
      Descriptor mean(frames.channels, 0.0);
      long n = 0;
      for (int y = 0; y < frames.height; ++y)
        for (int x = 0; x < frames.width; ++x)
          if (g.at(y, x)) {
            for (int c = 0; c < frames.channels; ++c) mean[c] += frames.at(f, y, x, c);
            ++n;
          }
      if (n == 0) continue;  // empty in this frame, skip
      for (double& v : mean) v /= n;
      acc += cosine_vec(mean, target->second);
      ++counted;
    }
    if (counted == 0)
      throw ValidationError("prompt_alignment: region " + std::to_string(r.id) +
                            " empty in every frame");
    out[r.id] = 100.0 * acc / counted;
  }
  return out;
}

double prompt_alignment(const VideoLatent& frames, const LayoutSet& layout,
                        const std::map<int, Descriptor>& targets) {
  std::map<int, double> per = prompt_alignment_per_region(frames, layout, targets);
  if (per.empty()) throw ValidationError("prompt_alignment: no edited regions");
  double acc = 0.0;
  for (const auto& [id, v] : per) acc += v;
  return acc / per.size();
}

std::map<int, double> edit_accuracy_per_region(const VideoLatent& frames, const LayoutSet& layout,
                                               const std::map<int, Descriptor>& sources,
                                               const std::map<int, Descriptor>& targets) {
  std::map<int, double> out;
  for (const RegionSpec& r : layout.regions) {
    if (r.preserve) continue;
    auto own_target = targets.find(r.id);
    auto own_source = sources.find(r.id);
    if (own_target == targets.end() || own_source == sources.end())
      throw ValidationError("edit_accuracy: missing descriptor for region " + std::to_string(r.id));
    // Candidates: the region's source color, then every region's target.
    // Nearest-candidate ties resolve to the earliest entry.
    std::vector<const Descriptor*> candidates{&own_source->second};
    int own_index = -1;
    for (const auto& [id, d] : targets) {
      if (id == r.id) own_index = static_cast<int>(candidates.size());
      candidates.push_back(&d);
    }
    long correct = 0, total = 0;
    for (int f = 0; f < frames.frames; ++f) {
      const BoolGrid& g = layout.mask(f, r.id);
      for (int y = 0; y < frames.height; ++y) {
        for (int x = 0; x < frames.width; ++x) {
          if (!g.at(y, x)) continue;
          double best = -1.0;
          int best_i = 0;
          for (std::size_t i = 0; i < candidates.size(); ++i) {
            double d2 = 0.0;
            for (int c = 0; c < frames.channels; ++c) {
              const double diff = frames.at(f, y, x, c) - (*candidates[i])[c];
              d2 += diff * diff;
            }
            if (best < 0.0 || d2 < best) {
              best = d2;
              best_i = static_cast<int>(i);
            }
          }
          if (best_i == own_index) ++correct;
          ++total;
        }
      }
    }
    out[r.id] = total == 0 ? 0.0 : static_cast<double>(correct) / total;
  }
  return out;
}

double attention_mass(const Tensor& weights, const Tensor& positive_mask) {
  if (!weights.same_shape(positive_mask))
    throw std::invalid_argument("attention_mass: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.rows(); ++i) {
    const double* w = weights.row(i);
    const double* m = positive_mask.row(i);
    double row = 0.0;
    for (std::size_t j = 0; j < weights.cols(); ++j)
      if (m[j] != 0.0) row += w[j];
    acc += row;
  }
  return acc / weights.rows();
}

double q_edit(double alignment, double warp) {
  if (warp < 0.0) throw ValidationError("q_edit: warp must be non-negative");
  return alignment / std::max(warp, 1e-4);
}

std::vector<MetricRow> MetricReport::rows() const {
  std::vector<MetricRow> out;
  if (has_alignment) out.push_back({"clip_t_proxy", clip_t_proxy, "video"});
  out.push_back({"clip_f_proxy", clip_f_proxy, "video"});
  if (has_warp) {
    out.push_back({"warp_err", warp_err, "video"});
    if (has_alignment) out.push_back({"q_edit", q_edit, "video"});
  }
  if (has_alignment) out.push_back({"edit_accuracy", edit_accuracy, "mean"});
  for (const auto& [id, v] : region_alignment)
    out.push_back({"prompt_alignment", v, "region:" + std::to_string(id)});
  for (const auto& [id, v] : region_accuracy)
    out.push_back({"edit_accuracy", v, "region:" + std::to_string(id)});
  for (const auto& [id, v] : region_attention_mass)
    out.push_back({"attention_mass", v, "region:" + std::to_string(id)});
  return out;
}

}  // namespace regionedit
