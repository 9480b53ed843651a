#include "regionedit/blend.hpp"

namespace regionedit {

BlendMask aggregate_masks(const std::vector<BoolGrid>& per_frame_masks, bool aggregate) {
  if (per_frame_masks.empty()) throw ValidationError("aggregate_masks: no masks");
  const int h = per_frame_masks[0].height, w = per_frame_masks[0].width;
  for (const BoolGrid& g : per_frame_masks)
    if (g.height != h || g.width != w) throw ValidationError("aggregate_masks: resolution mismatch");
  BlendMask out;
  if (aggregate) {
    BoolGrid merged(h, w);
    for (const BoolGrid& g : per_frame_masks)
      for (std::size_t i = 0; i < merged.cells.size(); ++i) merged.cells[i] |= g.cells[i];
    out.per_frame.push_back(std::move(merged));
    out.aggregated = true;
  } else {
    out.per_frame = per_frame_masks;
    out.aggregated = false;
  }
  return out;
}

BoolGrid dilate_mask(const BoolGrid& mask, int iterations) {
  BoolGrid cur = mask;
  for (int it = 0; it < iterations; ++it) {
    BoolGrid next = cur;
    for (int y = 0; y < cur.height; ++y) {
      for (int x = 0; x < cur.width; ++x) {
        if (cur.at(y, x)) continue;
        const bool on = (y > 0 && cur.at(y - 1, x)) || (y + 1 < cur.height && cur.at(y + 1, x)) ||
                        (x > 0 && cur.at(y, x - 1)) || (x + 1 < cur.width && cur.at(y, x + 1));
        if (on) next.at(y, x) = 1;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

VideoLatent blend_step(const VideoLatent& z_denoise, const VideoLatent& z_inversion,
                       const BlendMask& mask) {
  if (!z_denoise.same_shape(z_inversion)) throw std::invalid_argument("blend_step: shape mismatch");
  if (mask.per_frame.empty()) throw ValidationError("blend_step: empty mask");
  VideoLatent out = z_denoise;
  for (int f = 0; f < out.frames; ++f) {
    const BoolGrid& g = mask.frame(f);
    if (g.height != out.height || g.width != out.width)
      throw std::invalid_argument("blend_step: mask resolution mismatch");
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        if (!g.at(y, x))
          for (int c = 0; c < out.channels; ++c) out.at(f, y, x, c) = z_inversion.at(f, y, x, c);
  }
  return out;
}

std::function<void(int, int, VideoLatent&)> make_blend_hook(const Trajectory& trajectory,
                                                            BlendMask mask, int step_begin,
                                                            int step_end) {
  return [&trajectory, mask = std::move(mask), step_begin, step_end](int step, int node,
                                                                     VideoLatent& z) {
    if (step < step_begin || (step_end >= 0 && step >= step_end)) return;
    if (node < 0 || node >= trajectory.length())
      throw std::runtime_error("blend: no cached latent at step");
    z = blend_step(z, trajectory.node(node).latent, mask);
  };
}

}  // namespace regionedit
