#pragma once

#include <functional>

#include "regionedit/diffusion.hpp"
#include "regionedit/layout.hpp"

namespace regionedit {

// Where denoising is allowed to write: inside the mask the denoise latent
// stands, outside the inversion-cached latent is copied back verbatim.
struct BlendMask {
  std::vector<BoolGrid> per_frame;
  bool aggregated = false;  // true when frames were OR-combined into one grid

  const BoolGrid& frame(int f) const { return aggregated ? per_frame[0] : per_frame[f]; }
};

// OR across frames by default; aggregate=false keeps one mask per frame.
BlendMask aggregate_masks(const std::vector<BoolGrid>& per_frame_masks, bool aggregate = true);

// 4-neighbourhood binary dilation, `iterations` rounds. Off by default at the
// call sites; exists for mask-growing experiments.
BoolGrid dilate_mask(const BoolGrid& mask, int iterations);

VideoLatent blend_step(const VideoLatent& z_denoise, const VideoLatent& z_inversion,
                       const BlendMask& mask);

// Per-step blend hook for ddim_denoise: looks up the trajectory node reached
// after each update and blends against it within [step_begin, step_end).
std::function<void(int, int, VideoLatent&)> make_blend_hook(const Trajectory& trajectory,
                                                            BlendMask mask, int step_begin = 0,
                                                            int step_end = -1);

}  // namespace regionedit
