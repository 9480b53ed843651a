#pragma once

#include <map>
#include <string>
#include <vector>

#include "regionedit/layout.hpp"
#include "regionedit/tensor.hpp"
#include "regionedit/video.hpp"

namespace regionedit {

// Per-region color descriptor (channel means).
using Descriptor = std::vector<double>;

// Deterministic stand-in for a frame encoder: mean-pooled token features
// through a C -> d projection (the toy denoiser's input projection by
// convention).
struct ProxyEmbedder {
  Tensor w_in;  // channels x d

  static ProxyEmbedder seeded(int channels, int d, std::uint64_t seed);
  Tensor embed(const VideoLatent& video, int frame) const;
};

// Backward-warp consistency: frame i+1 sampled along the source flow and
// compared to frame i, mean L1 over in-bounds samples, x100.
double warp_error(const VideoLatent& frames, const FlowField& flow);

// Mean cosine between consecutive frame embeddings, x100.
double frame_consistency(const VideoLatent& frames, const ProxyEmbedder& embedder);

// Mean cosine between each region's mean pixel and its target descriptor,
// averaged per region over frames, then across regions, x100. A region empty
// in one frame is skipped for that frame; empty everywhere is an error.
double prompt_alignment(const VideoLatent& frames, const LayoutSet& layout,
                        const std::map<int, Descriptor>& targets);
std::map<int, double> prompt_alignment_per_region(const VideoLatent& frames,
                                                  const LayoutSet& layout,
                                                  const std::map<int, Descriptor>& targets);

// Fraction of region pixels whose nearest descriptor (own source color plus
// every region's target) is the region's own target.
std::map<int, double> edit_accuracy_per_region(const VideoLatent& frames, const LayoutSet& layout,
                                               const std::map<int, Descriptor>& sources,
                                               const std::map<int, Descriptor>& targets);

// Mean over rows of the weight falling on that row's positive keys.
double attention_mass(const Tensor& weights, const Tensor& positive_mask);

double q_edit(double alignment, double warp);

struct MetricRow {
  std::string metric;
  double value = 0.0;
  std::string scope;
};

struct MetricReport {
  double clip_t_proxy = 0.0;
  double clip_f_proxy = 0.0;
  double warp_err = 0.0;
  double q_edit = 0.0;
  double edit_accuracy = 0.0;  // mean over regions
  bool has_warp = false;       // flow provided
  bool has_alignment = false;  // targets known
  std::map<int, double> region_alignment;
  std::map<int, double> region_accuracy;
  std::map<int, double> region_attention_mass;

  std::vector<MetricRow> rows() const;
};

}  // namespace regionedit
