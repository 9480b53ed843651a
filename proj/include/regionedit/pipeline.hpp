#pragma once

#include "regionedit/blend.hpp"
#include "regionedit/clustering.hpp"
#include "regionedit/config.hpp"
#include "regionedit/diffusion.hpp"
#include "regionedit/metrics.hpp"

namespace regionedit {

// Where the region masks come from. Exactly one source is consulted:
// an in-memory layout, a manifest on disk, or the clustering path.
struct LayoutSource {
  const LayoutSet* direct = nullptr;
  std::string manifest_path;
  bool from_clusters = false;
};

struct AttentionRecord {
  // denoise iteration -> per-block head-averaged maps
  std::map<int, std::vector<Tensor>> cross;      // (N*T) x L
  std::map<int, std::vector<Tensor>> self_attn;  // (N*T) x (N*T)
};

struct EditArtifacts {
  VideoLatent edited;
  Trajectory trajectory;
  LayoutSet layout;  // resolved, config-merged
  TokenLabels labels;
  RegionAreas areas;
  CrossConditionMap cross_map;
  PromptEmbedding source_text;
  PromptEmbedding target_text;
  AttentionRecord attention;
  MetricReport report;
  ClusterLayout clusters;
  bool used_clusters = false;
};

// Text sequences for an edit: the source sequence drives inversion, the
// target sequence (with its per-region spans) drives the modulated denoise.
struct EditText {
  PromptEmbedding source;
  PromptEmbedding target;
};

EditText build_edit_text(const EditConfig& config);

ToyDenoiser load_denoiser(const EditConfig& config);

// Full run: invert, derive/merge the layout, modulated denoise with blending,
// metrics. `flow` is optional and only feeds the warp metrics.
EditArtifacts run_edit(const EditConfig& config, const VideoLatent& video,
                       const LayoutSource& layout_source, const FlowField* flow = nullptr);

void write_artifacts(const std::string& dir, const EditConfig& config,
                     const EditArtifacts& artifacts);

// Mean cross-attention mass of region-labelled queries on the region's own
// prompt span (weights from one block, all frames stacked).
double cross_region_mass(const Tensor& weights, const TokenLabels& labels,
                         const CrossConditionMap& cross_map, int region);

// Mean self-attention mass of region-labelled queries on keys of *other*
// labels: the inter-region leakage diagnostic.
double self_region_leakage(const Tensor& weights, const TokenLabels& labels, int region);

// Color descriptors found in the region prompts; empty optional when a
// non-preserve region has no palette word.
std::optional<std::map<int, Descriptor>> region_descriptors(const EditConfig& config, bool target);

}  // namespace regionedit
