#pragma once

#include <optional>
#include <string>
#include <vector>

#include "regionedit/layout.hpp"
#include "regionedit/modulation.hpp"

namespace regionedit {

struct ScheduleConfig {
  double coefficient = 1.0;
  double exponent = 5.0;
};

// One region row of an edit config. Masks come either from files following
// the mask_f{frame:03}_r{id}.pgm convention (layout manifest) or from a
// cluster id when the layout is derived by clustering.
struct RegionConfig {
  int id = 0;
  RegionLevel level = RegionLevel::kInstance;
  int priority = 0;
  std::string source_prompt;
  std::string target_prompt;
  int cluster = -1;  // >= 0 binds this region to a cluster label

  bool preserve() const { return source_prompt == target_prompt; }
};

struct BlendConfig {
  bool enabled = true;
  bool per_frame = false;  // default: one OR-aggregated mask for all frames
  int step_begin = 0;
  int step_end = -1;  // -1 = every step
  int dilate = 0;
};

struct RecordConfig {
  std::vector<int> attention_steps = {0, 14};  // denoise iterations to record
  bool self_maps = false;                      // also keep (N*T)^2 self maps
  int feature_block = 1;
  int feature_node = 25;  // trajectory node for clustering features
};

struct ClusterConfig {
  int k = 3;
};

struct EditConfig {
  std::string global_prompt = "a scene with";
  std::vector<RegionConfig> regions;
  int sample_steps = 50;
  int modulate_steps = 15;
  ScheduleConfig cross_schedule{1.0, 5.0};
  ScheduleConfig self_schedule{0.3, 5.0};
  ModulationScope scope = ModulationScope::kRow;
  bool modulate_cross = true;
  bool modulate_self = true;
  BlendConfig blend;
  std::uint64_t seed = 7;
  bool replay_mode = false;
  int train_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::string checkpoint;  // empty = seeded weights
  RecordConfig record;
  ClusterConfig cluster;

  // Throws ValidationError naming the offending field path.
  void validate() const;

  std::string to_json_text() const;
  static EditConfig from_json_text(const std::string& text);
  static EditConfig load(const std::string& path);
  void save(const std::string& path) const;

  Schedule cross_schedule_obj() const {
    return {AttentionBranch::kCross, cross_schedule.coefficient, cross_schedule.exponent};
  }
  Schedule self_schedule_obj() const {
    return {AttentionBranch::kSelf, self_schedule.coefficient, self_schedule.exponent};
  }
};

}  // namespace regionedit
