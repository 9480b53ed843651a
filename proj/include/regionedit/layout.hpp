#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "regionedit/tensor.hpp"

namespace regionedit {

enum class RegionLevel { kClass, kInstance, kPart };

RegionLevel region_level_from_string(const std::string& s);
std::string to_string(RegionLevel level);

// One editable region: where it is (masks live in LayoutSet) and what the
// words for it are. `priority` settles overlaps, higher wins; `preserve`
// marks regions whose prompt is unchanged so latent blending skips them.
struct RegionSpec {
  int id = 0;  // >= 1; 0 is reserved for background
  std::vector<std::string> prompt_tokens;
  RegionLevel level = RegionLevel::kInstance;
  int priority = 0;
  bool preserve = false;
};

struct BoolGrid {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> cells;  // row-major, 0 or 1

  BoolGrid() = default;
  BoolGrid(int h, int w) : height(h), width(w), cells(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return cells[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return cells[static_cast<std::size_t>(y) * width + x]; }
  long count() const;
  bool empty_dims() const { return height <= 0 || width <= 0; }
};

struct RegionMask {
  int frame_index = 0;
  int region_id = 0;
  BoolGrid grid;
};

// Full layout condition for a clip: region table plus one mask per
// (frame, region) at the latent resolution, and the global prompt words.
struct LayoutSet {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<RegionSpec> regions;
  std::vector<RegionMask> masks;
  std::vector<std::string> global_prompt_tokens;

  const RegionSpec& region(int region_id) const;
  bool has_region(int region_id) const;
  const BoolGrid& mask(int frame, int region_id) const;
  void set_mask(int frame, int region_id, BoolGrid grid);
  // Throws ValidationError on structural problems (duplicate ids, missing or
  // misshapen masks, part regions not outranking what they overlap).
  void validate() const;
};

// Per-frame token-to-region assignment; 0 means background. Two query
// positions attend as "same region" iff their labels match, across frames.
struct TokenLabels {
  int frames = 0;
  int tokens = 0;  // height * width
  std::vector<std::vector<int>> labels;  // [frame][token]

  int label(int frame, int token) const { return labels[frame][token]; }
};

// Token span [begin, end) of one region's words inside the text sequence.
struct TokenSpan {
  int begin = 0;
  int end = 0;
  int length() const { return end - begin; }
};

// Query-key condition for text cross attention. frames[i] is (H*W) x L with
// entries in {0,1}; column_region[y] gives the owning region of text position
// y, or -1 for columns outside every span (markers, global words) which the
// modulation step leaves untouched.
struct CrossConditionMap {
  int length = 0;  // L
  std::vector<Tensor> frames;
  std::vector<int> column_region;
};

// S values per (frame, region id); id 0 covers the background share.
struct RegionAreas {
  std::vector<std::map<int, double>> per_frame;

  double at(int frame, int region_id) const;
};

// Majority-vote resampling: output cell true iff at least half of the source
// area it covers is true (exact rational arithmetic, ties go to true).
BoolGrid resample_mask(const BoolGrid& mask, int dst_h, int dst_w);

// Makes masks pixelwise disjoint: on overlap the highest (priority, id) wins.
LayoutSet resolve_overlaps(const LayoutSet& layout);

// OR of all non-preserve region masks of one frame.
BoolGrid merge_foreground(const LayoutSet& layout, int frame);

CrossConditionMap build_cross_condition(const LayoutSet& layout,
                                        const std::map<int, TokenSpan>& prompt_spans, int length);

TokenLabels region_labels(const LayoutSet& layout);

double region_area_fraction(const LayoutSet& layout, int frame, int region_id);

RegionAreas compute_region_areas(const LayoutSet& layout);

}  // namespace regionedit
