#include "regionedit/layout.hpp"

#include <algorithm>
#include <set>

namespace regionedit {

RegionLevel region_level_from_string(const std::string& s) {
  if (s == "class") return RegionLevel::kClass;
  if (s == "instance") return RegionLevel::kInstance;
  if (s == "part") return RegionLevel::kPart;
  throw ValidationError("unknown region level '" + s + "'");
}

std::string to_string(RegionLevel level) {
  switch (level) {
    case RegionLevel::kClass: return "class";
    case RegionLevel::kInstance: return "instance";
    case RegionLevel::kPart: return "part";
  }
  return "instance";
}

long BoolGrid::count() const {
  long n = 0;
  for (std::uint8_t c : cells) n += c ? 1 : 0;
  return n;
}

const RegionSpec& LayoutSet::region(int region_id) const {
  for (const RegionSpec& r : regions)
    if (r.id == region_id) return r;
  throw ValidationError("region id " + std::to_string(region_id) + " not present in layout");
}

bool LayoutSet::has_region(int region_id) const {
  for (const RegionSpec& r : regions)
    if (r.id == region_id) return true;
  return false;
}

const BoolGrid& LayoutSet::mask(int frame, int region_id) const {
  for (const RegionMask& m : masks)
    if (m.frame_index == frame && m.region_id == region_id) return m.grid;
  throw ValidationError("no mask for frame " + std::to_string(frame) + ", region " +
                        std::to_string(region_id));
}

void LayoutSet::set_mask(int frame, int region_id, BoolGrid grid) {
  for (RegionMask& m : masks) {
    if (m.frame_index == frame && m.region_id == region_id) {
      m.grid = std::move(grid);
      return;
    }
  }
  masks.push_back({frame, region_id, std::move(grid)});
}

void LayoutSet::validate() const {
  if (frames <= 0 || height <= 0 || width <= 0)
    throw ValidationError("layout: frames and resolution must be positive");
  std::set<int> ids;
  for (const RegionSpec& r : regions) {
    if (r.id < 1) throw ValidationError("region id must be >= 1 (0 is background)");
    if (!ids.insert(r.id).second)
      throw ValidationError("duplicate region id " + std::to_string(r.id));
    if (r.prompt_tokens.empty())
      throw ValidationError("region " + std::to_string(r.id) + ": prompt tokens must be non-empty");
  }
  for (const RegionSpec& r : regions) {
    for (int f = 0; f < frames; ++f) {
      const BoolGrid& g = mask(f, r.id);  // throws if missing
      if (g.height != height || g.width != width)
        throw ValidationError("mask for region " + std::to_string(r.id) +
                              " does not match layout resolution");
    }
  }
  // A part must outrank whatever class/instance region it sits on, otherwise
  // resolution would silently swallow the part.
  for (const RegionSpec& part : regions) {
    if (part.level != RegionLevel::kPart) continue;
    for (const RegionSpec& base : regions) {
      if (base.level == RegionLevel::kPart || base.id == part.id) continue;
      bool overlaps = false;
      for (int f = 0; f < frames && !overlaps; ++f) {
        const BoolGrid& a = mask(f, part.id);
        const BoolGrid& b = mask(f, base.id);
        for (std::size_t i = 0; i < a.cells.size(); ++i) {
          if (a.cells[i] && b.cells[i]) {
            overlaps = true;
            break;
          }
        }
      }
      if (overlaps && part.priority <= base.priority)
        throw ValidationError("part region " + std::to_string(part.id) +
                              " must have priority above overlapping region " +
                              std::to_string(base.id));
    }
  }
}

BoolGrid resample_mask(const BoolGrid& mask, int dst_h, int dst_w) {
  if (mask.empty_dims() || dst_h <= 0 || dst_w <= 0) throw ValidationError("empty mask");
  const int sh = mask.height, sw = mask.width;
  BoolGrid out(dst_h, dst_w);
  // Work in units of 1/(dst_h) vertically and 1/(dst_w) horizontally so every
  // overlap area is an exact integer and the >= 50% tie lands exactly.
  for (int i = 0; i < dst_h; ++i) {
    const long y0 = static_cast<long>(i) * sh;        // times dst_h
    const long y1 = static_cast<long>(i + 1) * sh;
    for (int j = 0; j < dst_w; ++j) {
      const long x0 = static_cast<long>(j) * sw;      // times dst_w
      const long x1 = static_cast<long>(j + 1) * sw;
      long true_area = 0;
      long total_area = 0;
      for (int r = static_cast<int>(y0 / dst_h); r < sh && static_cast<long>(r) * dst_h < y1; ++r) {
        const long oy = std::min<long>(y1, static_cast<long>(r + 1) * dst_h) -
                        std::max<long>(y0, static_cast<long>(r) * dst_h);
        if (oy <= 0) continue;
        for (int c = static_cast<int>(x0 / dst_w); c < sw && static_cast<long>(c) * dst_w < x1;
             ++c) {
          const long ox = std::min<long>(x1, static_cast<long>(c + 1) * dst_w) -
                          std::max<long>(x0, static_cast<long>(c) * dst_w);
          if (ox <= 0) continue;
          const long area = oy * ox;
          total_area += area;
          if (mask.at(r, c)) true_area += area;
        }
      }
      out.at(i, j) = (2 * true_area >= total_area) ? 1 : 0;
    }
  }
  return out;
}

LayoutSet resolve_overlaps(const LayoutSet& layout) {
  LayoutSet out = layout;
  for (int f = 0; f < layout.frames; ++f) {
    // Winner per pixel by (priority, id), then rebuild each mask.
    std::vector<int> winner(static_cast<std::size_t>(layout.height) * layout.width, 0);
    std::vector<int> best_priority(winner.size(), 0);
    for (const RegionSpec& r : layout.regions) {
      const BoolGrid& g = layout.mask(f, r.id);
      for (std::size_t i = 0; i < winner.size(); ++i) {
        if (!g.cells[i]) continue;
        if (winner[i] == 0 || r.priority > best_priority[i] ||
            (r.priority == best_priority[i] && r.id > winner[i])) {
          winner[i] = r.id;
          best_priority[i] = r.priority;
        }
      }
    }
    for (const RegionSpec& r : layout.regions) {
      BoolGrid g(layout.height, layout.width);
      for (std::size_t i = 0; i < winner.size(); ++i) g.cells[i] = (winner[i] == r.id) ? 1 : 0;
      out.set_mask(f, r.id, std::move(g));
    }
  }
  return out;
}

BoolGrid merge_foreground(const LayoutSet& layout, int frame) {
  if (frame < 0 || frame >= layout.frames) throw ValidationError("merge_foreground: frame out of range");
  BoolGrid out(layout.height, layout.width);
  for (const RegionSpec& r : layout.regions) {
    if (r.preserve) continue;
    const BoolGrid& g = layout.mask(frame, r.id);
    for (std::size_t i = 0; i < out.cells.size(); ++i) out.cells[i] |= g.cells[i];
  }
  return out;
}

CrossConditionMap build_cross_condition(const LayoutSet& layout,
                                        const std::map<int, TokenSpan>& prompt_spans, int length) {
  CrossConditionMap map;
  map.length = length;
  map.column_region.assign(length, -1);
  for (const auto& [region_id, span] : prompt_spans) {
    if (span.begin < 0 || span.end > length || span.begin >= span.end)
      throw ValidationError("prompt span for region " + std::to_string(region_id) +
                            " outside [0, L)");
    if (!layout.has_region(region_id))
      throw ValidationError("prompt span names unknown region " + std::to_string(region_id));
    for (int y = span.begin; y < span.end; ++y) {
      if (map.column_region[y] != -1) throw ValidationError("ambiguous token ownership");
      map.column_region[y] = region_id;
    }
  }
  const std::size_t tokens = static_cast<std::size_t>(layout.height) * layout.width;
  for (int f = 0; f < layout.frames; ++f) {
    Tensor r = Tensor::zeros({tokens, static_cast<std::size_t>(length)});
    for (const auto& [region_id, span] : prompt_spans) {
      const BoolGrid& g = layout.mask(f, region_id);
      for (std::size_t x = 0; x < tokens; ++x) {
        if (!g.cells[x]) continue;
        for (int y = span.begin; y < span.end; ++y) r.at(x, y) = 1.0;
      }
    }
    map.frames.push_back(std::move(r));
  }
  return map;
}

TokenLabels region_labels(const LayoutSet& layout) {
  TokenLabels out;
  out.frames = layout.frames;
  out.tokens = layout.height * layout.width;
  out.labels.assign(layout.frames, std::vector<int>(out.tokens, 0));
  // Write in ascending (priority, id) order so the resolved winner lands last;
  // on an already-resolved layout this is a plain fill.
  std::vector<const RegionSpec*> order;
  for (const RegionSpec& r : layout.regions) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const RegionSpec* a, const RegionSpec* b) {
    return std::tie(a->priority, a->id) < std::tie(b->priority, b->id);
  });
  for (int f = 0; f < layout.frames; ++f) {
    for (const RegionSpec* r : order) {
      const BoolGrid& g = layout.mask(f, r->id);
      for (int x = 0; x < out.tokens; ++x)
        if (g.cells[x]) out.labels[f][x] = r->id;
    }
  }
  return out;
}

double region_area_fraction(const LayoutSet& layout, int frame, int region_id) {
  const double total = static_cast<double>(layout.height) * layout.width;
  if (region_id == 0) {
    TokenLabels labels = region_labels(layout);
    long bg = 0;
    for (int x = 0; x < labels.tokens; ++x)
      if (labels.labels[frame][x] == 0) ++bg;
    return bg / total;
  }
  return layout.mask(frame, region_id).count() / total;
}

RegionAreas compute_region_areas(const LayoutSet& layout) {
  RegionAreas out;
  out.per_frame.resize(layout.frames);
  TokenLabels labels = region_labels(layout);
  for (int f = 0; f < layout.frames; ++f) {
    std::map<int, long> counts;
    counts[0] = 0;
    for (const RegionSpec& r : layout.regions) counts[r.id] = 0;
    for (int x = 0; x < labels.tokens; ++x) counts[labels.labels[f][x]] += 1;
    const double total = static_cast<double>(labels.tokens);
    for (const auto& [id, n] : counts) out.per_frame[f][id] = n / total;
  }
  return out;
}

double RegionAreas::at(int frame, int region_id) const {
  const auto& m = per_frame.at(frame);
  auto it = m.find(region_id);
  if (it == m.end())
    throw ValidationError("no area entry for region " + std::to_string(region_id));
  return it->second;
}

}  // namespace regionedit
