#include "regionedit/synth.hpp"

#include <cmath>

namespace regionedit {

ShapeKind shape_kind_from_string(const std::string& s) {
  if (s == "square") return ShapeKind::kSquare;
  if (s == "circle") return ShapeKind::kCircle;
  throw ValidationError("unknown shape kind '" + s + "'");
}

std::string to_string(ShapeKind kind) {
  return kind == ShapeKind::kSquare ? "square" : "circle";
}

const std::vector<std::pair<std::string, Descriptor>>& color_palette() {
  static const std::vector<std::pair<std::string, Descriptor>> palette = {
      {"red", {0.8, 0.1, 0.1}},    {"green", {0.1, 0.8, 0.1}},
      {"blue", {0.1, 0.1, 0.8}},   {"yellow", {0.8, 0.8, 0.1}},
      {"magenta", {0.8, 0.1, 0.8}}, {"cyan", {0.1, 0.8, 0.8}},
      {"orange", {0.9, 0.5, 0.1}}, {"white", {0.9, 0.9, 0.9}},
  };
  return palette;
}

std::optional<Descriptor> color_from_name(const std::string& name) {
  for (const auto& [word, rgb] : color_palette())
    if (word == name) return rgb;
  return std::nullopt;
}

Descriptor background_color() { return {0.15, 0.15, 0.15}; }

namespace {

struct ResolvedShape {
  ShapeSpec spec;
  Descriptor color;
  double half = 0.0;  // bounding half-extent
};

bool covers(const ResolvedShape& s, double cx, double cy, int x, int y) {
  if (s.spec.kind == ShapeKind::kSquare)
    return std::abs(x - cx) <= s.half && std::abs(y - cy) <= s.half;
  const double dx = x - cx, dy = y - cy;
  return dx * dx + dy * dy <= s.half * s.half;
}

// Largest |v| (sign kept) such that center + f*v keeps the bounding box at
// least one pixel inside [0, limit-1] for every frame.
double clip_velocity(double v, double center, double half, int frames, int limit) {
  const double lo = 1.0 + half, hi = limit - 2.0 - half;
  if (center < lo || center > hi) throw ValidationError("shape out of bounds");
  if (frames < 2 || v == 0.0) return v;
  const double span = frames - 1;
  if (v > 0.0) return std::min(v, (hi - center) / span);
  return std::max(v, (lo - center) / span);
}

}  // namespace

SceneRender synth_video(const SyntheticScene& scene, std::uint64_t seed) {
  if (scene.frames < 1 || scene.height < 4 || scene.width < 4)
    throw ValidationError("scene: need at least 1 frame and a 4x4 canvas");
  Rng rng = Rng(seed).substream("scene");

  std::vector<ResolvedShape> shapes;
  for (const ShapeSpec& spec : scene.shapes) {
    ResolvedShape r;
    r.spec = spec;
    if (spec.size <= 0.0) throw ValidationError("shape size must be positive");
    r.half = spec.kind == ShapeKind::kSquare ? spec.size / 2.0 : spec.size;
    if (spec.color_name.empty()) {
      r.spec.color_name = color_palette()[rng.uniform_int(
          static_cast<int>(color_palette().size()))].first;
    }
    auto color = color_from_name(r.spec.color_name);
    if (!color) throw ValidationError("unknown color '" + r.spec.color_name + "'");
    r.color = *color;
    r.spec.vx = clip_velocity(spec.vx, spec.x, r.half, scene.frames, scene.width);
    r.spec.vy = clip_velocity(spec.vy, spec.y, r.half, scene.frames, scene.height);
    shapes.push_back(std::move(r));
  }

  SceneRender out;
  out.scene = scene;
  out.scene.shapes.clear();
  for (const ResolvedShape& s : shapes) out.scene.shapes.push_back(s.spec);

  const Descriptor bg = background_color();
  out.frames = VideoLatent(scene.frames, scene.height, scene.width, 3);
  out.shape_masks.assign(shapes.size(), {});
  for (int f = 0; f < scene.frames; ++f) {
    for (int y = 0; y < scene.height; ++y)
      for (int x = 0; x < scene.width; ++x)
        for (int c = 0; c < 3; ++c) out.frames.at(f, y, x, c) = bg[c];
    for (std::size_t si = 0; si < shapes.size(); ++si) {
      const ResolvedShape& s = shapes[si];
      const double cx = s.spec.x + f * s.spec.vx;
      const double cy = s.spec.y + f * s.spec.vy;
      BoolGrid mask(scene.height, scene.width);
      for (int y = 0; y < scene.height; ++y) {
        for (int x = 0; x < scene.width; ++x) {
          if (!covers(s, cx, cy, x, y)) continue;
          mask.at(y, x) = 1;
          for (int c = 0; c < 3; ++c) out.frames.at(f, y, x, c) = s.color[c];
        }
      }
      out.shape_masks[si].push_back(std::move(mask));
    }
    // The generator promises disjoint shapes; overlapping specs are an error.
    for (std::size_t a = 0; a < shapes.size(); ++a)
      for (std::size_t b = a + 1; b < shapes.size(); ++b)
        for (std::size_t i = 0; i < out.shape_masks[a][f].cells.size(); ++i)
          if (out.shape_masks[a][f].cells[i] && out.shape_masks[b][f].cells[i])
            throw ValidationError("shapes overlap");
  }

  out.flow.height = scene.height;
  out.flow.width = scene.width;
  for (int f = 0; f + 1 < scene.frames; ++f) {
    Tensor field = Tensor::zeros({static_cast<std::size_t>(scene.height),
                                  static_cast<std::size_t>(scene.width), 2});
    for (std::size_t si = 0; si < shapes.size(); ++si) {
      const BoolGrid& mask = out.shape_masks[si][f];
      for (int y = 0; y < scene.height; ++y) {
        for (int x = 0; x < scene.width; ++x) {
          if (!mask.at(y, x)) continue;
          field.data[(static_cast<std::size_t>(y) * scene.width + x) * 2 + 0] = shapes[si].spec.vx;
          field.data[(static_cast<std::size_t>(y) * scene.width + x) * 2 + 1] = shapes[si].spec.vy;
        }
      }
    }
    out.flow.pairs.push_back(std::move(field));
  }
  return out;
}

SyntheticScene default_scene(int frames, int size, const std::vector<std::string>& colors) {
  SyntheticScene scene;
  scene.frames = frames;
  scene.height = size;
  scene.width = size;
  const double side = std::max(3.0, std::round(size * 5.0 / 16.0));
  ShapeSpec left;
  left.x = size / 4.0;
  left.y = size / 2.0;
  left.size = side;
  left.vy = 1.0;
  ShapeSpec right;
  right.x = size - 1.0 - size / 4.0;
  right.y = size / 2.0;
  right.size = side;
  right.vy = -1.0;
  if (!colors.empty()) left.color_name = colors[0];
  if (colors.size() > 1) right.color_name = colors[1];
  scene.shapes = {left, right};
  return scene;
}

}  // namespace regionedit
