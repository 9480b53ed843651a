#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "regionedit/layout.hpp"
#include "regionedit/metrics.hpp"
#include "regionedit/video.hpp"

namespace regionedit {

enum class ShapeKind { kSquare, kCircle };

ShapeKind shape_kind_from_string(const std::string& s);
std::string to_string(ShapeKind kind);

// Fixed word -> color table shared by the generator, the prompts, and the
// color metrics. Lookup of an unknown word returns nullopt.
std::optional<Descriptor> color_from_name(const std::string& name);
const std::vector<std::pair<std::string, Descriptor>>& color_palette();
Descriptor background_color();

struct ShapeSpec {
  ShapeKind kind = ShapeKind::kSquare;
  std::string color_name;  // empty = pick from the palette with the scene seed
  double x = 0.0, y = 0.0; // center at frame 0, pixel coordinates
  double size = 5.0;       // side length (square) or radius (circle)
  double vx = 0.0, vy = 0.0;  // px / frame; clipped to keep the shape in bounds
};

struct SyntheticScene {
  int frames = 4;
  int height = 16;
  int width = 16;
  std::vector<ShapeSpec> shapes;
};

// Rendered scene with exact ground truth.
struct SceneRender {
  VideoLatent frames;
  FlowField flow;
  std::vector<std::vector<BoolGrid>> shape_masks;  // [shape][frame]
  SyntheticScene scene;                            // colors resolved, velocities clipped
};

SceneRender synth_video(const SyntheticScene& scene, std::uint64_t seed);

// The stock two-shape layout: mirrored squares moving vertically in opposite
// directions, colors from `colors` (padded from the palette via the seed).
SyntheticScene default_scene(int frames, int size, const std::vector<std::string>& colors = {});

}  // namespace regionedit
