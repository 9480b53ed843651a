#pragma once

#include <vector>

#include "regionedit/layout.hpp"
#include "regionedit/tensor.hpp"
#include "regionedit/video.hpp"

namespace regionedit::testing {

inline Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  Tensor t = Tensor::zeros({rows, cols});
  t.data = std::move(values);
  return t;
}

inline Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 1.0) {
  Tensor t = Tensor::zeros({rows, cols});
  t.fill_gaussian(rng, stddev);
  return t;
}

inline BoolGrid grid_from(int h, int w, const std::vector<int>& cells) {
  BoolGrid g(h, w);
  for (std::size_t i = 0; i < g.cells.size(); ++i) g.cells[i] = cells[i] ? 1 : 0;
  return g;
}

// Rectangle [y0,y1) x [x0,x1) set to true.
inline BoolGrid rect_mask(int h, int w, int y0, int y1, int x0, int x1) {
  BoolGrid g(h, w);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) g.at(y, x) = 1;
  return g;
}

inline RegionSpec spec(int id, std::vector<std::string> prompt,
                       RegionLevel level = RegionLevel::kInstance, int priority = 1,
                       bool preserve = false) {
  RegionSpec r;
  r.id = id;
  r.prompt_tokens = std::move(prompt);
  r.level = level;
  r.priority = priority;
  r.preserve = preserve;
  return r;
}

// Single-frame layout over an h x w grid with the given (spec, mask) pairs.
inline LayoutSet layout_1f(int h, int w,
                           std::vector<std::pair<RegionSpec, BoolGrid>> regions) {
  LayoutSet layout;
  layout.frames = 1;
  layout.height = h;
  layout.width = w;
  layout.global_prompt_tokens = {"a", "scene", "with"};
  for (auto& [r, g] : regions) {
    layout.regions.push_back(r);
    layout.set_mask(0, r.id, g);
  }
  return layout;
}

inline VideoLatent random_video(int n, int h, int w, int c, Rng& rng) {
  VideoLatent v(n, h, w, c);
  v.data.fill_gaussian(rng);
  return v;
}

}  // namespace regionedit::testing
