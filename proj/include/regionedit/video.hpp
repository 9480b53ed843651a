#pragma once

#include "regionedit/tensor.hpp"

namespace regionedit {

// A short clip in latent space: frames x height x width x channels, row major.
// Pixel videos reuse the same container (channels = 3, values roughly [0,1]).
struct VideoLatent {
  int frames = 0;
  int height = 0;
  int width = 0;
  int channels = 0;
  Tensor data;  // shape {frames, height, width, channels}

  VideoLatent() = default;
  VideoLatent(int n, int h, int w, int c)
      : frames(n), height(h), width(w), channels(c),
        data(Tensor::zeros({static_cast<std::size_t>(n), static_cast<std::size_t>(h),
                            static_cast<std::size_t>(w), static_cast<std::size_t>(c)})) {}

  int tokens_per_frame() const { return height * width; }

  double& at(int f, int y, int x, int c) {
    return data.data[((static_cast<std::size_t>(f) * height + y) * width + x) * channels + c];
  }
  double at(int f, int y, int x, int c) const {
    return data.data[((static_cast<std::size_t>(f) * height + y) * width + x) * channels + c];
  }

  // Frame f as a (height*width) x channels matrix view copy.
  Tensor frame_tokens(int f) const {
    Tensor t = Tensor::zeros({static_cast<std::size_t>(height) * width, static_cast<std::size_t>(channels)});
    const std::size_t per = static_cast<std::size_t>(height) * width * channels;
    std::copy(data.data.begin() + f * per, data.data.begin() + (f + 1) * per, t.data.begin());
    return t;
  }

  bool same_shape(const VideoLatent& o) const {
    return frames == o.frames && height == o.height && width == o.width && channels == o.channels;
  }
};

// Dense ground-truth optical flow between consecutive frames. pairs[i] maps
// frame i to frame i+1; each entry holds (dx, dy) in pixels, x along width.
struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<Tensor> pairs;  // each shape {height, width, 2}

  double dx(int pair, int y, int x) const {
    return pairs[pair].data[(static_cast<std::size_t>(y) * width + x) * 2 + 0];
  }
  double dy(int pair, int y, int x) const {
    return pairs[pair].data[(static_cast<std::size_t>(y) * width + x) * 2 + 1];
  }
};

}  // namespace regionedit
