#pragma once

#include <string>
#include <vector>

#include "regionedit/denoiser.hpp"
#include "regionedit/layout.hpp"
#include "regionedit/metrics.hpp"
#include "regionedit/video.hpp"

namespace regionedit {

// All writers go through a temp-file + rename so failed runs never leave
// partial artifacts behind.
void atomic_write(const std::string& path, const std::string& bytes);

std::string read_file(const std::string& path);

// Binary PGM (P5), 0 = outside, 255 = inside.
void write_mask_pgm(const std::string& path, const BoolGrid& mask);
BoolGrid read_mask_pgm(const std::string& path);

// Grayscale PGM from arbitrary bytes (heatmaps, cluster label maps).
void write_gray_pgm(const std::string& path, const std::vector<std::uint8_t>& bytes, int height,
                    int width);

// Binary PPM (P6) of one frame, values clamped to [0,1].
void write_frame_ppm(const std::string& path, const VideoLatent& video, int frame);

// Raw little-endian float32 + JSON sidecar {dtype, order, shape}. `path` is
// the .f32 file; the sidecar lives at path + ".json".
void write_raw_tensor(const std::string& path, const Tensor& tensor);
Tensor read_raw_tensor(const std::string& path);

void write_video(const std::string& path, const VideoLatent& video);
VideoLatent read_video(const std::string& path);

void write_flow(const std::string& path, const FlowField& flow);
FlowField read_flow(const std::string& path);

// Denoiser weights: float64 blob in for_each order + JSON manifest.
void save_weights(const std::string& path, const DenoiserWeights& weights);
DenoiserWeights load_weights(const std::string& path);

std::string mask_file_name(int frame, int region_id);

// Layout manifest: region table + dims; masks resolved next to the manifest
// by the mask_f{frame:03}_r{id}.pgm convention.
void write_layout_manifest(const std::string& dir, const LayoutSet& layout);
LayoutSet read_layout_manifest(const std::string& dir);

void write_report(const std::string& csv_path, const MetricReport& report);

std::string format_double(double v);

}  // namespace regionedit
