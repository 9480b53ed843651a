#pragma once

#include <functional>
#include <map>
#include <vector>

#include "regionedit/denoiser.hpp"
#include "regionedit/video.hpp"

namespace regionedit {

// Linear-beta schedule plus the evenly spaced subset of steps actually
// walked. Step -1 denotes the clean state (cumulative alpha exactly 1).
struct SchedulerParams {
  int train_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::vector<double> betas;           // length train_steps
  std::vector<double> alphas_cumprod;  // length train_steps
  std::vector<int> sample_steps;       // ascending, within [0, train_steps)

  double alpha_bar(int step) const;
  bool is_sample_step(int step) const;
};

SchedulerParams make_schedule(int train_steps = 1000, double beta_start = 1e-4,
                              double beta_end = 0.02, int sample_steps = 50);

// One deterministic DDIM transition; the same closed form serves inversion
// (to > from) and denoising (to < from).
VideoLatent ddim_step(const VideoLatent& z, const VideoLatent& eps, int t_from, int t_to,
                      const SchedulerParams& params);

// Closed-form forward noising at an arbitrary train step (training only).
VideoLatent forward_noise(const VideoLatent& z0, const Tensor& eps, int t,
                          const SchedulerParams& params);

struct TrajectoryNode {
  int step = -1;      // train step of this latent; -1 = clean
  VideoLatent latent;
  VideoLatent eps;    // noise used to reach this node; empty at the clean node
};

// Cached inversion chain: nodes[0] is the clean latent, nodes[i] the latent at
// sample step i-1's train index. Self-attention features are keyed by
// (block, node index) and split per frame.
struct Trajectory {
  std::vector<TrajectoryNode> nodes;
  std::map<std::pair<int, int>, std::vector<Tensor>> features;

  int length() const { return static_cast<int>(nodes.size()); }
  const TrajectoryNode& node(int i) const { return nodes.at(i); }
};

struct InvertOptions {
  // Trajectory node indices whose producing forward pass records features.
  std::vector<int> feature_nodes;
};

Trajectory ddim_invert(const VideoLatent& z0, const ToyDenoiser& denoiser,
                       const PromptEmbedding& prompt, const SchedulerParams& params,
                       const InvertOptions& options = {});

// Denoising configuration. Iteration index runs 0 (noisiest) .. n-1; the
// normalized timestep handed to the modulation schedules is
// (n-1-i)/(n-1), so it starts at 1 and decays to 0.
struct DenoiseHooks {
  // Layout modulation, active for iterations [0, modulate_steps). The context
  // `t` field is overwritten per step.
  const ModulationContext* modulation = nullptr;
  int modulate_steps = 0;
  // Called after each update with (iteration, node index reached, latent).
  std::function<void(int, int, VideoLatent&)> blend;
  // When set, each step's latent is restored from this trajectory instead of
  // the arithmetic update: the cached chain walked back verbatim. Forwards
  // still run at captured steps so recordings see identical inputs.
  const Trajectory* replay = nullptr;
  // iteration index -> capture slot for that step's attention maps.
  std::map<int, AttentionCapture*> capture;
};

VideoLatent ddim_denoise(const VideoLatent& z_top, const ToyDenoiser& denoiser,
                         const PromptEmbedding& prompt, const SchedulerParams& params,
                         const DenoiseHooks& hooks = {});

}  // namespace regionedit
