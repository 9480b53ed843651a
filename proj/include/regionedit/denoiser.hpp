#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "regionedit/modulation.hpp"
#include "regionedit/prompt.hpp"
#include "regionedit/video.hpp"

namespace regionedit {

struct DenoiserConfig {
  int d_model = 64;
  int heads = 4;
  int blocks = 2;
  int d_text = kTextDim;
  int hidden = 256;  // MLP width, 4 * d_model at defaults
  int channels = 3;

  int head_dim() const { return d_model / heads; }
};

struct AttnWeights {
  Tensor wq, wk, wv, wo;  // wq/wo: d x d; wk/wv: key_dim x d (d for self, d_text for cross)
};

struct BlockWeights {
  AttnWeights self_attn;
  AttnWeights cross_attn;
  Tensor w1, b1, w2, b2;  // tokenwise MLP
};

struct DenoiserWeights {
  DenoiserConfig config;
  std::uint64_t seed = 0;
  Tensor w_in;   // channels x d_model
  std::vector<BlockWeights> blocks;
  Tensor w_out;  // d_model x channels
  Tensor b_out;  // {channels}

  // Seeded 1/sqrt(fan_in) gaussian init; output projection scaled down so an
  // untrained net predicts near-zero noise and chains stay well-behaved.
  static DenoiserWeights seeded(const DenoiserConfig& cfg, std::uint64_t seed);
  static DenoiserWeights zeros_like(const DenoiserWeights& other);

  // Stable (name, tensor) enumeration for serialization and SGD updates.
  void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const;
};

// How a forward pass is modulated. `t` is the normalized timestep fed to the
// schedules; toggles support the ablation arms (cross only / cross + self).
struct ModulationContext {
  const CrossConditionMap* cross_map = nullptr;
  const TokenLabels* labels = nullptr;
  const RegionAreas* areas = nullptr;
  Schedule cross_schedule = Schedule::cross_default();
  Schedule self_schedule = Schedule::self_default();
  ModulationScope scope = ModulationScope::kRow;
  double t = 0.0;
  bool cross_enabled = true;
  bool self_enabled = true;
};

// Head-averaged attention maps of one forward pass, per block.
struct AttentionCapture {
  bool want_cross = false;
  bool want_self = false;
  std::vector<Tensor> cross;      // (N*T) x L
  std::vector<Tensor> self_attn;  // (N*T) x (N*T)
};

// Self-attention block outputs of one forward pass, split per frame.
struct FeatureCapture {
  std::vector<std::vector<Tensor>> per_block;  // [block][frame], T x d_model
};

// Training-path intermediates kept for backward().
struct AttnCache {
  Tensor input;           // what q was projected from
  Tensor q, k, v;         // full width
  std::vector<Tensor> p;  // softmaxed weights per head
  Tensor concat;          // heads merged, pre-output-projection
};

struct BlockCache {
  AttnCache self_attn;
  AttnCache cross_attn;
  Tensor mlp_in, u, r;  // u pre-relu, r post-relu
};

struct ForwardCache {
  Tensor x;   // token matrix
  Tensor h0;  // post input projection + time embedding
  std::vector<BlockCache> blocks;
  Tensor h_final;
  Tensor text;  // prompt matrix
};

class ToyDenoiser {
 public:
  explicit ToyDenoiser(DenoiserWeights weights) : weights_(std::move(weights)) {}

  const DenoiserWeights& weights() const { return weights_; }
  DenoiserWeights& weights() { return weights_; }

  // Noise prediction. `mod` switches the attention layers to their layout-
  // conditioned form; captures are filled when non-null.
  VideoLatent predict(const VideoLatent& z, int timestep, const PromptEmbedding& prompt,
                      const ModulationContext* mod = nullptr, AttentionCapture* attn = nullptr,
                      FeatureCapture* feats = nullptr) const;

  // Unmodulated forward keeping every intermediate for backward().
  VideoLatent forward_cached(const VideoLatent& z, int timestep, const PromptEmbedding& prompt,
                             ForwardCache& cache) const;
  // Gradients of a scalar loss wrt all weights, given d(loss)/d(output).
  void backward(const ForwardCache& cache, const Tensor& d_out, DenoiserWeights& grads) const;

 private:
  DenoiserWeights weights_;
};

Tensor time_embedding(int timestep, int d_model);

struct TrainingSample {
  VideoLatent video;
  PromptEmbedding prompt;
};

// Plain SGD on the eps-prediction MSE. Mutates the denoiser; returns the
// per-step loss history. Throws "training diverged" on non-finite loss.
std::vector<double> train_toy(ToyDenoiser& denoiser, const std::vector<TrainingSample>& dataset,
                              int steps, double learning_rate, Rng& rng, int train_timesteps = 1000,
                              double beta_start = 1e-4, double beta_end = 0.02);

}  // namespace regionedit
