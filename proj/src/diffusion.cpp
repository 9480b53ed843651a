#include "regionedit/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace regionedit {

double SchedulerParams::alpha_bar(int step) const {
  if (step == -1) return 1.0;
  if (step < 0 || step >= train_steps) throw std::invalid_argument("alpha_bar: step out of range");
  return alphas_cumprod[step];
}

bool SchedulerParams::is_sample_step(int step) const {
  if (step == -1) return true;
  return std::binary_search(sample_steps.begin(), sample_steps.end(), step);
}

SchedulerParams make_schedule(int train_steps, double beta_start, double beta_end,
                              int sample_steps) {
  if (train_steps < 2 || !(beta_start > 0.0) || !(beta_start < beta_end) || !(beta_end < 1.0))
    throw ValidationError("make_schedule: need 0 < beta_start < beta_end < 1");
  if (sample_steps < 1 || sample_steps > train_steps)
    throw ValidationError("make_schedule: sample_steps must be in [1, train_steps]");
  SchedulerParams p;
  p.train_steps = train_steps;
  p.beta_start = beta_start;
  p.beta_end = beta_end;
  p.betas.resize(train_steps);
  p.alphas_cumprod.resize(train_steps);
  double acc = 1.0;
  for (int i = 0; i < train_steps; ++i) {
    p.betas[i] = beta_start + (beta_end - beta_start) * i / (train_steps - 1);
    acc *= 1.0 - p.betas[i];
    p.alphas_cumprod[i] = acc;
  }
  p.sample_steps.resize(sample_steps);
  for (int i = 0; i < sample_steps; ++i)
    p.sample_steps[i] = static_cast<int>(static_cast<long>(i) * train_steps / sample_steps);
  return p;
}

VideoLatent ddim_step(const VideoLatent& z, const VideoLatent& eps, int t_from, int t_to,
                      const SchedulerParams& params) {
  if (t_from == t_to) throw std::invalid_argument("ddim_step: t_from equals t_to");
  if (!params.is_sample_step(t_from) || !params.is_sample_step(t_to))
    throw std::invalid_argument("ddim_step: steps must be sampled steps or -1");
  if (!z.same_shape(eps)) throw std::invalid_argument("ddim_step: shape mismatch");
  const double ab_from = params.alpha_bar(t_from);
  const double ab_to = params.alpha_bar(t_to);
  const double sa_from = std::sqrt(ab_from), sa_to = std::sqrt(ab_to);
  const double sb_from = std::sqrt(1.0 - ab_from), sb_to = std::sqrt(1.0 - ab_to);
  VideoLatent out = z;
  for (std::size_t i = 0; i < out.data.data.size(); ++i) {
    const double x0 = (z.data.data[i] - sb_from * eps.data.data[i]) / sa_from;
    out.data.data[i] = sa_to * x0 + sb_to * eps.data.data[i];
  }
  return out;
}

VideoLatent forward_noise(const VideoLatent& z0, const Tensor& eps, int t,
                          const SchedulerParams& params) {
  const double ab = params.alpha_bar(t);
  const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
  VideoLatent out = z0;
  for (std::size_t i = 0; i < out.data.data.size(); ++i)
    out.data.data[i] = sa * z0.data.data[i] + sb * eps.data[i];
  return out;
}

Trajectory ddim_invert(const VideoLatent& z0, const ToyDenoiser& denoiser,
                       const PromptEmbedding& prompt, const SchedulerParams& params,
                       const InvertOptions& options) {
  Trajectory traj;
  traj.nodes.push_back({-1, z0, {}});
  VideoLatent z = z0;
  const int n = static_cast<int>(params.sample_steps.size());
  for (int j = 0; j < n; ++j) {
    const int from = (j == 0) ? -1 : params.sample_steps[j - 1];
    const int to = params.sample_steps[j];
    FeatureCapture feats;
    const bool want = std::find(options.feature_nodes.begin(), options.feature_nodes.end(),
                                j + 1) != options.feature_nodes.end();
    VideoLatent eps = denoiser.predict(z, to, prompt, nullptr, nullptr, want ? &feats : nullptr);
    z = ddim_step(z, eps, from, to, params);
    if (!z.data.all_finite()) throw std::runtime_error("divergence");
    traj.nodes.push_back({to, z, std::move(eps)});
    if (want)
      for (std::size_t b = 0; b < feats.per_block.size(); ++b)
        traj.features[{static_cast<int>(b), j + 1}] = std::move(feats.per_block[b]);
  }
  return traj;
}

VideoLatent ddim_denoise(const VideoLatent& z_top, const ToyDenoiser& denoiser,
                         const PromptEmbedding& prompt, const SchedulerParams& params,
                         const DenoiseHooks& hooks) {
  const int n = static_cast<int>(params.sample_steps.size());
  if (hooks.replay && hooks.replay->length() != n + 1)
    throw std::invalid_argument("ddim_denoise: replay trajectory length mismatch");
  VideoLatent z = z_top;
  ModulationContext mod;
  for (int i = 0; i < n; ++i) {
    const int node = n - i;  // node being left; node-1 is reached after the step
    const int from = params.sample_steps[node - 1];
    const int to = (node - 1 == 0) ? -1 : params.sample_steps[node - 2];
    const double t_norm = (n > 1) ? static_cast<double>(n - 1 - i) / (n - 1) : 1.0;

    const ModulationContext* mod_ptr = nullptr;
    if (hooks.modulation && i < hooks.modulate_steps) {
      mod = *hooks.modulation;
      mod.t = t_norm;
      mod_ptr = &mod;
    }
    auto cap = hooks.capture.find(i);
    AttentionCapture* capture = (cap == hooks.capture.end()) ? nullptr : cap->second;

    if (hooks.replay) {
      // Trajectory restoration: the forward pass only feeds recorders; the
      // latent chain is the cached one, walked back exactly.
      if (mod_ptr || capture) denoiser.predict(z, from, prompt, mod_ptr, capture, nullptr);
      z = hooks.replay->node(node - 1).latent;
    } else {
      VideoLatent eps = denoiser.predict(z, from, prompt, mod_ptr, capture, nullptr);
      z = ddim_step(z, eps, from, to, params);
      if (!z.data.all_finite()) throw std::runtime_error("divergence");
    }
    if (hooks.blend) hooks.blend(i, node - 1, z);
  }
  return z;
}

}  // namespace regionedit
