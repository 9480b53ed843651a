#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "helpers.hpp"
#include "regionedit/diffusion.hpp"
#include "regionedit/layout.hpp"
#include "regionedit/prompt.hpp"

using namespace regionedit;
using namespace regionedit::testing;

namespace {

DenoiserConfig tiny_config() {
  DenoiserConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.blocks = 2;
  cfg.d_text = 4;
  cfg.hidden = 16;
  return cfg;
}

ToyDenoiser tiny_denoiser(std::uint64_t seed = 5) {
  return ToyDenoiser(DenoiserWeights::seeded(tiny_config(), seed));
}

// A denoiser whose output is identically zero: w_out is scaled from the base
// init, so zeroing it kills the prediction while keeping everything finite.
ToyDenoiser zero_denoiser() {
  ToyDenoiser d = tiny_denoiser();
  d.weights().for_each([](const std::string& name, Tensor& w) {
    if (name == "w_out" || name == "b_out") std::fill(w.data.begin(), w.data.end(), 0.0);
  });
  return d;
}

PromptEmbedding tiny_prompt() {
  DenoiserConfig cfg = tiny_config();
  return embed_prompt({"a", "scene"}, cfg.d_text);
}

VideoLatent tiny_video(Rng& rng, int frames = 2, int side = 4) {
  return random_video(frames, side, side, tiny_config().channels, rng);
}

}  // namespace

TEST_SUITE("diffusion") {
  TEST_CASE("default schedule matches an independently computed cumulative product") {
    SchedulerParams p = make_schedule();
    REQUIRE(p.betas.size() == 1000);
    REQUIRE(p.alphas_cumprod.size() == 1000);
    CHECK(p.betas.front() == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(p.betas.back() == doctest::Approx(0.02).epsilon(1e-12));

    // Oracle: recompute the cumulative product with a separate loop.
    double acc = 1.0;
    for (int i = 0; i < 1000; ++i) {
      const double beta = 1e-4 + (0.02 - 1e-4) * i / 999.0;
      acc *= 1.0 - beta;
      CHECK(p.alphas_cumprod[i] == doctest::Approx(acc).epsilon(1e-12));
    }
    CHECK(p.alpha_bar(0) == doctest::Approx(1.0 - 1e-4).epsilon(1e-12));
    CHECK(p.alpha_bar(-1) == 1.0);

    // Strictly decreasing, always in (0, 1).
    for (int i = 1; i < 1000; ++i) {
      CHECK(p.alphas_cumprod[i] < p.alphas_cumprod[i - 1]);
      CHECK(p.alphas_cumprod[i] > 0.0);
    }
  }

  TEST_CASE("sampled subset is evenly strided and covers the full range") {
    SchedulerParams p = make_schedule(1000, 1e-4, 0.02, 50);
    REQUIRE(p.sample_steps.size() == 50);
    for (int i = 0; i < 50; ++i) CHECK(p.sample_steps[i] == i * 20);
    CHECK(p.is_sample_step(-1));
    CHECK(p.is_sample_step(0));
    CHECK(p.is_sample_step(980));
    CHECK_FALSE(p.is_sample_step(981));
    CHECK_FALSE(p.is_sample_step(999));

    // sample_steps == train_steps keeps every step.
    SchedulerParams full = make_schedule(10, 1e-4, 0.02, 10);
    for (int i = 0; i < 10; ++i) CHECK(full.sample_steps[i] == i);
  }

  TEST_CASE("schedule parameter validation") {
    CHECK_THROWS_AS(make_schedule(1, 1e-4, 0.02, 1), ValidationError);
    CHECK_THROWS_AS(make_schedule(1000, 0.0, 0.02, 50), ValidationError);
    CHECK_THROWS_AS(make_schedule(1000, 0.02, 0.02, 50), ValidationError);
    CHECK_THROWS_AS(make_schedule(1000, 1e-4, 1.0, 50), ValidationError);
    CHECK_THROWS_AS(make_schedule(1000, 1e-4, 0.02, 0), ValidationError);
    CHECK_THROWS_AS(make_schedule(1000, 1e-4, 0.02, 1001), ValidationError);
  }

  TEST_CASE("ddim_step with zero eps is pure amplitude rescaling") {
    SchedulerParams p = make_schedule();
    Rng rng(31);
    VideoLatent z = tiny_video(rng);
    VideoLatent eps = z;
    std::fill(eps.data.data.begin(), eps.data.data.end(), 0.0);

    VideoLatent up = ddim_step(z, eps, -1, 980, p);
    const double scale = std::sqrt(p.alpha_bar(980));
    for (std::size_t i = 0; i < z.data.data.size(); ++i)
      CHECK(up.data.data[i] == doctest::Approx(scale * z.data.data[i]).epsilon(1e-12));
  }

  TEST_CASE("ddim_step round trip with identical eps recovers the latent") {
    SchedulerParams p = make_schedule();
    Rng rng(32);
    VideoLatent z = tiny_video(rng);
    VideoLatent eps = tiny_video(rng);

    VideoLatent up = ddim_step(z, eps, 200, 500, p);
    VideoLatent back = ddim_step(up, eps, 500, 200, p);
    CHECK(rel_l2_diff(back.data, z.data) < 1e-6);

    // Also through the clean endpoint.
    VideoLatent top = ddim_step(z, eps, -1, 980, p);
    VideoLatent clean = ddim_step(top, eps, 980, -1, p);
    CHECK(rel_l2_diff(clean.data, z.data) < 1e-6);
  }

  TEST_CASE("ddim_step rejects degenerate or off-grid transitions") {
    SchedulerParams p = make_schedule();
    Rng rng(33);
    VideoLatent z = tiny_video(rng);
    CHECK_THROWS_WITH_AS(ddim_step(z, z, 200, 200, p), "ddim_step: t_from equals t_to",
                         std::invalid_argument);
    CHECK_THROWS_AS(ddim_step(z, z, 0, 7, p), std::invalid_argument);
    CHECK_THROWS_AS(ddim_step(z, z, 999, 0, p), std::invalid_argument);
  }

  TEST_CASE("forward_noise matches the closed form") {
    SchedulerParams p = make_schedule();
    Rng rng(34);
    VideoLatent z0 = tiny_video(rng);
    Tensor eps = z0.data;
    for (double& v : eps.data) v = rng.gaussian();

    VideoLatent noised = forward_noise(z0, eps, 400, p);
    const double sa = std::sqrt(p.alpha_bar(400));
    const double sb = std::sqrt(1.0 - p.alpha_bar(400));
    for (std::size_t i = 0; i < eps.data.size(); ++i)
      CHECK(noised.data.data[i] ==
            doctest::Approx(sa * z0.data.data[i] + sb * eps.data[i]).epsilon(1e-12));
  }

  TEST_CASE("inversion produces a trajectory with one node per sampled step plus the clean one") {
    SchedulerParams p = make_schedule(1000, 1e-4, 0.02, 10);
    Rng rng(35);
    VideoLatent z0 = tiny_video(rng);
    ToyDenoiser d = tiny_denoiser();
    Trajectory traj = ddim_invert(z0, d, tiny_prompt(), p);

    REQUIRE(traj.length() == 11);
    CHECK(traj.node(0).step == -1);
    CHECK(traj.node(0).latent.data.data == z0.data.data);
    for (int i = 1; i <= 10; ++i) {
      CHECK(traj.node(i).step == p.sample_steps[i - 1]);
      CHECK(traj.node(i).latent.data.all_finite());
      CHECK(traj.node(i).eps.data.numel() == z0.data.numel());
    }
  }

  TEST_CASE("a zero denoiser turns inversion into the analytic scaling chain") {
    // With eps identically zero every transition is a rescale, so the whole
    // chain telescopes to sqrt(alpha_bar(last)) times the input.
    SchedulerParams p = make_schedule(1000, 1e-4, 0.02, 25);
    Rng rng(36);
    VideoLatent z0 = tiny_video(rng);
    Trajectory traj = ddim_invert(z0, zero_denoiser(), tiny_prompt(), p);

    const double scale = std::sqrt(p.alpha_bar(p.sample_steps.back()));
    VideoLatent expected = z0;
    for (double& v : expected.data.data) v *= scale;
    CHECK(rel_l2_diff(traj.nodes.back().latent.data, expected.data) < 1e-6);
  }

  TEST_CASE("inversion is deterministic") {
    SchedulerParams p = make_schedule(1000, 1e-4, 0.02, 8);
    Rng rng(37);
    VideoLatent z0 = tiny_video(rng);
    ToyDenoiser d = tiny_denoiser();
    Trajectory a = ddim_invert(z0, d, tiny_prompt(), p);
    Trajectory b = ddim_invert(z0, d, tiny_prompt(), p);
    for (int i = 0; i < a.length(); ++i)
      CHECK(a.node(i).latent.data.data == b.node(i).latent.data.data);
  }

  TEST_CASE("replay denoising restores the cached clean latent bit-exactly") {
    SchedulerParams p = make_schedule(1000, 1e-4, 0.02, 12);
    Rng rng(38);
    VideoLatent z0 = tiny_video(rng);
    ToyDenoiser d = tiny_denoiser();
    Trajectory traj = ddim_invert(z0, d, tiny_prompt(), p);

    DenoiseHooks hooks;
    hooks.replay = &traj;
    VideoLatent back = ddim_denoise(traj.nodes.back().latent, d, tiny_prompt(), p, hooks);
    CHECK(back.data.data == z0.data.data);

    // Length mismatch is rejected up front.
    SchedulerParams shorter = make_schedule(1000, 1e-4, 0.02, 11);
    CHECK_THROWS_AS(ddim_denoise(traj.nodes.back().latent, d, tiny_prompt(), shorter, hooks),
                    std::invalid_argument);
  }

  TEST_CASE("free denoising approximately undoes inversion") {
    SchedulerParams p = make_schedule();
    Rng rng(39);
    VideoLatent z0 = tiny_video(rng);
    ToyDenoiser d = tiny_denoiser();
    Trajectory traj = ddim_invert(z0, d, tiny_prompt(), p);
    VideoLatent back = ddim_denoise(traj.nodes.back().latent, d, tiny_prompt(), p, {});
    CHECK(rel_l2_diff(back.data, z0.data) < 1e-3);
  }

  TEST_CASE("an empty modulation window reduces to plain denoising bitwise") {
    SchedulerParams p = make_schedule(1000, 1e-4, 0.02, 6);
    Rng rng(40);
    const int side = 4;
    VideoLatent z0 = tiny_video(rng, 2, side);
    ToyDenoiser d = tiny_denoiser();
    PromptEmbedding prompt = tiny_prompt();
    Trajectory traj = ddim_invert(z0, d, prompt, p);

    LayoutSet layout = layout_1f(side, side, {{spec(1, {"a"}), rect_mask(side, side, 0, 2, 0, 2)}});
    layout.frames = 2;
    layout.set_mask(1, 1, rect_mask(side, side, 0, 2, 0, 2));
    std::map<int, TokenSpan> spans{{1, {1, 2}}};
    CrossConditionMap cross = build_cross_condition(layout, spans, prompt.length());
    TokenLabels labels = region_labels(layout);
    RegionAreas areas = compute_region_areas(layout);

    ModulationContext ctx;
    ctx.cross_map = &cross;
    ctx.labels = &labels;
    ctx.areas = &areas;

    DenoiseHooks with_window, without;
    with_window.modulation = &ctx;
    with_window.modulate_steps = 0;
    VideoLatent a = ddim_denoise(traj.nodes.back().latent, d, prompt, p, with_window);
    VideoLatent b = ddim_denoise(traj.nodes.back().latent, d, prompt, p, without);
    CHECK(a.data.data == b.data.data);

    // A non-empty window changes the output.
    with_window.modulate_steps = 3;
    VideoLatent c = ddim_denoise(traj.nodes.back().latent, d, prompt, p, with_window);
    CHECK(c.data.data != b.data.data);
  }

  TEST_CASE("attention capture slots fill only at their requested iterations") {
    SchedulerParams p = make_schedule(1000, 1e-4, 0.02, 5);
    Rng rng(41);
    VideoLatent z0 = tiny_video(rng);
    ToyDenoiser d = tiny_denoiser();
    PromptEmbedding prompt = tiny_prompt();
    Trajectory traj = ddim_invert(z0, d, prompt, p);

    AttentionCapture cap0, cap3;
    cap0.want_cross = cap0.want_self = true;
    cap3.want_cross = cap3.want_self = true;
    DenoiseHooks hooks;
    hooks.capture = {{0, &cap0}, {3, &cap3}};
    ddim_denoise(traj.nodes.back().latent, d, prompt, p, hooks);

    const DenoiserConfig cfg = tiny_config();
    REQUIRE(cap0.cross.size() == static_cast<std::size_t>(cfg.blocks));
    REQUIRE(cap3.self_attn.size() == static_cast<std::size_t>(cfg.blocks));
    const int rows = 2 * 4 * 4;
    CHECK(cap0.cross[0].shape == std::vector<std::size_t>{static_cast<std::size_t>(rows),
                                                          static_cast<std::size_t>(prompt.length())});
    CHECK(cap3.self_attn[1].shape == std::vector<std::size_t>{static_cast<std::size_t>(rows),
                                                              static_cast<std::size_t>(rows)});
    // Different steps see different latents, so the maps differ.
    CHECK(cap0.cross[0].data != cap3.cross[0].data);
  }

  TEST_CASE("feature recording keys match the requested nodes") {
    SchedulerParams p = make_schedule(1000, 1e-4, 0.02, 6);
    Rng rng(42);
    VideoLatent z0 = tiny_video(rng);
    ToyDenoiser d = tiny_denoiser();
    InvertOptions opts;
    opts.feature_nodes = {3, 6};
    Trajectory traj = ddim_invert(z0, d, tiny_prompt(), p, opts);

    const DenoiserConfig cfg = tiny_config();
    REQUIRE(traj.features.size() == static_cast<std::size_t>(2 * cfg.blocks));
    for (int node : {3, 6})
      for (int b = 0; b < cfg.blocks; ++b) {
        auto it = traj.features.find({b, node});
        REQUIRE(it != traj.features.end());
        REQUIRE(it->second.size() == 2);  // one entry per frame
        CHECK(it->second[0].shape ==
              std::vector<std::size_t>{16, static_cast<std::size_t>(cfg.d_model)});
      }
    CHECK(traj.features.find({0, 1}) == traj.features.end());
  }

  TEST_CASE("non-finite predictions abort with a divergence error") {
    SchedulerParams p = make_schedule(1000, 1e-4, 0.02, 4);
    Rng rng(43);
    VideoLatent z0 = tiny_video(rng);
    ToyDenoiser d = tiny_denoiser();
    d.weights().for_each([](const std::string& name, Tensor& w) {
      if (name == "w_out") std::fill(w.data.begin(), w.data.end(), 1e300);
    });
    CHECK_THROWS_WITH_AS(ddim_invert(z0, d, tiny_prompt(), p), "divergence", std::runtime_error);
  }
}
