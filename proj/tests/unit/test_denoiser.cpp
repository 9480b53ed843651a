#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "regionedit/denoiser.hpp"

using namespace regionedit;

namespace {

DenoiserConfig tiny_config() {
  DenoiserConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.blocks = 2;
  cfg.d_text = 4;
  cfg.hidden = 16;
  cfg.channels = 3;
  return cfg;
}

double mse_loss(const ToyDenoiser& denoiser, const VideoLatent& z, int t,
                const PromptEmbedding& prompt, const Tensor& target) {
  ForwardCache cache;
  VideoLatent pred = denoiser.forward_cached(z, t, prompt, cache);
  Tensor diff = pred.data;
  sub_inplace(diff, target);
  return dot(diff, diff) / diff.numel();
}

}  // namespace

TEST_SUITE_BEGIN("denoiser");

TEST_CASE("forward preserves the latent shape") {
  Rng rng(40);
  ToyDenoiser denoiser(DenoiserWeights::seeded(DenoiserConfig{}, 7));
  VideoLatent z = testing::random_video(2, 4, 4, 3, rng);
  PromptEmbedding prompt = embed_prompt({"a", "red", "square"});
  VideoLatent out = denoiser.predict(z, 500, prompt);
  CHECK(out.same_shape(z));
  CHECK(out.data.all_finite());
}

TEST_CASE("forward is deterministic in all inputs") {
  Rng rng(41);
  ToyDenoiser denoiser(DenoiserWeights::seeded(DenoiserConfig{}, 11));
  VideoLatent z = testing::random_video(2, 4, 4, 3, rng);
  PromptEmbedding prompt = embed_prompt({"blue", "circle"});
  VideoLatent a = denoiser.predict(z, 123, prompt);
  VideoLatent b = denoiser.predict(z, 123, prompt);
  CHECK(a.data.data == b.data.data);
  VideoLatent c = denoiser.predict(z, 124, prompt);
  CHECK(a.data.data != c.data.data);  // time embedding reaches the output
}

TEST_CASE("seeded weights are reproducible and seed-sensitive") {
  DenoiserWeights a = DenoiserWeights::seeded(DenoiserConfig{}, 7);
  DenoiserWeights b = DenoiserWeights::seeded(DenoiserConfig{}, 7);
  DenoiserWeights c = DenoiserWeights::seeded(DenoiserConfig{}, 8);
  CHECK(a.w_in.data == b.w_in.data);
  CHECK(a.blocks[1].self_attn.wq.data == b.blocks[1].self_attn.wq.data);
  CHECK(a.w_in.data != c.w_in.data);
}

TEST_CASE("for_each enumerates a stable parameter order") {
  DenoiserWeights w = DenoiserWeights::seeded(tiny_config(), 3);
  std::vector<std::string> names;
  w.for_each([&](const std::string& n, Tensor&) { names.push_back(n); });
  REQUIRE(names.size() > 4);
  CHECK(names.front() == "w_in");
  CHECK(names[1] == "block0.self.wq");
  CHECK(names.back() == "b_out");
  std::vector<std::string> again;
  w.for_each([&](const std::string& n, Tensor&) { again.push_back(n); });
  CHECK(names == again);
}

TEST_CASE("time embedding separates nearby steps") {
  Tensor a = time_embedding(10, 64);
  Tensor b = time_embedding(11, 64);
  CHECK(a.numel() == 64);
  CHECK(max_abs_diff(a, b) > 1e-4);
  CHECK(time_embedding(10, 64).data == a.data);
}

TEST_CASE("analytic gradients match central differences") {
  const DenoiserConfig cfg = tiny_config();
  Rng rng(42);
  ToyDenoiser denoiser(DenoiserWeights::seeded(cfg, 5));
  VideoLatent z = testing::random_video(1, 1, 2, cfg.channels, rng);  // 2 tokens
  PromptEmbedding prompt = embed_prompt({"red", "square"}, cfg.d_text);
  Tensor target = Tensor::zeros(z.data.shape);
  target.fill_gaussian(rng);
  const int t = 321;

  ForwardCache cache;
  VideoLatent pred = denoiser.forward_cached(z, t, prompt, cache);
  Tensor diff = pred.data;
  sub_inplace(diff, target);
  Tensor d_out = diff.reshaped({diff.numel() / cfg.channels, static_cast<std::size_t>(cfg.channels)});
  scale_inplace(d_out, 2.0 / diff.numel());
  DenoiserWeights grads = DenoiserWeights::zeros_like(denoiser.weights());
  denoiser.backward(cache, d_out, grads);

  const double h = 1e-5;
  double worst = 0.0;
  std::vector<Tensor*> params, gs;
  denoiser.weights().for_each([&](const std::string&, Tensor& p) { params.push_back(&p); });
  grads.for_each([&](const std::string&, Tensor& g) { gs.push_back(&g); });
  REQUIRE(params.size() == gs.size());
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double keep = p.data[i];
      p.data[i] = keep + h;
      const double up = mse_loss(denoiser, z, t, prompt, target);
      p.data[i] = keep - h;
      const double down = mse_loss(denoiser, z, t, prompt, target);
      p.data[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = gs[pi]->data[i];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("training with zero learning rate leaves weights unchanged") {
  Rng data_rng(43);
  ToyDenoiser denoiser(DenoiserWeights::seeded(tiny_config(), 1));
  DenoiserWeights before = denoiser.weights();
  std::vector<TrainingSample> dataset{
      {testing::random_video(1, 2, 2, 3, data_rng), embed_prompt({"red"}, 4)}};
  Rng rng(44);
  train_toy(denoiser, dataset, 3, 0.0, rng);
  bool same = true;
  std::vector<const Tensor*> a, b;
  before.for_each([&](const std::string&, const Tensor& t) { a.push_back(&t); });
  denoiser.weights().for_each([&](const std::string&, const Tensor& t) { b.push_back(&t); });
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i]->data != b[i]->data) same = false;
  CHECK(same);
}

TEST_CASE("one training step moves the weights") {
  Rng data_rng(45);
  ToyDenoiser denoiser(DenoiserWeights::seeded(tiny_config(), 2));
  Tensor w_in_before = denoiser.weights().w_in;
  std::vector<TrainingSample> dataset{
      {testing::random_video(1, 2, 2, 3, data_rng), embed_prompt({"blue"}, 4)}};
  Rng rng(46);
  std::vector<double> losses = train_toy(denoiser, dataset, 1, 1e-2, rng);
  REQUIRE(losses.size() == 1);
  CHECK(denoiser.weights().w_in.data != w_in_before.data);
}

TEST_CASE("a short training run reduces the loss on a fixed batch") {
  Rng data_rng(47);
  ToyDenoiser denoiser(DenoiserWeights::seeded(tiny_config(), 9));
  std::vector<TrainingSample> dataset;
  for (int i = 0; i < 4; ++i)
    dataset.push_back({testing::random_video(1, 2, 2, 3, data_rng), embed_prompt({"red"}, 4)});
  Rng rng(48);
  std::vector<double> losses = train_toy(denoiser, dataset, 200, 5e-3, rng);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 20; ++i) head += losses[i];
  for (int i = 180; i < 200; ++i) tail += losses[i];
  CHECK(tail < head);
}

TEST_CASE("modulated forward differs from plain only when enabled") {
  Rng rng(49);
  ToyDenoiser denoiser(DenoiserWeights::seeded(DenoiserConfig{}, 12));
  VideoLatent z = testing::random_video(2, 4, 4, 3, rng);

  LayoutSet layout;
  layout.frames = 2;
  layout.height = 4;
  layout.width = 4;
  layout.regions = {testing::spec(1, {"red", "square"})};
  layout.set_mask(0, 1, testing::rect_mask(4, 4, 0, 2, 0, 2));
  layout.set_mask(1, 1, testing::rect_mask(4, 4, 0, 2, 1, 3));
  PromptEmbedding prompt = embed_prompt({"a", "red", "square"});
  CrossConditionMap map = build_cross_condition(layout, {{1, {2, 4}}}, prompt.length());
  TokenLabels labels = region_labels(layout);
  RegionAreas areas = compute_region_areas(layout);

  ModulationContext mod;
  mod.cross_map = &map;
  mod.labels = &labels;
  mod.areas = &areas;
  mod.t = 1.0;

  VideoLatent plain = denoiser.predict(z, 700, prompt);
  VideoLatent modded = denoiser.predict(z, 700, prompt, &mod);
  CHECK(plain.data.data != modded.data.data);

  // t = 0 zeroes both schedules: the hook must not perturb anything.
  mod.t = 0.0;
  VideoLatent silent = denoiser.predict(z, 700, prompt, &mod);
  CHECK(plain.data.data == silent.data.data);
}

TEST_CASE("attention capture returns row-stochastic head-averaged maps") {
  Rng rng(50);
  ToyDenoiser denoiser(DenoiserWeights::seeded(DenoiserConfig{}, 13));
  VideoLatent z = testing::random_video(2, 4, 4, 3, rng);
  PromptEmbedding prompt = embed_prompt({"green", "circle"});
  AttentionCapture capture;
  capture.want_cross = true;
  capture.want_self = true;
  denoiser.predict(z, 100, prompt, nullptr, &capture);
  REQUIRE(capture.cross.size() == 2);
  REQUIRE(capture.self_attn.size() == 2);
  CHECK(capture.cross[0].rows() == 32);           // N * T
  CHECK(capture.cross[0].cols() == 4);            // L
  CHECK(capture.self_attn[1].rows() == 32);
  CHECK(capture.self_attn[1].cols() == 32);
  for (const Tensor& m : {capture.cross[0], capture.self_attn[0]})
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m.cols(); ++j) s += m.at(i, j);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_SUITE_END();
