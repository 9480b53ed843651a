// Offline trainer for the toy denoiser checkpoint shipped under data/.
// Builds a corpus of single- and two-shape scenes over the full palette and
// runs plain SGD on the noise-prediction loss; the committed artifact makes
// every downstream run (and the test suite) independent of training time.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "regionedit/denoiser.hpp"
#include "regionedit/io.hpp"
#include "regionedit/synth.hpp"

using namespace regionedit;

namespace {

// embed_prompt adds the start/end markers; the word layout here matches what
// the edit pipeline assembles from a config (global words then region words).
PromptEmbedding shape_prompt(const std::vector<std::string>& shape_words) {
  std::vector<std::string> tokens{"a", "scene", "with"};
  tokens.insert(tokens.end(), shape_words.begin(), shape_words.end());
  return embed_prompt(tokens);
}

std::vector<TrainingSample> build_corpus(int frames, int size, std::uint64_t seed) {
  std::vector<TrainingSample> corpus;
  const double q = size / 4.0;  // quarter of the frame, the shape grid pitch
  const std::vector<std::pair<double, double>> centers = {
      {q, 2 * q}, {3 * q - 1, 2 * q}, {2 * q, q}, {2 * q, 3 * q - 1}};
  const std::vector<std::pair<double, double>> velocities = {{0, 1}, {0, -1}, {1, 0}, {-1, 0}};

  int variant = 0;
  for (const auto& [color, descriptor] : color_palette()) {
    (void)descriptor;
    for (ShapeKind kind : {ShapeKind::kSquare, ShapeKind::kCircle}) {
      for (std::size_t c = 0; c < centers.size(); ++c) {
        ShapeSpec shape;
        shape.kind = kind;
        shape.color_name = color;
        shape.x = centers[c].first;
        shape.y = centers[c].second;
        shape.size = kind == ShapeKind::kSquare ? 5.0 : 2.5;
        shape.vx = velocities[c].first;
        shape.vy = velocities[c].second;
        SyntheticScene scene{frames, size, size, {shape}};
        SceneRender render = synth_video(scene, seed + variant++);
        corpus.push_back({render.frames, shape_prompt({color, to_string(kind)})});
      }
    }
  }

  // Mirrored two-shape scenes so inversion sees multi-object clips too.
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"red", "green"}, {"blue", "yellow"}, {"magenta", "cyan"}, {"orange", "white"},
      {"green", "blue"}, {"red", "red"}};
  for (const auto& [left, right] : pairs) {
    SyntheticScene scene = default_scene(frames, size, {left, right});
    SceneRender render = synth_video(scene, seed + variant++);
    corpus.push_back(
        {render.frames, shape_prompt({left, "square", right, "square"})});
  }
  return corpus;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"train the toy denoiser and write the reusable checkpoint"};
  std::string out = "data/toy_checkpoint.bin";
  int steps = 600;
  double lr = 2e-3;
  std::uint64_t seed = 11;
  int frames = 4;
  int size = 16;
  int log_every = 50;
  app.add_option("--out", out, "checkpoint path");
  app.add_option("--steps", steps, "SGD steps");
  app.add_option("--lr", lr, "learning rate");
  app.add_option("--seed", seed, "weight + sampling seed");
  app.add_option("--frames", frames, "frames per training clip");
  app.add_option("--size", size, "clip resolution");
  app.add_option("--log-every", log_every, "loss print interval");
  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<TrainingSample> corpus = build_corpus(frames, size, seed);
    std::cout << "corpus: " << corpus.size() << " clips at " << size << "x" << size << "\n";

    ToyDenoiser denoiser(DenoiserWeights::seeded(DenoiserConfig{}, seed));
    Rng rng(seed);
    std::vector<double> losses = train_toy(denoiser, corpus, steps, lr, rng);
    for (int i = 0; i < static_cast<int>(losses.size()); ++i)
      if (i % log_every == 0 || i + 1 == static_cast<int>(losses.size()))
        std::printf("step %4d  loss %.6f\n", i, losses[i]);

    double tail = 0.0;
    int tail_n = std::min<int>(50, static_cast<int>(losses.size()));
    for (int i = static_cast<int>(losses.size()) - tail_n; i < static_cast<int>(losses.size()); ++i)
      tail += losses[i];
    std::printf("mean loss over last %d steps: %.6f\n", tail_n, tail / tail_n);

    save_weights(out, denoiser.weights());
    std::cout << "wrote " << out << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
