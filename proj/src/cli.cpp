#include "regionedit/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "regionedit/clustering.hpp"
#include "regionedit/io.hpp"
#include "regionedit/pipeline.hpp"
#include "regionedit/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace regionedit {
namespace {

std::string index_name(const char* fmt, int a, int b = -1, int c = -1) {
  char buf[64];
  if (c >= 0)
    std::snprintf(buf, sizeof(buf), fmt, a, b, c);
  else if (b >= 0)
    std::snprintf(buf, sizeof(buf), fmt, a, b);
  else
    std::snprintf(buf, sizeof(buf), fmt, a);
  return buf;
}

json scene_to_json(const SyntheticScene& scene) {
  json shapes = json::array();
  for (const auto& s : scene.shapes) {
    shapes.push_back({{"kind", to_string(s.kind)},
                      {"color", s.color_name},
                      {"x", s.x},
                      {"y", s.y},
                      {"size", s.size},
                      {"vx", s.vx},
                      {"vy", s.vy}});
  }
  return {{"frames", scene.frames},
          {"height", scene.height},
          {"width", scene.width},
          {"shapes", shapes}};
}

SyntheticScene scene_from_json(const json& j) {
  SyntheticScene scene;
  try {
    scene.frames = j.value("frames", scene.frames);
    scene.height = j.value("height", scene.height);
    scene.width = j.value("width", scene.width);
    for (const auto& js : j.value("shapes", json::array())) {
      ShapeSpec s;
      s.kind = shape_kind_from_string(js.value("kind", "square"));
      s.color_name = js.value("color", std::string());
      s.x = js.value("x", s.x);
      s.y = js.value("y", s.y);
      s.size = js.value("size", s.size);
      s.vx = js.value("vx", s.vx);
      s.vy = js.value("vy", s.vy);
      scene.shapes.push_back(s);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scene: ") + e.what());
  }
  return scene;
}

// Region table implied by a rendered scene: one instance region per shape,
// prompted by its color and kind words.
LayoutSet scene_layout(const SceneRender& render) {
  LayoutSet layout;
  layout.frames = render.scene.frames;
  layout.height = render.scene.height;
  layout.width = render.scene.width;
  layout.global_prompt_tokens = {"a", "scene", "with"};
  for (std::size_t i = 0; i < render.scene.shapes.size(); ++i) {
    const ShapeSpec& shape = render.scene.shapes[i];
    RegionSpec spec;
    spec.id = static_cast<int>(i) + 1;
    spec.prompt_tokens = {shape.color_name, to_string(shape.kind)};
    spec.level = RegionLevel::kInstance;
    spec.priority = 1;
    layout.regions.push_back(spec);
    for (int f = 0; f < layout.frames; ++f)
      layout.set_mask(f, spec.id, render.shape_masks[i][f]);
  }
  layout.validate();
  return layout;
}

ToyDenoiser denoiser_from(const std::string& checkpoint, std::uint64_t seed) {
  if (!checkpoint.empty()) return ToyDenoiser(load_weights(checkpoint));
  return ToyDenoiser(DenoiserWeights::seeded(DenoiserConfig{}, seed));
}

// (v - min) / (max - min) -> byte; a constant map renders mid-gray.
std::vector<std::uint8_t> normalized_bytes(const std::vector<double>& values) {
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<std::uint8_t> bytes(values.size(), 128);
  if (hi > lo)
    for (std::size_t i = 0; i < values.size(); ++i)
      bytes[i] = static_cast<std::uint8_t>(std::lround((values[i] - lo) / (hi - lo) * 255.0));
  return bytes;
}

struct SynthArgs {
  std::string out;
  std::string scene_file;
  int frames = 4;
  int size = 16;
  std::vector<std::string> colors;
  std::uint64_t seed = 7;
};

void run_synth(const SynthArgs& a) {
  SyntheticScene scene;
  if (!a.scene_file.empty())
    scene = scene_from_json(json::parse(read_file(a.scene_file)));
  else
    scene = default_scene(a.frames, a.size, a.colors);
  SceneRender render = synth_video(scene, a.seed);

  fs::path base(a.out);
  fs::create_directories(base);
  write_video((base / "video.f32").string(), render.frames);
  write_flow((base / "flow.f32").string(), render.flow);
  for (int f = 0; f < render.scene.frames; ++f)
    write_frame_ppm((base / index_name("frame_%03d.ppm", f)).string(), render.frames, f);
  write_layout_manifest((base / "layout").string(), scene_layout(render));
  atomic_write((base / "scene.json").string(), scene_to_json(render.scene).dump(2) + "\n");
  std::cout << "wrote " << render.scene.frames << " frames (" << render.scene.height << "x"
            << render.scene.width << ", " << render.scene.shapes.size() << " shapes) to " << a.out
            << "\n";
}

struct InvertArgs {
  std::string video;
  std::string out;
  std::string prompt = "a scene with";
  std::string checkpoint;
  int steps = 50;
  int train_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::uint64_t seed = 7;
};

void run_invert(const InvertArgs& a) {
  VideoLatent video = read_video(a.video);
  ToyDenoiser denoiser = denoiser_from(a.checkpoint, a.seed);
  SchedulerParams params = make_schedule(a.train_steps, a.beta_start, a.beta_end, a.steps);
  PromptEmbedding prompt = embed_prompt(tokenize(a.prompt));
  Trajectory traj = ddim_invert(video, denoiser, prompt, params);

  fs::path base(a.out);
  fs::create_directories(base);
  Tensor stacked = Tensor::zeros({static_cast<std::size_t>(traj.length()),
                                  static_cast<std::size_t>(video.frames),
                                  static_cast<std::size_t>(video.height),
                                  static_cast<std::size_t>(video.width),
                                  static_cast<std::size_t>(video.channels)});
  std::size_t node_size = video.data.data.size();
  for (int i = 0; i < traj.length(); ++i)
    std::copy(traj.node(i).latent.data.data.begin(), traj.node(i).latent.data.data.end(),
              stacked.data.begin() + static_cast<std::ptrdiff_t>(i * node_size));
  write_raw_tensor((base / "trajectory.f32").string(), stacked);
  write_video((base / "noise.f32").string(), traj.nodes.back().latent);
  std::cout << "inverted " << a.steps << " steps, final latent at "
            << (base / "noise.f32").string() << "\n";
}

struct ClusterArgs {
  std::string video;
  std::string out;
  std::string prompt = "a scene with";
  std::string checkpoint;
  int k = 3;
  int steps = 50;
  int feature_node = 25;
  int feature_block = 1;
  std::uint64_t seed = 7;
};

void run_cluster(const ClusterArgs& a) {
  VideoLatent video = read_video(a.video);
  ToyDenoiser denoiser = denoiser_from(a.checkpoint, a.seed);
  SchedulerParams params = make_schedule(1000, 1e-4, 0.02, a.steps);
  PromptEmbedding prompt = embed_prompt(tokenize(a.prompt));
  InvertOptions options;
  options.feature_nodes = {a.feature_node};
  Trajectory traj = ddim_invert(video, denoiser, prompt, params, options);

  FeatureStack features = collect_features(traj, a.feature_block, a.feature_node);
  ClusterLayout clusters = match_clusters(cluster_frames(features, a.k, a.seed));

  fs::path base(a.out);
  fs::create_directories(base);
  json labels = json::array();
  for (const auto& frame : clusters.labels) labels.push_back(frame);
  json doc = {{"k", clusters.k},
              {"frames", video.frames},
              {"height", video.height},
              {"width", video.width},
              {"feature_node", a.feature_node},
              {"feature_block", a.feature_block},
              {"labels", labels}};
  atomic_write((base / "clusters.json").string(), doc.dump(2) + "\n");
  for (int f = 0; f < video.frames; ++f) {
    std::vector<std::uint8_t> bytes;
    for (int label : clusters.labels[f])
      bytes.push_back(static_cast<std::uint8_t>(std::min(255, label * 40)));
    write_gray_pgm((base / index_name("clusters_f%03d.pgm", f)).string(), bytes, video.height,
                   video.width);
  }
  std::cout << "clustered " << video.frames << " frames into " << a.k << " groups\n";
}

struct EditArgs {
  std::string config;
  std::string video;
  std::string out;
  std::string layout;
  std::string flow;
};

void run_edit_cmd(const EditArgs& a) {
  EditConfig config = EditConfig::load(a.config);
  VideoLatent video = read_video(a.video);
  FlowField flow;
  bool has_flow = !a.flow.empty();
  if (has_flow) flow = read_flow(a.flow);

  LayoutSource source;
  if (!a.layout.empty())
    source.manifest_path = a.layout;
  else
    source.from_clusters = true;

  EditArtifacts artifacts = run_edit(config, video, source, has_flow ? &flow : nullptr);
  write_artifacts(a.out, config, artifacts);
  for (const MetricRow& row : artifacts.report.rows())
    std::cout << row.metric << "," << format_double(row.value) << "," << row.scope << "\n";
}

struct EvalArgs {
  std::string run;
  std::string video;
  std::string flow;
  std::string out;
};

void run_eval(const EvalArgs& a) {
  fs::path base(a.run);
  EditConfig config = EditConfig::load((base / "config.json").string());
  VideoLatent video = read_video(a.video.empty() ? (base / "edited.f32").string() : a.video);
  LayoutSet layout = read_layout_manifest((base / "layout").string());

  MetricReport report;
  ProxyEmbedder embedder{load_denoiser(config).weights().w_in};
  report.clip_f_proxy = frame_consistency(video, embedder);
  auto sources = region_descriptors(config, false);
  auto targets = region_descriptors(config, true);
  if (sources && targets) {
    report.has_alignment = true;
    report.region_alignment = prompt_alignment_per_region(video, layout, *targets);
    report.clip_t_proxy = prompt_alignment(video, layout, *targets);
    report.region_accuracy = edit_accuracy_per_region(video, layout, *sources, *targets);
    double sum = 0.0;
    for (const auto& [id, acc] : report.region_accuracy) sum += acc;
    if (!report.region_accuracy.empty())
      report.edit_accuracy = sum / static_cast<double>(report.region_accuracy.size());
  }
  if (!a.flow.empty()) {
    report.has_warp = true;
    report.warp_err = warp_error(video, read_flow(a.flow));
    if (report.has_alignment) report.q_edit = q_edit(report.clip_t_proxy, report.warp_err);
  }
  for (const MetricRow& row : report.rows())
    std::cout << row.metric << "," << format_double(row.value) << "," << row.scope << "\n";
  if (!a.out.empty()) write_report(a.out, report);
}

struct AttnDumpArgs {
  std::string run;
  std::string out;
  int step = -1;   // -1 = every recorded step
  int block = -1;  // -1 = every block
};

void dump_cross_map(const fs::path& out, const Tensor& map, const EditConfig& config,
                    const LayoutSet* layout, int step, int block, json& index) {
  int rows = static_cast<int>(map.shape[0]), cols = static_cast<int>(map.shape[1]);
  if (!layout || layout->frames <= 0) throw ValidationError("attn-dump: run has no layout");
  int tokens = layout->height * layout->width;
  if (rows != layout->frames * tokens)
    throw ValidationError("attn-dump: attention rows do not match the layout resolution");

  for (int f = 0; f < layout->frames; ++f) {
    for (int j = 0; j < cols; ++j) {
      std::vector<double> values(static_cast<std::size_t>(tokens));
      for (int q = 0; q < tokens; ++q) values[q] = map.at(f * tokens + q, j);
      std::string name = index_name("cross_s%02d", step) + index_name("_b%d", block) +
                         index_name("_f%03d_tok%02d.pgm", f, j);
      write_gray_pgm((out / name).string(), normalized_bytes(values), layout->height,
                     layout->width);
      index.push_back({{"file", name}, {"kind", "cross"}, {"step", step},
                       {"block", block}, {"frame", f}, {"token", j}});
    }
  }

  // Per-region view: weight summed over the region's own span columns.
  EditText text = build_edit_text(config);
  for (const auto& [region, span] : text.target.region_spans) {
    for (int f = 0; f < layout->frames; ++f) {
      std::vector<double> values(static_cast<std::size_t>(tokens), 0.0);
      for (int q = 0; q < tokens; ++q)
        for (int j = span.begin; j < span.end && j < cols; ++j)
          values[q] += map.at(f * tokens + q, j);
      std::string name = index_name("cross_s%02d", step) + index_name("_b%d", block) +
                         index_name("_f%03d_r%d.pgm", f, region);
      write_gray_pgm((out / name).string(), normalized_bytes(values), layout->height,
                     layout->width);
      index.push_back({{"file", name}, {"kind", "cross_region"}, {"step", step},
                       {"block", block}, {"frame", f}, {"region", region}});
    }
  }
}

void dump_self_map(const fs::path& out, const Tensor& map, const LayoutSet& layout, int step,
                   int block, json& index) {
  int tokens = layout.height * layout.width;
  int cols = static_cast<int>(map.shape[1]);
  if (static_cast<int>(map.shape[0]) != layout.frames * tokens)
    throw ValidationError("attn-dump: attention rows do not match the layout resolution");
  TokenLabels labels = region_labels(layout);

  std::vector<int> ids{0};
  for (const auto& r : layout.regions) ids.push_back(r.id);
  for (int region : ids) {
    // Mean over the region's query rows, rendered per key frame.
    std::vector<double> mean(static_cast<std::size_t>(cols), 0.0);
    long hits = 0;
    for (int f = 0; f < layout.frames; ++f)
      for (int q = 0; q < tokens; ++q) {
        if (labels.label(f, q) != region) continue;
        ++hits;
        for (int j = 0; j < cols; ++j) mean[j] += map.at(f * tokens + q, j);
      }
    if (hits == 0) continue;
    for (double& v : mean) v /= static_cast<double>(hits);
    for (int f = 0; f < layout.frames; ++f) {
      std::vector<double> values(mean.begin() + static_cast<std::ptrdiff_t>(f) * tokens,
                                 mean.begin() + static_cast<std::ptrdiff_t>(f + 1) * tokens);
      std::string name = index_name("self_s%02d", step) + index_name("_b%d", block) +
                         index_name("_r%d_f%03d.pgm", region, f);
      write_gray_pgm((out / name).string(), normalized_bytes(values), layout.height, layout.width);
      index.push_back({{"file", name}, {"kind", "self_region"}, {"step", step},
                       {"block", block}, {"region", region}, {"frame", f}});
    }
  }
}

void run_attn_dump(const AttnDumpArgs& a) {
  fs::path base(a.run);
  fs::path out = a.out.empty() ? base / "attn_maps" : fs::path(a.out);
  EditConfig config = EditConfig::load((base / "config.json").string());
  LayoutSet layout = read_layout_manifest((base / "layout").string());
  fs::create_directories(out);

  json index = json::array();
  int found = 0;
  for (int step = 0; step < config.sample_steps; ++step) {
    if (a.step >= 0 && step != a.step) continue;
    for (int block = 0; block < 8; ++block) {
      if (a.block >= 0 && block != a.block) continue;
      fs::path cross = base / index_name("attn_step%02d_block%d_cross.f32", step, block);
      if (fs::exists(cross)) {
        dump_cross_map(out, read_raw_tensor(cross.string()), config, &layout, step, block, index);
        ++found;
      }
      fs::path self_map = base / index_name("attn_step%02d_block%d_self.f32", step, block);
      if (fs::exists(self_map)) {
        dump_self_map(out, read_raw_tensor(self_map.string()), layout, step, block, index);
        ++found;
      }
    }
  }
  if (found == 0) throw ValidationError("attn-dump: no recorded attention maps in " + a.run);
  atomic_write((out / "index.json").string(), index.dump(2) + "\n");
  std::cout << "rendered " << index.size() << " maps from " << found << " recordings to "
            << out.string() << "\n";
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
  CLI::App app{"region-controlled video editing on a toy latent diffusion stack"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "render a synthetic scene with ground truth");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--scene", synth.scene_file, "scene description JSON");
  synth_cmd->add_option("--frames", synth.frames, "frame count (without --scene)");
  synth_cmd->add_option("--size", synth.size, "square resolution (without --scene)");
  synth_cmd->add_option("--colors", synth.colors, "shape colors (without --scene)")->delimiter(',');
  synth_cmd->add_option("--seed", synth.seed, "scene seed");
  synth_cmd->callback([&] { run_synth(synth); });

  InvertArgs invert;
  CLI::App* invert_cmd = app.add_subcommand("invert", "deterministic inversion of a video");
  invert_cmd->add_option("--video", invert.video, "input video tensor")->required();
  invert_cmd->add_option("--out", invert.out, "output directory")->required();
  invert_cmd->add_option("--prompt", invert.prompt, "conditioning text");
  invert_cmd->add_option("--checkpoint", invert.checkpoint, "denoiser weights");
  invert_cmd->add_option("--steps", invert.steps, "sampling steps");
  invert_cmd->add_option("--train-steps", invert.train_steps, "scheduler train steps");
  invert_cmd->add_option("--beta-start", invert.beta_start, "schedule start");
  invert_cmd->add_option("--beta-end", invert.beta_end, "schedule end");
  invert_cmd->add_option("--seed", invert.seed, "weight seed when no checkpoint is given");
  invert_cmd->callback([&] { run_invert(invert); });

  ClusterArgs cluster;
  CLI::App* cluster_cmd =
      app.add_subcommand("cluster", "group tokens by inversion-time attention features");
  cluster_cmd->add_option("--video", cluster.video, "input video tensor")->required();
  cluster_cmd->add_option("--out", cluster.out, "output directory")->required();
  cluster_cmd->add_option("--k", cluster.k, "cluster count");
  cluster_cmd->add_option("--prompt", cluster.prompt, "conditioning text");
  cluster_cmd->add_option("--checkpoint", cluster.checkpoint, "denoiser weights");
  cluster_cmd->add_option("--steps", cluster.steps, "sampling steps");
  cluster_cmd->add_option("--feature-node", cluster.feature_node, "trajectory node to harvest");
  cluster_cmd->add_option("--feature-block", cluster.feature_block, "attention block to harvest");
  cluster_cmd->add_option("--seed", cluster.seed, "clustering seed");
  cluster_cmd->callback([&] { run_cluster(cluster); });

  EditArgs edit;
  CLI::App* edit_cmd = app.add_subcommand("edit", "run a region-controlled edit");
  edit_cmd->add_option("--config", edit.config, "edit configuration JSON")->required();
  edit_cmd->add_option("--video", edit.video, "input video tensor")->required();
  edit_cmd->add_option("--out", edit.out, "output directory")->required();
  edit_cmd->add_option("--layout", edit.layout,
                       "layout manifest directory (omit to derive regions by clustering)");
  edit_cmd->add_option("--flow", edit.flow, "ground-truth flow for warp metrics");
  edit_cmd->callback([&] { run_edit_cmd(edit); });

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "recompute metrics for a finished run");
  eval_cmd->add_option("--run", eval.run, "edit output directory")->required();
  eval_cmd->add_option("--video", eval.video, "score this video instead of the run's result");
  eval_cmd->add_option("--flow", eval.flow, "ground-truth flow for warp metrics");
  eval_cmd->add_option("--out", eval.out, "also write the report CSV here");
  eval_cmd->callback([&] { run_eval(eval); });

  AttnDumpArgs attn;
  CLI::App* attn_cmd = app.add_subcommand("attn-dump", "render recorded attention maps as images");
  attn_cmd->add_option("--run", attn.run, "edit output directory")->required();
  attn_cmd->add_option("--out", attn.out, "image directory (default: <run>/attn_maps)");
  attn_cmd->add_option("--step", attn.step, "only this recorded iteration");
  attn_cmd->add_option("--block", attn.block, "only this block");
  attn_cmd->callback([&] { run_attn_dump(attn); });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace regionedit
