#include "regionedit/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <memory>

#include "regionedit/io.hpp"
#include "regionedit/synth.hpp"

namespace regionedit {

namespace fs = std::filesystem;

namespace {

std::vector<const RegionConfig*> sorted_regions(const EditConfig& config) {
  std::vector<const RegionConfig*> out;
  for (const RegionConfig& r : config.regions) out.push_back(&r);
  std::sort(out.begin(), out.end(),
            [](const RegionConfig* a, const RegionConfig* b) { return a->id < b->id; });
  return out;
}

PromptEmbedding build_sequence(const EditConfig& config, bool target,
                               std::map<int, TokenSpan>* spans) {
  std::vector<std::string> words = tokenize(config.global_prompt);
  for (const RegionConfig* r : sorted_regions(config)) {
    const std::vector<std::string> part = tokenize(target ? r->target_prompt : r->source_prompt);
    // +1 for the start marker prepended by embed_prompt.
    if (spans)
      (*spans)[r->id] = {static_cast<int>(words.size()) + 1,
                         static_cast<int>(words.size() + part.size()) + 1};
    words.insert(words.end(), part.begin(), part.end());
  }
  return embed_prompt(words);
}

// Keep only config-listed regions; the config is the authority on level,
// priority, prompts, and the preserve flag, the base layout on masks.
LayoutSet apply_config_regions(const LayoutSet& base, const EditConfig& config) {
  LayoutSet out;
  out.frames = base.frames;
  out.height = base.height;
  out.width = base.width;
  out.global_prompt_tokens = tokenize(config.global_prompt);
  for (const RegionConfig& r : config.regions) {
    if (!base.has_region(r.id))
      throw ValidationError("regions: layout has no masks for region " + std::to_string(r.id));
    RegionSpec spec;
    spec.id = r.id;
    spec.level = r.level;
    spec.priority = r.priority;
    spec.prompt_tokens = tokenize(r.target_prompt);
    spec.preserve = r.preserve();
    out.regions.push_back(std::move(spec));
    for (int f = 0; f < base.frames; ++f) out.set_mask(f, r.id, base.mask(f, r.id));
  }
  return out;
}

}  // namespace

EditText build_edit_text(const EditConfig& config) {
  EditText text;
  text.source = build_sequence(config, false, nullptr);
  std::map<int, TokenSpan> spans;
  text.target = build_sequence(config, true, &spans);
  text.target.region_spans = std::move(spans);
  return text;
}

ToyDenoiser load_denoiser(const EditConfig& config) {
  if (!config.checkpoint.empty()) return ToyDenoiser(load_weights(config.checkpoint));
  return ToyDenoiser(DenoiserWeights::seeded(DenoiserConfig{}, config.seed));
}

std::optional<std::map<int, Descriptor>> region_descriptors(const EditConfig& config, bool target) {
  std::map<int, Descriptor> out;
  for (const RegionConfig& r : config.regions) {
    if (r.preserve()) continue;
    std::optional<Descriptor> found;
    for (const std::string& word : tokenize(target ? r.target_prompt : r.source_prompt))
      if (auto c = color_from_name(word)) {
        found = c;
        break;
      }
    if (!found) return std::nullopt;
    out[r.id] = *found;
  }
  if (out.empty()) return std::nullopt;
  return out;
}

double cross_region_mass(const Tensor& weights, const TokenLabels& labels,
                         const CrossConditionMap& cross_map, int region) {
  double acc = 0.0;
  long rows = 0;
  for (int f = 0; f < labels.frames; ++f) {
    for (int x = 0; x < labels.tokens; ++x) {
      if (labels.labels[f][x] != region) continue;
      const double* w = weights.row(static_cast<std::size_t>(f) * labels.tokens + x);
      double mass = 0.0;
      for (int y = 0; y < cross_map.length; ++y)
        if (cross_map.column_region[y] == region) mass += w[y];
      acc += mass;
      ++rows;
    }
  }
  if (rows == 0) throw ValidationError("cross_region_mass: region has no tokens");
  return acc / rows;
}

double self_region_leakage(const Tensor& weights, const TokenLabels& labels, int region) {
  const std::size_t total = static_cast<std::size_t>(labels.frames) * labels.tokens;
  std::vector<int> flat(total);
  for (int f = 0; f < labels.frames; ++f)
    for (int x = 0; x < labels.tokens; ++x)
      flat[static_cast<std::size_t>(f) * labels.tokens + x] = labels.labels[f][x];
  double acc = 0.0;
  long rows = 0;
  for (std::size_t i = 0; i < total; ++i) {
    if (flat[i] != region) continue;
    const double* w = weights.row(i);
    double mass = 0.0;
    for (std::size_t j = 0; j < total; ++j)
      if (flat[j] != region) mass += w[j];
    acc += mass;
    ++rows;
  }
  if (rows == 0) throw ValidationError("self_region_leakage: region has no tokens");
  return acc / rows;
}

EditArtifacts run_edit(const EditConfig& config, const VideoLatent& video,
                       const LayoutSource& layout_source, const FlowField* flow) {
  config.validate();
  if (config.regions.empty()) throw ValidationError("regions: at least one region required");

  EditArtifacts art;
  ToyDenoiser denoiser = load_denoiser(config);
  const SchedulerParams params =
      make_schedule(config.train_steps, config.beta_start, config.beta_end, config.sample_steps);
  EditText text = build_edit_text(config);
  art.source_text = text.source;
  art.target_text = text.target;

  // Inversion with feature recording (clustering input and diagnostics).
  InvertOptions inv_opts;
  inv_opts.feature_nodes = {config.record.feature_node};
  art.trajectory = ddim_invert(video, denoiser, text.source, params, inv_opts);

  // Layout: direct, manifest, or clustered.
  LayoutSet base;
  if (layout_source.direct) {
    base = *layout_source.direct;
  } else if (layout_source.from_clusters) {
    FeatureStack features =
        collect_features(art.trajectory, config.record.feature_block, config.record.feature_node);
    art.clusters = match_clusters(
        cluster_frames(features, config.cluster.k, config.seed));
    art.used_clusters = true;
    std::map<int, RegionSpec> bindings;
    for (const RegionConfig& r : config.regions) {
      if (r.cluster < 0)
        throw ValidationError("regions: region " + std::to_string(r.id) +
                              " needs a cluster binding for a clustered layout");
      RegionSpec spec;
      spec.id = r.id;
      bindings[r.cluster] = spec;
    }
    base = layout_from_clusters(art.clusters, bindings, video.height, video.width);
  } else {
    if (layout_source.manifest_path.empty())
      throw ValidationError("layout: no layout source given");
    base = read_layout_manifest(layout_source.manifest_path);
  }
  if (base.frames != video.frames || base.height != video.height || base.width != video.width)
    throw ValidationError("layout: resolution does not match the video");

  art.layout = resolve_overlaps(apply_config_regions(base, config));
  art.layout.validate();
  art.labels = region_labels(art.layout);
  art.areas = compute_region_areas(art.layout);
  art.cross_map =
      build_cross_condition(art.layout, text.target.region_spans, text.target.length());

  // Denoise hooks.
  ModulationContext mod;
  mod.cross_map = &art.cross_map;
  mod.labels = &art.labels;
  mod.areas = &art.areas;
  mod.cross_schedule = config.cross_schedule_obj();
  mod.self_schedule = config.self_schedule_obj();
  mod.scope = config.scope;
  mod.cross_enabled = config.modulate_cross;
  mod.self_enabled = config.modulate_self;

  DenoiseHooks hooks;
  if (config.modulate_steps > 0 && (config.modulate_cross || config.modulate_self)) {
    hooks.modulation = &mod;
    hooks.modulate_steps = config.modulate_steps;
  }
  if (config.replay_mode) hooks.replay = &art.trajectory;

  BlendMask blend_mask;
  if (config.blend.enabled) {
    std::vector<BoolGrid> per_frame;
    for (int f = 0; f < art.layout.frames; ++f)
      per_frame.push_back(dilate_mask(merge_foreground(art.layout, f), config.blend.dilate));
    blend_mask = aggregate_masks(per_frame, !config.blend.per_frame);
    hooks.blend = make_blend_hook(art.trajectory, blend_mask, config.blend.step_begin,
                                  config.blend.step_end);
  }

  std::map<int, std::unique_ptr<AttentionCapture>> captures;
  for (int step : config.record.attention_steps) {
    auto cap = std::make_unique<AttentionCapture>();
    cap->want_cross = true;
    cap->want_self = config.record.self_maps;
    hooks.capture[step] = cap.get();
    captures[step] = std::move(cap);
  }

  art.edited = ddim_denoise(art.trajectory.nodes.back().latent, denoiser, text.target, params, hooks);

  for (auto& [step, cap] : captures) {
    if (!cap->cross.empty()) art.attention.cross[step] = std::move(cap->cross);
    if (!cap->self_attn.empty()) art.attention.self_attn[step] = std::move(cap->self_attn);
  }

  // Metrics.
  MetricReport& report = art.report;
  ProxyEmbedder embedder{denoiser.weights().w_in};
  report.clip_f_proxy = frame_consistency(art.edited, embedder);
  auto targets = region_descriptors(config, true);
  auto sources = region_descriptors(config, false);
  if (targets && sources) {
    report.has_alignment = true;
    report.region_alignment = prompt_alignment_per_region(art.edited, art.layout, *targets);
    report.clip_t_proxy = prompt_alignment(art.edited, art.layout, *targets);
    report.region_accuracy = edit_accuracy_per_region(art.edited, art.layout, *sources, *targets);
    double acc = 0.0;
    for (const auto& [id, v] : report.region_accuracy) acc += v;
    report.edit_accuracy = report.region_accuracy.empty() ? 0.0 : acc / report.region_accuracy.size();
  }
  if (flow) {
    report.has_warp = true;
    report.warp_err = warp_error(art.edited, *flow);
    if (report.has_alignment) report.q_edit = q_edit(report.clip_t_proxy, report.warp_err);
  }
  // Attention mass at the last recorded modulated step, final block.
  int mass_step = -1;
  for (const auto& [step, maps] : art.attention.cross)
    if (step < config.modulate_steps || config.modulate_steps == 0) mass_step = std::max(mass_step, step);
  if (mass_step < 0 && !art.attention.cross.empty())
    mass_step = art.attention.cross.rbegin()->first;
  if (mass_step >= 0) {
    const std::vector<Tensor>& maps = art.attention.cross.at(mass_step);
    const Tensor& weights = maps.back();
    for (const RegionSpec& r : art.layout.regions)
      report.region_attention_mass[r.id] =
          cross_region_mass(weights, art.labels, art.cross_map, r.id);
  }
  return art;
}

void write_artifacts(const std::string& dir, const EditConfig& config,
                     const EditArtifacts& artifacts) {
  const fs::path base(dir);
  fs::create_directories(base);
  atomic_write((base / "config.json").string(), config.to_json_text());
  write_video((base / "edited.f32").string(), artifacts.edited);
  for (int f = 0; f < artifacts.edited.frames; ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03d.ppm", f);
    write_frame_ppm((base / name).string(), artifacts.edited, f);
  }
  write_layout_manifest((base / "layout").string(), artifacts.layout);
  write_report((base / "report.csv").string(), artifacts.report);
  for (const auto& [step, maps] : artifacts.attention.cross)
    for (std::size_t b = 0; b < maps.size(); ++b) {
      char name[64];
      std::snprintf(name, sizeof(name), "attn_step%02d_block%d_cross.f32", step,
                    static_cast<int>(b));
      write_raw_tensor((base / name).string(), maps[b]);
    }
  for (const auto& [step, maps] : artifacts.attention.self_attn)
    for (std::size_t b = 0; b < maps.size(); ++b) {
      char name[64];
      std::snprintf(name, sizeof(name), "attn_step%02d_block%d_self.f32", step,
                    static_cast<int>(b));
      write_raw_tensor((base / name).string(), maps[b]);
    }
  if (artifacts.used_clusters) {
    for (std::size_t f = 0; f < artifacts.clusters.labels.size(); ++f) {
      std::vector<std::uint8_t> bytes;
      for (int label : artifacts.clusters.labels[f])
        bytes.push_back(static_cast<std::uint8_t>(std::min(255, label * 40)));
      char name[32];
      std::snprintf(name, sizeof(name), "clusters_f%03d.pgm", static_cast<int>(f));
      write_gray_pgm((base / name).string(), bytes, artifacts.layout.height,
                     artifacts.layout.width);
    }
  }
}

}  // namespace regionedit
