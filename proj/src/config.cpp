#include "regionedit/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "regionedit/prompt.hpp"

namespace regionedit {

using nlohmann::json;

void EditConfig::validate() const {
  if (sample_steps < 1) throw ValidationError("sample_steps: must be >= 1");
  if (modulate_steps < 0 || modulate_steps > sample_steps)
    throw ValidationError("modulate_steps: must be in [0, sample_steps]");
  if (!(cross_schedule.coefficient > 0.0 && cross_schedule.coefficient <= 1.0))
    throw ValidationError("cross_schedule.coefficient: must be in (0, 1]");
  if (!(self_schedule.coefficient > 0.0 && self_schedule.coefficient <= 1.0))
    throw ValidationError("self_schedule.coefficient: must be in (0, 1]");
  if (train_steps < 2) throw ValidationError("train_steps: must be >= 2");
  if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0))
    throw ValidationError("beta_start/beta_end: need 0 < beta_start < beta_end < 1");
  if (blend.step_begin < 0) throw ValidationError("blend.step_begin: must be >= 0");
  if (blend.dilate < 0) throw ValidationError("blend.dilate: must be >= 0");
  if (cluster.k < 1) throw ValidationError("cluster.k: must be >= 1");
  std::set<int> ids;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const std::string path = "regions[" + std::to_string(i) + "]";
    const RegionConfig& r = regions[i];
    if (r.id < 1) throw ValidationError(path + ".id: must be >= 1");
    if (!ids.insert(r.id).second) throw ValidationError(path + ".id: duplicate region id");
    if (tokenize(r.source_prompt).empty())
      throw ValidationError(path + ".source_prompt: must be non-empty");
    if (tokenize(r.target_prompt).empty())
      throw ValidationError(path + ".target_prompt: must be non-empty");
  }
  for (int s : record.attention_steps)
    if (s < 0 || s >= sample_steps)
      throw ValidationError("record.attention_steps: step outside [0, sample_steps)");
  if (record.feature_node < 1 || record.feature_node > sample_steps)
    throw ValidationError("record.feature_node: must be in [1, sample_steps]");
}

namespace {

json schedule_to_json(const ScheduleConfig& s) {
  return json{{"coefficient", s.coefficient}, {"exponent", s.exponent}};
}

ScheduleConfig schedule_from_json(const json& j, const ScheduleConfig& defaults) {
  ScheduleConfig s = defaults;
  s.coefficient = j.value("coefficient", s.coefficient);
  s.exponent = j.value("exponent", s.exponent);
  return s;
}

}  // namespace

std::string EditConfig::to_json_text() const {
  json j;
  j["global_prompt"] = global_prompt;
  j["regions"] = json::array();
  for (const RegionConfig& r : regions) {
    json jr{{"id", r.id},
            {"level", to_string(r.level)},
            {"priority", r.priority},
            {"source_prompt", r.source_prompt},
            {"target_prompt", r.target_prompt}};
    if (r.cluster >= 0) jr["cluster"] = r.cluster;
    j["regions"].push_back(jr);
  }
  j["sample_steps"] = sample_steps;
  j["modulate_steps"] = modulate_steps;
  j["cross_schedule"] = schedule_to_json(cross_schedule);
  j["self_schedule"] = schedule_to_json(self_schedule);
  j["modulation_scope"] = to_string(scope);
  j["modulate_cross"] = modulate_cross;
  j["modulate_self"] = modulate_self;
  j["blend"] = json{{"enabled", blend.enabled},
                    {"per_frame", blend.per_frame},
                    {"step_begin", blend.step_begin},
                    {"step_end", blend.step_end},
                    {"dilate", blend.dilate}};
  j["seed"] = seed;
  j["replay_mode"] = replay_mode;
  j["train_steps"] = train_steps;
  j["beta_start"] = beta_start;
  j["beta_end"] = beta_end;
  if (!checkpoint.empty()) j["checkpoint"] = checkpoint;
  j["record"] = json{{"attention_steps", record.attention_steps},
                     {"self_maps", record.self_maps},
                     {"feature_block", record.feature_block},
                     {"feature_node", record.feature_node}};
  j["cluster"] = json{{"k", cluster.k}};
  return j.dump(2) + "\n";
}

EditConfig EditConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: invalid JSON: ") + e.what());
  }
  EditConfig cfg;
  try {
    cfg.global_prompt = j.value("global_prompt", cfg.global_prompt);
    if (j.contains("regions")) {
      for (const json& jr : j.at("regions")) {
        RegionConfig r;
        r.id = jr.value("id", 0);
        r.level = region_level_from_string(jr.value("level", "instance"));
        r.priority = jr.value("priority", 0);
        r.source_prompt = jr.value("source_prompt", "");
        r.target_prompt = jr.value("target_prompt", "");
        r.cluster = jr.value("cluster", -1);
        cfg.regions.push_back(std::move(r));
      }
    }
    cfg.sample_steps = j.value("sample_steps", cfg.sample_steps);
    cfg.modulate_steps = j.value("modulate_steps", cfg.modulate_steps);
    if (j.contains("cross_schedule"))
      cfg.cross_schedule = schedule_from_json(j.at("cross_schedule"), cfg.cross_schedule);
    if (j.contains("self_schedule"))
      cfg.self_schedule = schedule_from_json(j.at("self_schedule"), cfg.self_schedule);
    cfg.scope = scope_from_string(j.value("modulation_scope", "row"));
    cfg.modulate_cross = j.value("modulate_cross", cfg.modulate_cross);
    cfg.modulate_self = j.value("modulate_self", cfg.modulate_self);
    if (j.contains("blend")) {
      const json& jb = j.at("blend");
      cfg.blend.enabled = jb.value("enabled", cfg.blend.enabled);
      cfg.blend.per_frame = jb.value("per_frame", cfg.blend.per_frame);
      cfg.blend.step_begin = jb.value("step_begin", cfg.blend.step_begin);
      cfg.blend.step_end = jb.value("step_end", cfg.blend.step_end);
      cfg.blend.dilate = jb.value("dilate", cfg.blend.dilate);
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.replay_mode = j.value("replay_mode", cfg.replay_mode);
    cfg.train_steps = j.value("train_steps", cfg.train_steps);
    cfg.beta_start = j.value("beta_start", cfg.beta_start);
    cfg.beta_end = j.value("beta_end", cfg.beta_end);
    cfg.checkpoint = j.value("checkpoint", cfg.checkpoint);
    if (j.contains("record")) {
      const json& jr = j.at("record");
      if (jr.contains("attention_steps"))
        cfg.record.attention_steps = jr.at("attention_steps").get<std::vector<int>>();
      cfg.record.self_maps = jr.value("self_maps", cfg.record.self_maps);
      cfg.record.feature_block = jr.value("feature_block", cfg.record.feature_block);
      cfg.record.feature_node = jr.value("feature_node", cfg.record.feature_node);
    }
    if (j.contains("cluster")) cfg.cluster.k = j.at("cluster").value("k", cfg.cluster.k);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return cfg;
}

EditConfig EditConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("config: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

void EditConfig::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << to_json_text();
}

}  // namespace regionedit
