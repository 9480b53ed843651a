#include "regionedit/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace regionedit {

namespace fs = std::filesystem;
using nlohmann::json;

void atomic_write(const std::string& path, const std::string& bytes) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_mask_pgm(const std::string& path, const BoolGrid& mask) {
  std::string bytes = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) +
                      "\n255\n";
  bytes.reserve(bytes.size() + mask.cells.size());
  for (std::uint8_t c : mask.cells) bytes.push_back(static_cast<char>(c ? 255 : 0));
  atomic_write(path, bytes);
}

namespace {

// Minimal netpbm header reader: magic, dims, maxval, single whitespace, data.
struct PnmHeader {
  int width = 0, height = 0, maxval = 0;
  std::size_t data_offset = 0;
};

PnmHeader parse_pnm_header(const std::string& bytes, const char* magic, const std::string& path) {
  std::size_t pos = 0;
  auto skip_space = [&]() {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() {
    skip_space();
    int v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      ++pos;
      any = true;
    }
    if (!any) throw std::runtime_error(path + ": malformed netpbm header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != magic[0] || bytes[1] != magic[1])
    throw std::runtime_error(path + ": not a " + std::string(magic) + " file");
  pos = 2;
  PnmHeader h;
  h.width = read_int();
  h.height = read_int();
  h.maxval = read_int();
  if (pos >= bytes.size()) throw std::runtime_error(path + ": truncated header");
  ++pos;  // single whitespace before the raster
  h.data_offset = pos;
  return h;
}

}  // namespace

BoolGrid read_mask_pgm(const std::string& path) {
  const std::string bytes = read_file(path);
  const PnmHeader h = parse_pnm_header(bytes, "P5", path);
  BoolGrid mask(h.height, h.width);
  if (bytes.size() < h.data_offset + mask.cells.size())
    throw std::runtime_error(path + ": truncated raster");
  for (std::size_t i = 0; i < mask.cells.size(); ++i)
    mask.cells[i] = static_cast<unsigned char>(bytes[h.data_offset + i]) >= 128 ? 1 : 0;
  return mask;
}

void write_gray_pgm(const std::string& path, const std::vector<std::uint8_t>& bytes, int height,
                    int width) {
  if (static_cast<int>(bytes.size()) != height * width)
    throw std::invalid_argument("write_gray_pgm: size mismatch");
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (std::uint8_t c : bytes) out.push_back(static_cast<char>(c));
  atomic_write(path, out);
}

void write_frame_ppm(const std::string& path, const VideoLatent& video, int frame) {
  std::string out = "P6\n" + std::to_string(video.width) + " " + std::to_string(video.height) +
                    "\n255\n";
  for (int y = 0; y < video.height; ++y) {
    for (int x = 0; x < video.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = c < video.channels ? video.at(frame, y, x, c) : 0.0;
        v = std::min(1.0, std::max(0.0, v));
        out.push_back(static_cast<char>(std::lround(v * 255.0)));
      }
    }
  }
  atomic_write(path, out);
}

void write_raw_tensor(const std::string& path, const Tensor& tensor) {
  std::string bytes;
  bytes.resize(tensor.numel() * sizeof(float));
  for (std::size_t i = 0; i < tensor.numel(); ++i) {
    const float f = static_cast<float>(tensor.data[i]);
    std::memcpy(bytes.data() + i * sizeof(float), &f, sizeof(float));
  }
  atomic_write(path, bytes);
  json side;
  side["dtype"] = "float32";
  side["order"] = "row-major";
  side["shape"] = tensor.shape;
  atomic_write(path + ".json", side.dump(2) + "\n");
}

Tensor read_raw_tensor(const std::string& path) {
  const json side = json::parse(read_file(path + ".json"));
  if (side.value("dtype", "") != "float32" || side.value("order", "") != "row-major")
    throw std::runtime_error(path + ": unsupported tensor encoding");
  Tensor t(side.at("shape").get<std::vector<std::size_t>>());
  const std::string bytes = read_file(path);
  if (bytes.size() != t.numel() * sizeof(float))
    throw std::runtime_error(path + ": size does not match sidecar shape");
  for (std::size_t i = 0; i < t.numel(); ++i) {
    float f;
    std::memcpy(&f, bytes.data() + i * sizeof(float), sizeof(float));
    t.data[i] = f;
  }
  return t;
}

void write_video(const std::string& path, const VideoLatent& video) {
  write_raw_tensor(path, video.data);
}

VideoLatent read_video(const std::string& path) {
  Tensor t = read_raw_tensor(path);
  if (t.ndim() != 4) throw std::runtime_error(path + ": expected a 4-d video tensor");
  VideoLatent v(static_cast<int>(t.dim(0)), static_cast<int>(t.dim(1)),
                static_cast<int>(t.dim(2)), static_cast<int>(t.dim(3)));
  v.data = std::move(t);
  return v;
}

void write_flow(const std::string& path, const FlowField& flow) {
  Tensor packed = Tensor::zeros({flow.pairs.size(), static_cast<std::size_t>(flow.height),
                                 static_cast<std::size_t>(flow.width), 2});
  std::size_t off = 0;
  for (const Tensor& p : flow.pairs) {
    std::copy(p.data.begin(), p.data.end(), packed.data.begin() + off);
    off += p.numel();
  }
  write_raw_tensor(path, packed);
}

FlowField read_flow(const std::string& path) {
  Tensor packed = read_raw_tensor(path);
  if (packed.ndim() != 4 || packed.dim(3) != 2)
    throw std::runtime_error(path + ": expected a pairs x H x W x 2 flow tensor");
  FlowField flow;
  flow.height = static_cast<int>(packed.dim(1));
  flow.width = static_cast<int>(packed.dim(2));
  const std::size_t per = packed.numel() / packed.dim(0);
  for (std::size_t p = 0; p < packed.dim(0); ++p) {
    Tensor field = Tensor::zeros({packed.dim(1), packed.dim(2), 2});
    std::copy(packed.data.begin() + p * per, packed.data.begin() + (p + 1) * per,
              field.data.begin());
    flow.pairs.push_back(std::move(field));
  }
  return flow;
}

void save_weights(const std::string& path, const DenoiserWeights& weights) {
  std::string bytes;
  json manifest;
  manifest["seed"] = weights.seed;
  manifest["config"] = {{"d_model", weights.config.d_model}, {"heads", weights.config.heads},
                        {"blocks", weights.config.blocks},   {"d_text", weights.config.d_text},
                        {"hidden", weights.config.hidden},   {"channels", weights.config.channels}};
  json tensors = json::array();
  weights.for_each([&](const std::string& name, const Tensor& t) {
    tensors.push_back({{"name", name}, {"shape", t.shape}});
    const std::size_t off = bytes.size();
    bytes.resize(off + t.numel() * sizeof(double));
    std::memcpy(bytes.data() + off, t.data.data(), t.numel() * sizeof(double));
  });
  manifest["tensors"] = tensors;
  manifest["dtype"] = "float64";
  atomic_write(path, bytes);
  atomic_write(path + ".json", manifest.dump(2) + "\n");
}

DenoiserWeights load_weights(const std::string& path) {
  const json manifest = json::parse(read_file(path + ".json"));
  DenoiserConfig cfg;
  const json& jc = manifest.at("config");
  cfg.d_model = jc.at("d_model");
  cfg.heads = jc.at("heads");
  cfg.blocks = jc.at("blocks");
  cfg.d_text = jc.at("d_text");
  cfg.hidden = jc.at("hidden");
  cfg.channels = jc.at("channels");
  DenoiserWeights w = DenoiserWeights::seeded(cfg, manifest.value("seed", 0ull));
  const std::string bytes = read_file(path);
  std::size_t off = 0;
  w.for_each([&](const std::string& name, Tensor& t) {
    if (off + t.numel() * sizeof(double) > bytes.size())
      throw std::runtime_error(path + ": weight blob too short at " + name);
    std::memcpy(t.data.data(), bytes.data() + off, t.numel() * sizeof(double));
    off += t.numel() * sizeof(double);
  });
  if (off != bytes.size()) throw std::runtime_error(path + ": weight blob has trailing bytes");
  return w;
}

std::string mask_file_name(int frame, int region_id) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "mask_f%03d_r%d.pgm", frame, region_id);
  return buf;
}

void write_layout_manifest(const std::string& dir, const LayoutSet& layout) {
  json j;
  j["frames"] = layout.frames;
  j["height"] = layout.height;
  j["width"] = layout.width;
  j["global_prompt"] = layout.global_prompt_tokens;
  json regions = json::array();
  for (const RegionSpec& r : layout.regions) {
    regions.push_back({{"id", r.id},
                       {"level", to_string(r.level)},
                       {"priority", r.priority},
                       {"prompt", r.prompt_tokens},
                       {"preserve", r.preserve}});
    for (int f = 0; f < layout.frames; ++f)
      write_mask_pgm((fs::path(dir) / mask_file_name(f, r.id)).string(), layout.mask(f, r.id));
  }
  j["regions"] = regions;
  atomic_write((fs::path(dir) / "layout.json").string(), j.dump(2) + "\n");
}

LayoutSet read_layout_manifest(const std::string& dir) {
  const fs::path base(dir);
  const fs::path manifest = fs::is_directory(base) ? base / "layout.json" : base;
  json j;
  try {
    j = json::parse(read_file(manifest.string()));
  } catch (const json::exception& e) {
    throw ValidationError(manifest.string() + ": " + e.what());
  }
  LayoutSet layout;
  try {
    layout.frames = j.at("frames");
    layout.height = j.at("height");
    layout.width = j.at("width");
    if (j.contains("global_prompt"))
      layout.global_prompt_tokens = j.at("global_prompt").get<std::vector<std::string>>();
    for (const json& jr : j.at("regions")) {
      RegionSpec r;
      r.id = jr.at("id");
      r.level = region_level_from_string(jr.value("level", "instance"));
      r.priority = jr.value("priority", 0);
      r.preserve = jr.value("preserve", false);
      if (jr.contains("prompt")) r.prompt_tokens = jr.at("prompt").get<std::vector<std::string>>();
      const int id = r.id;
      layout.regions.push_back(std::move(r));
      for (int f = 0; f < layout.frames; ++f)
        layout.set_mask(f, id,
                        read_mask_pgm((manifest.parent_path() / mask_file_name(f, id)).string()));
    }
  } catch (const json::exception& e) {
    throw ValidationError(manifest.string() + ": " + e.what());
  }
  return layout;
}

void write_report(const std::string& csv_path, const MetricReport& report) {
  std::string csv = "metric,value,scope\n";
  json mirror = json::array();
  for (const MetricRow& row : report.rows()) {
    csv += row.metric + "," + format_double(row.value) + "," + row.scope + "\n";
    mirror.push_back({{"metric", row.metric}, {"value", row.value}, {"scope", row.scope}});
  }
  atomic_write(csv_path, csv);
  const std::string json_path =
      csv_path.size() > 4 && csv_path.substr(csv_path.size() - 4) == ".csv"
          ? csv_path.substr(0, csv_path.size() - 4) + ".json"
          : csv_path + ".json";
  atomic_write(json_path, mirror.dump(2) + "\n");
}

}  // namespace regionedit
