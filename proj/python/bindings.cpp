// Python surface over the core: scene synthesis, prompt embedding, DDIM
// inversion, and the full layout-guided edit. Arrays cross the boundary as
// copies; all heavy state stays on the C++ side for the duration of a call.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "regionedit/config.hpp"
#include "regionedit/diffusion.hpp"
#include "regionedit/io.hpp"
#include "regionedit/modulation.hpp"
#include "regionedit/pipeline.hpp"
#include "regionedit/prompt.hpp"
#include "regionedit/synth.hpp"

namespace py = pybind11;
using namespace regionedit;

namespace {

py::array_t<double> tensor_to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
  py::array_t<double> out(shape);
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

py::array_t<double> video_to_array(const VideoLatent& v) { return tensor_to_array(v.data); }

VideoLatent array_to_video(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 4) throw std::invalid_argument("video: expected a (frames, H, W, C) array");
  VideoLatent v(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                static_cast<int>(a.shape(2)), static_cast<int>(a.shape(3)));
  std::copy(a.data(), a.data() + a.size(), v.data.data.begin());
  return v;
}

FlowField array_to_flow(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 4 || a.shape(3) != 2)
    throw std::invalid_argument("flow: expected a (pairs, H, W, 2) array");
  FlowField f;
  f.height = static_cast<int>(a.shape(1));
  f.width = static_cast<int>(a.shape(2));
  for (py::ssize_t p = 0; p < a.shape(0); ++p) {
    Tensor pair = Tensor::zeros({static_cast<std::size_t>(f.height),
                                 static_cast<std::size_t>(f.width), 2});
    std::copy(a.data() + p * pair.numel(), a.data() + (p + 1) * pair.numel(), pair.data.begin());
    f.pairs.push_back(std::move(pair));
  }
  return f;
}

ToyDenoiser denoiser_for(const std::string& checkpoint, std::uint64_t seed) {
  if (!checkpoint.empty()) return ToyDenoiser(load_weights(checkpoint));
  return ToyDenoiser(DenoiserWeights::seeded(DenoiserConfig{}, seed));
}

AttentionBranch branch_from(const std::string& name) {
  if (name == "cross") return AttentionBranch::kCross;
  if (name == "self") return AttentionBranch::kSelf;
  throw std::invalid_argument("branch must be 'cross' or 'self'");
}

py::dict synth_scene(int frames, int size, const std::vector<std::string>& colors,
                     std::uint64_t seed) {
  SceneRender render = synth_video(default_scene(frames, size, colors), seed);
  py::dict out;
  out["frames"] = video_to_array(render.frames);

  py::array_t<double> flow({static_cast<py::ssize_t>(render.flow.pairs.size()),
                            static_cast<py::ssize_t>(size), static_cast<py::ssize_t>(size),
                            static_cast<py::ssize_t>(2)});
  double* fp = flow.mutable_data();
  for (const Tensor& pair : render.flow.pairs)
    fp = std::copy(pair.data.begin(), pair.data.end(), fp);
  out["flow"] = flow;

  py::list masks;
  for (const auto& per_frame : render.shape_masks) {
    py::array_t<bool> m({static_cast<py::ssize_t>(per_frame.size()),
                         static_cast<py::ssize_t>(size), static_cast<py::ssize_t>(size)});
    bool* mp = m.mutable_data();
    for (const BoolGrid& g : per_frame)
      for (std::uint8_t c : g.cells) *mp++ = c != 0;
    masks.append(m);
  }
  out["masks"] = masks;

  py::list names;
  for (const ShapeSpec& s : render.scene.shapes) names.append(s.color_name);
  out["colors"] = names;
  return out;
}

py::array_t<double> invert_video(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& video,
    const std::string& prompt, int steps, std::uint64_t seed, const std::string& checkpoint) {
  VideoLatent v = array_to_video(video);
  ToyDenoiser denoiser = denoiser_for(checkpoint, seed);
  SchedulerParams params = make_schedule(1000, 1e-4, 0.02, steps);
  Trajectory traj = ddim_invert(v, denoiser, embed_prompt(tokenize(prompt)), params);
  return video_to_array(traj.nodes.back().latent);
}

py::dict edit_video(const py::array_t<double, py::array::c_style | py::array::forcecast>& video,
                    const std::string& config_json, const std::string& layout_dir,
                    bool from_clusters, const py::object& flow) {
  VideoLatent v = array_to_video(video);
  EditConfig config = EditConfig::from_json_text(config_json);

  LayoutSource source;
  source.manifest_path = layout_dir;
  source.from_clusters = from_clusters;

  std::optional<FlowField> flow_field;
  if (!flow.is_none())
    flow_field = array_to_flow(
        flow.cast<py::array_t<double, py::array::c_style | py::array::forcecast>>());

  EditArtifacts art =
      run_edit(config, v, source, flow_field ? &*flow_field : nullptr);

  py::dict out;
  out["edited"] = video_to_array(art.edited);
  py::list report;
  for (const MetricRow& row : art.report.rows()) {
    py::dict r;
    r["metric"] = row.metric;
    r["value"] = row.value;
    r["scope"] = row.scope;
    report.append(r);
  }
  out["report"] = report;
  out["used_clusters"] = art.used_clusters;
  return out;
}

py::dict palette_dict() {
  py::dict out;
  for (const auto& [name, rgb] : color_palette())
    out[py::str(name)] = py::make_tuple(rgb[0], rgb[1], rgb[2]);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Layout-guided region editing on a toy video diffusion stack";

  m.def("palette", &palette_dict, "Name -> RGB table shared by prompts and metrics");

  m.def("synth_scene", &synth_scene, py::arg("frames") = 4, py::arg("size") = 16,
        py::arg("colors") = std::vector<std::string>{}, py::arg("seed") = 7,
        "Render the stock two-shape scene; returns frames, flow, masks, colors");

  m.def(
      "embed_prompt",
      [](const std::vector<std::string>& tokens) {
        return tensor_to_array(embed_prompt(tokens).matrix);
      },
      py::arg("tokens"), "Deterministic token embedding; start/end markers are added");

  m.def(
      "modulation_strength",
      [](double t, double area_fraction, const std::string& branch, double coefficient,
         double exponent) {
        return modulation_strength(t, area_fraction, Schedule{branch_from(branch), coefficient,
                                                              exponent});
      },
      py::arg("t"), py::arg("area_fraction"), py::arg("branch") = "cross",
      py::arg("coefficient") = 1.0, py::arg("exponent") = 5.0,
      "lambda = coefficient * t^exponent * (1 - area_fraction)");

  m.def("invert", &invert_video, py::arg("video"), py::arg("prompt") = "a scene with",
        py::arg("steps") = 50, py::arg("seed") = 7, py::arg("checkpoint") = "",
        "DDIM-invert a video; returns the noise latent");

  m.def("edit", &edit_video, py::arg("video"), py::arg("config"), py::arg("layout_dir") = "",
        py::arg("from_clusters") = false, py::arg("flow") = py::none(),
        "Run the full layout-guided edit; returns the edited video and the metric report");
}
