#include "regionedit/modulation.hpp"

#include <cmath>

namespace regionedit {

ModulationScope scope_from_string(const std::string& s) {
  if (s == "row") return ModulationScope::kRow;
  if (s == "global") return ModulationScope::kGlobal;
  throw ValidationError("unknown modulation scope '" + s + "'");
}

std::string to_string(ModulationScope scope) {
  return scope == ModulationScope::kRow ? "row" : "global";
}

double Schedule::intensity(double t) const { return coefficient * std::pow(t, exponent); }

ModulationPair pos_neg_values(const Tensor& scores, ModulationScope scope) {
  if (scores.ndim() != 2) throw std::invalid_argument("pos_neg_values: expected a matrix");
  const std::size_t rows = scores.rows(), cols = scores.cols();
  ModulationPair out{Tensor::zeros({rows, cols}), Tensor::zeros({rows, cols})};
  double gmin = scores.data[0], gmax = scores.data[0];
  if (scope == ModulationScope::kGlobal) {
    for (double v : scores.data) {
      gmin = std::min(gmin, v);
      gmax = std::max(gmax, v);
    }
  }
  for (std::size_t i = 0; i < rows; ++i) {
    const double* s = scores.row(i);
    double lo = gmin, hi = gmax;
    if (scope == ModulationScope::kRow) {
      lo = hi = s[0];
      for (std::size_t j = 1; j < cols; ++j) {
        lo = std::min(lo, s[j]);
        hi = std::max(hi, s[j]);
      }
    }
    double* p = out.pos.row(i);
    double* n = out.neg.row(i);
    for (std::size_t j = 0; j < cols; ++j) {
      p[j] = hi - s[j];
      n[j] = s[j] - lo;
    }
  }
  return out;
}

double modulation_strength(double t, double area_fraction, const Schedule& schedule) {
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("modulation_strength: t outside [0,1]");
  if (!(area_fraction >= 0.0 && area_fraction <= 1.0))
    throw ValidationError("modulation_strength: area fraction outside [0,1]");
  return schedule.intensity(t) * (1.0 - area_fraction);
}

Tensor modulate_scores(const Tensor& scores, const Tensor& condition, const Tensor& lambda_per_entry,
                       ModulationScope scope) {
  if (!scores.same_shape(condition) || !scores.same_shape(lambda_per_entry))
    throw std::invalid_argument("modulate_scores: shape mismatch");
  ModulationPair mod = pos_neg_values(scores, scope);
  const std::size_t rows = scores.rows(), cols = scores.cols();
  double gmin = scores.data[0], gmax = scores.data[0];
  if (scope == ModulationScope::kGlobal) {
    for (double v : scores.data) {
      gmin = std::min(gmin, v);
      gmax = std::max(gmax, v);
    }
  }
  Tensor out = scores;
  for (std::size_t i = 0; i < rows; ++i) {
    const double* s = scores.row(i);
    const double* c = condition.row(i);
    const double* lam = lambda_per_entry.row(i);
    const double* p = mod.pos.row(i);
    const double* n = mod.neg.row(i);
    double* o = out.row(i);
    double lo = gmin, hi = gmax;
    if (scope == ModulationScope::kRow) {
      lo = hi = s[0];
      for (std::size_t j = 1; j < cols; ++j) {
        lo = std::min(lo, s[j]);
        hi = std::max(hi, s[j]);
      }
    }
    for (std::size_t j = 0; j < cols; ++j) {
      if (c[j] == kExemptEntry) continue;
      if (!(lam[j] >= 0.0 && lam[j] <= 1.0)) throw ValidationError("modulation out of range");
      double v = c[j] != 0.0 ? s[j] + lam[j] * p[j] : s[j] - lam[j] * n[j];
      // Guard rounding at lambda ~ 1 so the range-preservation claim is exact.
      if (v < lo) v = lo;
      else if (v > hi) v = hi;
      o[j] = v;
    }
  }
  return out;
}

namespace {

AttentionOutput finish_attention(Tensor scores, const Tensor& v, int d) {
  scale_inplace(scores, 1.0 / std::sqrt(static_cast<double>(d)));
  softmax_rows(scores);
  AttentionOutput out;
  out.context = matmul(scores, v);
  out.weights = std::move(scores);
  return out;
}

}  // namespace

AttentionOutput scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, int d) {
  if (q.cols() != k.cols() || k.rows() != v.rows())
    throw std::invalid_argument("scaled_dot_attention: dimension mismatch");
  return finish_attention(matmul_nt(q, k), v, d);
}

Tensor cross_condition_frame(const CrossConditionMap& cross_map, int frame) {
  const Tensor& r = cross_map.frames.at(frame);
  Tensor cond = r;
  for (std::size_t x = 0; x < r.rows(); ++x)
    for (std::size_t y = 0; y < r.cols(); ++y)
      if (cross_map.column_region[y] < 0) cond.at(x, y) = kExemptEntry;
  return cond;
}

Tensor cross_strength_frame(const CrossConditionMap& cross_map, const RegionAreas& areas, int frame,
                            double t, const Schedule& schedule) {
  const Tensor& r = cross_map.frames.at(frame);
  Tensor lam = Tensor::zeros({r.rows(), r.cols()});
  for (std::size_t y = 0; y < r.cols(); ++y) {
    const int region = cross_map.column_region[y];
    if (region < 0) continue;
    const double value = modulation_strength(t, areas.at(frame, region), schedule);
    for (std::size_t x = 0; x < r.rows(); ++x) lam.at(x, y) = value;
  }
  return lam;
}

Tensor self_condition(const TokenLabels& labels) {
  const std::size_t total = static_cast<std::size_t>(labels.frames) * labels.tokens;
  Tensor cond = Tensor::zeros({total, total});
  std::vector<int> flat(total);
  for (int f = 0; f < labels.frames; ++f)
    for (int x = 0; x < labels.tokens; ++x)
      flat[static_cast<std::size_t>(f) * labels.tokens + x] = labels.labels[f][x];
  for (std::size_t i = 0; i < total; ++i) {
    double* row = cond.row(i);
    const int li = flat[i];
    for (std::size_t j = 0; j < total; ++j) row[j] = (flat[j] == li) ? 1.0 : 0.0;
  }
  return cond;
}

Tensor self_strength(const TokenLabels& labels, const RegionAreas& areas, double t,
                     const Schedule& schedule) {
  const std::size_t total = static_cast<std::size_t>(labels.frames) * labels.tokens;
  Tensor lam = Tensor::zeros({total, total});
  for (int f = 0; f < labels.frames; ++f) {
    for (int x = 0; x < labels.tokens; ++x) {
      const double value = modulation_strength(t, areas.at(f, labels.labels[f][x]), schedule);
      double* row = lam.row(static_cast<std::size_t>(f) * labels.tokens + x);
      for (std::size_t j = 0; j < total; ++j) row[j] = value;
    }
  }
  return lam;
}

AttentionOutput layout_cross_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                       const CrossConditionMap& cross_map, const RegionAreas& areas,
                                       double t, const Schedule& schedule, int d,
                                       ModulationScope scope) {
  const std::size_t n = cross_map.frames.size();
  if (n == 0) throw std::invalid_argument("layout_cross_attention: no frames in condition map");
  const std::size_t per_frame = cross_map.frames[0].rows();
  if (q.rows() != n * per_frame || q.cols() != k.cols() || k.rows() != v.rows() ||
      k.rows() != static_cast<std::size_t>(cross_map.length))
    throw std::invalid_argument("layout_cross_attention: dimension mismatch");
  Tensor scores = matmul_nt(q, k);
  AttentionOutput out;
  out.weights = Tensor::zeros({q.rows(), k.rows()});
  for (std::size_t f = 0; f < n; ++f) {
    Tensor frame_scores = Tensor::zeros({per_frame, k.rows()});
    std::copy(scores.row(f * per_frame), scores.row(f * per_frame) + per_frame * k.rows(),
              frame_scores.data.begin());
    Tensor cond = cross_condition_frame(cross_map, static_cast<int>(f));
    Tensor lam = cross_strength_frame(cross_map, areas, static_cast<int>(f), t, schedule);
    Tensor modulated = modulate_scores(frame_scores, cond, lam, scope);
    scale_inplace(modulated, 1.0 / std::sqrt(static_cast<double>(d)));
    softmax_rows(modulated);
    std::copy(modulated.data.begin(), modulated.data.end(), out.weights.row(f * per_frame));
  }
  out.context = matmul(out.weights, v);
  return out;
}

AttentionOutput layout_self_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                      const TokenLabels& labels, const RegionAreas& areas, double t,
                                      const Schedule& schedule, int d, ModulationScope scope) {
  const std::size_t total = static_cast<std::size_t>(labels.frames) * labels.tokens;
  if (q.rows() != total || k.rows() != total || v.rows() != total)
    throw std::invalid_argument("layout_self_attention: labels length mismatch");
  Tensor scores = matmul_nt(q, k);
  Tensor cond = self_condition(labels);
  Tensor lam = self_strength(labels, areas, t, schedule);
  return finish_attention(modulate_scores(scores, cond, lam, scope), v, d);
}

}  // namespace regionedit
