#pragma once

#include "regionedit/layout.hpp"
#include "regionedit/tensor.hpp"

namespace regionedit {

enum class AttentionBranch { kCross, kSelf };
enum class ModulationScope { kRow, kGlobal };

ModulationScope scope_from_string(const std::string& s);
std::string to_string(ModulationScope scope);

// Time-dependent modulation intensity: coefficient * t^exponent with t in
// [0,1], t = 1 at the noisiest step. Defaults: cross 1.0 * t^5, self 0.3 * t^5.
struct Schedule {
  AttentionBranch branch = AttentionBranch::kCross;
  double coefficient = 1.0;
  double exponent = 5.0;

  static Schedule cross_default() { return {AttentionBranch::kCross, 1.0, 5.0}; }
  static Schedule self_default() { return {AttentionBranch::kSelf, 0.3, 5.0}; }

  double intensity(double t) const;
};

// Per-entry distances to the row (or global) extremes; pos pulls a score up
// to the max, neg pushes it down to the min. pos + neg == max - min holds
// entrywise under either scope.
struct ModulationPair {
  Tensor pos;
  Tensor neg;
};

struct AttentionOutput {
  Tensor weights;  // row-stochastic, queries x keys
  Tensor context;  // queries x d_v
};

// Condition entries: 1 pull toward max, 0 push toward min, kExempt untouched.
inline constexpr double kExemptEntry = -1.0;

ModulationPair pos_neg_values(const Tensor& scores, ModulationScope scope = ModulationScope::kRow);

// coefficient * t^exponent * (1 - area_fraction); validates t and S ranges.
double modulation_strength(double t, double area_fraction, const Schedule& schedule);

// s' = s + lambda * (pos if condition else -neg), clamped to the score range
// the pair was built from; exempt entries pass through untouched.
Tensor modulate_scores(const Tensor& scores, const Tensor& condition, const Tensor& lambda_per_entry,
                       ModulationScope scope = ModulationScope::kRow);

// Plain softmax(Q K^T / sqrt(d)) V; the unmodulated reference path.
AttentionOutput scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, int d);

// Text cross attention over all frames: q stacks every frame's queries, k/v
// are the L text tokens. Modulation strength per entry uses the *key* token's
// region area; columns outside every span stay unmodulated. The modulation
// term is added to the raw scores before the sqrt(d) scaling.
AttentionOutput layout_cross_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                       const CrossConditionMap& cross_map, const RegionAreas& areas,
                                       double t, const Schedule& schedule, int d,
                                       ModulationScope scope = ModulationScope::kRow);

// Self attention with keys concatenated across frames: condition is label
// equality, strength uses the *query* token's region area.
AttentionOutput layout_self_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                      const TokenLabels& labels, const RegionAreas& areas, double t,
                                      const Schedule& schedule, int d,
                                      ModulationScope scope = ModulationScope::kRow);

// Condition / strength matrices as used by the two attention paths above;
// exposed so tests and recorders can build them independently.
Tensor cross_condition_frame(const CrossConditionMap& cross_map, int frame);
Tensor cross_strength_frame(const CrossConditionMap& cross_map, const RegionAreas& areas, int frame,
                            double t, const Schedule& schedule);
Tensor self_condition(const TokenLabels& labels);
Tensor self_strength(const TokenLabels& labels, const RegionAreas& areas, double t,
                     const Schedule& schedule);

}  // namespace regionedit
