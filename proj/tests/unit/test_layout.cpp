#include <doctest.h>

#include <map>

#include "helpers.hpp"
#include "regionedit/layout.hpp"

using namespace regionedit;
using testing::grid_from;
using testing::layout_1f;
using testing::rect_mask;
using testing::spec;

TEST_SUITE_BEGIN("layout");

TEST_CASE("resample: uniform fill is preserved") {
  BoolGrid src(4, 4);
  for (auto& c : src.cells) c = 1;
  BoolGrid dst = resample_mask(src, 2, 2);
  CHECK(dst.count() == 4);
}

TEST_CASE("resample: minority cell collapses to false") {
  BoolGrid src = grid_from(2, 2, {1, 0, 0, 0});
  CHECK(resample_mask(src, 1, 1).at(0, 0) == 0);
}

TEST_CASE("resample: exact tie resolves to true") {
  BoolGrid src = grid_from(2, 2, {1, 1, 0, 0});
  CHECK(resample_mask(src, 1, 1).at(0, 0) == 1);
}

TEST_CASE("resample: all 2x2 patterns follow the majority rule") {
  for (int bits = 0; bits < 16; ++bits) {
    BoolGrid src = grid_from(2, 2, {bits & 1, (bits >> 1) & 1, (bits >> 2) & 1, (bits >> 3) & 1});
    const int trues = __builtin_popcount(static_cast<unsigned>(bits));
    const int expect = 2 * trues >= 4 ? 1 : 0;  // at least half, tie -> true
    CHECK(resample_mask(src, 1, 1).at(0, 0) == expect);
  }
}

TEST_CASE("resample: identity when resolution unchanged") {
  Rng rng(17);
  BoolGrid src(5, 7);
  for (auto& c : src.cells) c = rng.uniform() < 0.4 ? 1 : 0;
  BoolGrid dst = resample_mask(src, 5, 7);
  CHECK(dst.cells == src.cells);
}

TEST_CASE("resample: non-integer ratios keep a solid block's area fraction sane") {
  // 6x6 left half true -> 4x4: columns 0..1 fully covered, column 2 split.
  BoolGrid src = rect_mask(6, 6, 0, 6, 0, 3);
  BoolGrid dst = resample_mask(src, 4, 4);
  for (int y = 0; y < 4; ++y) {
    CHECK(dst.at(y, 0) == 1);
    CHECK(dst.at(y, 1) == 1);  // covers src cols 1.5..3.0, all true -> true
    CHECK(dst.at(y, 2) == 0);  // covers src cols 3.0..4.5, all false
    CHECK(dst.at(y, 3) == 0);
  }
}

TEST_CASE("resample: empty grid is an error") {
  BoolGrid empty;
  CHECK_THROWS_WITH_AS(resample_mask(empty, 2, 2), "empty mask", ValidationError);
  BoolGrid ok(2, 2);
  CHECK_THROWS_AS(resample_mask(ok, 0, 2), ValidationError);
}

TEST_CASE("resolve_overlaps: disjoint layout unchanged") {
  LayoutSet layout = layout_1f(4, 4, {{spec(1, {"red"}), rect_mask(4, 4, 0, 4, 0, 2)},
                                      {spec(2, {"blue"}), rect_mask(4, 4, 0, 4, 2, 4)}});
  LayoutSet resolved = resolve_overlaps(layout);
  CHECK(resolved.mask(0, 1).cells == layout.mask(0, 1).cells);
  CHECK(resolved.mask(0, 2).cells == layout.mask(0, 2).cells);
}

TEST_CASE("resolve_overlaps: part wins over the instance it covers") {
  LayoutSet layout =
      layout_1f(4, 4, {{spec(1, {"man"}, RegionLevel::kInstance, 1), rect_mask(4, 4, 0, 4, 0, 4)},
                       {spec(2, {"hat"}, RegionLevel::kPart, 2), rect_mask(4, 4, 0, 1, 0, 4)}});
  LayoutSet resolved = resolve_overlaps(layout);
  CHECK(resolved.mask(0, 2).count() == 4);
  CHECK(resolved.mask(0, 1).count() == 12);
  for (int x = 0; x < 4; ++x) CHECK(resolved.mask(0, 1).at(0, x) == 0);
}

TEST_CASE("resolve_overlaps: equal priority goes to the higher id, union preserved") {
  // Areas 8 and 8 overlapping on 3 pixels.
  LayoutSet layout = layout_1f(4, 4, {{spec(1, {"a"}), rect_mask(4, 4, 0, 2, 0, 4)},
                                      {spec(2, {"b"}), grid_from(4, 4,
                                                                 {0, 1, 1, 1,  //
                                                                  0, 0, 0, 0,  //
                                                                  1, 1, 1, 1,  //
                                                                  1, 0, 0, 0})}});
  const long union_area = 8 + 8 - 3;
  LayoutSet resolved = resolve_overlaps(layout);
  CHECK(resolved.mask(0, 2).count() == 8);           // id 2 keeps everything
  CHECK(resolved.mask(0, 1).count() == 8 - 3);       // id 1 loses the overlap
  CHECK(resolved.mask(0, 1).count() + resolved.mask(0, 2).count() == union_area);
}

TEST_CASE("resolve_overlaps: per-frame areas sum to the grid size with background") {
  Rng rng(5);
  LayoutSet layout = layout_1f(8, 8, {{spec(1, {"a"}, RegionLevel::kInstance, 1), BoolGrid(8, 8)},
                                      {spec(2, {"b"}, RegionLevel::kInstance, 2), BoolGrid(8, 8)},
                                      {spec(3, {"c"}, RegionLevel::kPart, 3), BoolGrid(8, 8)}});
  for (int r = 1; r <= 3; ++r) {
    BoolGrid g(8, 8);
    for (auto& c : g.cells) c = rng.uniform() < 0.35 ? 1 : 0;
    layout.set_mask(0, r, g);
  }
  LayoutSet resolved = resolve_overlaps(layout);
  long covered = 0;
  for (int r = 1; r <= 3; ++r) covered += resolved.mask(0, r).count();
  TokenLabels labels = region_labels(resolved);
  long background = 0;
  for (int i = 0; i < labels.tokens; ++i)
    if (labels.label(0, i) == 0) ++background;
  CHECK(covered + background == 64);
}

TEST_CASE("merge_foreground: disjoint areas add") {
  LayoutSet layout = layout_1f(8, 8, {{spec(1, {"a"}), rect_mask(8, 8, 0, 2, 0, 5)},
                                      {spec(2, {"b"}), rect_mask(8, 8, 4, 8, 3, 8)}});
  CHECK(merge_foreground(layout, 0).count() == 10 + 20);
}

TEST_CASE("merge_foreground: full-frame mask covers everything") {
  LayoutSet layout = layout_1f(4, 4, {{spec(1, {"a"}), rect_mask(4, 4, 0, 4, 0, 4)}});
  CHECK(merge_foreground(layout, 0).count() == 16);
}

TEST_CASE("merge_foreground: overlap counts once") {
  // 10 and 20 with 5 shared -> 25.
  LayoutSet layout = layout_1f(8, 8, {{spec(1, {"a"}), rect_mask(8, 8, 0, 2, 0, 5)},
                                      {spec(2, {"b"}), grid_from(8, 8,
                                                                 {1, 1, 1, 1, 1, 0, 0, 0,  //
                                                                  0, 0, 0, 0, 0, 0, 0, 0,  //
                                                                  1, 1, 1, 1, 1, 1, 1, 1,  //
                                                                  1, 1, 1, 1, 1, 1, 1, 0,  //
                                                                  0, 0, 0, 0, 0, 0, 0, 0,  //
                                                                  0, 0, 0, 0, 0, 0, 0, 0,  //
                                                                  0, 0, 0, 0, 0, 0, 0, 0,  //
                                                                  0, 0, 0, 0, 0, 0, 0, 0})}});
  CHECK(layout.mask(0, 2).count() == 20);
  CHECK(merge_foreground(layout, 0).count() == 25);
}

TEST_CASE("merge_foreground: preserve regions are excluded") {
  LayoutSet layout =
      layout_1f(4, 4, {{spec(1, {"a"}), rect_mask(4, 4, 0, 2, 0, 4)},
                       {spec(2, {"b"}, RegionLevel::kInstance, 1, true), rect_mask(4, 4, 2, 4, 0, 4)}});
  CHECK(merge_foreground(layout, 0).count() == 8);
}

TEST_CASE("cross condition: full coverage and full span give an all-ones map") {
  LayoutSet layout = layout_1f(2, 2, {{spec(1, {"x"}), rect_mask(2, 2, 0, 2, 0, 2)}});
  std::map<int, TokenSpan> spans{{1, {0, 3}}};
  CrossConditionMap map = build_cross_condition(layout, spans, 3);
  REQUIRE(map.frames.size() == 1);
  for (double v : map.frames[0].data) CHECK(v == 1.0);
  for (int y = 0; y < 3; ++y) CHECK(map.column_region[y] == 1);
}

TEST_CASE("cross condition: empty masks give an all-zero map") {
  LayoutSet layout = layout_1f(2, 2, {{spec(1, {"x"}), BoolGrid(2, 2)}});
  std::map<int, TokenSpan> spans{{1, {0, 2}}};
  CrossConditionMap map = build_cross_condition(layout, spans, 4);
  for (double v : map.frames[0].data) CHECK(v == 0.0);
}

TEST_CASE("cross condition: column sums count mask area per span token") {
  // 64 queries split 40 / 24 between two regions, spans of 4 tokens each.
  BoolGrid g1(8, 8), g2(8, 8);
  for (int i = 0; i < 40; ++i) g1.cells[i] = 1;
  for (int i = 40; i < 64; ++i) g2.cells[i] = 1;
  LayoutSet layout = layout_1f(8, 8, {{spec(1, {"a"}), g1}, {spec(2, {"b"}), g2}});
  std::map<int, TokenSpan> spans{{1, {1, 5}}, {2, {5, 9}}};
  CrossConditionMap map = build_cross_condition(layout, spans, 10);
  double sum1 = 0.0, sum2 = 0.0;
  for (int x = 0; x < 64; ++x)
    for (int y = 0; y < 10; ++y) {
      if (y >= 1 && y < 5) sum1 += map.frames[0].at(x, y);
      if (y >= 5 && y < 9) sum2 += map.frames[0].at(x, y);
    }
  CHECK(sum1 == 40.0 * 4);
  CHECK(sum2 == 24.0 * 4);
  CHECK(map.column_region[0] == -1);  // outside every span
  CHECK(map.column_region[9] == -1);
}

TEST_CASE("cross condition: entries are binary and match label x span membership") {
  BoolGrid g1 = rect_mask(4, 4, 0, 2, 0, 4);
  LayoutSet layout = layout_1f(4, 4, {{spec(1, {"a"}), g1}});
  std::map<int, TokenSpan> spans{{1, {2, 4}}};
  CrossConditionMap map = build_cross_condition(layout, spans, 6);
  TokenLabels labels = region_labels(layout);
  for (int x = 0; x < 16; ++x)
    for (int y = 0; y < 6; ++y) {
      const double v = map.frames[0].at(x, y);
      CHECK((v == 0.0 || v == 1.0));
      const bool expect = labels.label(0, x) == 1 && y >= 2 && y < 4;
      CHECK(v == (expect ? 1.0 : 0.0));
    }
}

TEST_CASE("cross condition: overlapping spans are rejected") {
  LayoutSet layout = layout_1f(2, 2, {{spec(1, {"a"}), rect_mask(2, 2, 0, 1, 0, 2)},
                                      {spec(2, {"b"}), rect_mask(2, 2, 1, 2, 0, 2)}});
  std::map<int, TokenSpan> spans{{1, {0, 2}}, {2, {1, 3}}};
  CHECK_THROWS_WITH_AS(build_cross_condition(layout, spans, 4), "ambiguous token ownership",
                       ValidationError);
}

TEST_CASE("region labels: background frame is all zero") {
  LayoutSet layout = layout_1f(3, 3, {{spec(1, {"a"}), BoolGrid(3, 3)}});
  TokenLabels labels = region_labels(layout);
  for (int i = 0; i < 9; ++i) CHECK(labels.label(0, i) == 0);
}

TEST_CASE("region labels: left/right split labels both halves") {
  LayoutSet layout = layout_1f(2, 4, {{spec(1, {"a"}), rect_mask(2, 4, 0, 2, 0, 2)},
                                      {spec(2, {"b"}), rect_mask(2, 4, 0, 2, 2, 4)}});
  TokenLabels labels = region_labels(layout);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x)
      CHECK(labels.label(0, y * 4 + x) == (x < 2 ? 1 : 2));
}

TEST_CASE("region labels: a moving region matches itself across frames") {
  LayoutSet layout;
  layout.frames = 2;
  layout.height = 4;
  layout.width = 4;
  layout.regions = {spec(1, {"a"})};
  layout.set_mask(0, 1, rect_mask(4, 4, 1, 3, 0, 2));
  layout.set_mask(1, 1, rect_mask(4, 4, 1, 3, 2, 4));  // moved 2 px right
  TokenLabels labels = region_labels(layout);
  // (frame 0, x=1,y=1) and (frame 1, x=3,y=1) both belong to region 1.
  CHECK(labels.label(0, 1 * 4 + 1) == 1);
  CHECK(labels.label(1, 1 * 4 + 3) == 1);
  CHECK(labels.label(0, 1 * 4 + 1) == labels.label(1, 1 * 4 + 3));
}

TEST_CASE("region labels induce an equivalence over all frame tokens") {
  Rng rng(11);
  LayoutSet layout;
  layout.frames = 2;
  layout.height = 4;
  layout.width = 4;
  layout.regions = {spec(1, {"a"}, RegionLevel::kInstance, 1),
                    spec(2, {"b"}, RegionLevel::kInstance, 2)};
  for (int f = 0; f < 2; ++f)
    for (int r = 1; r <= 2; ++r) {
      BoolGrid g(4, 4);
      for (auto& c : g.cells) c = rng.uniform() < 0.4 ? 1 : 0;
      layout.set_mask(f, r, g);
    }
  TokenLabels labels = region_labels(resolve_overlaps(layout));
  const int nt = 2 * 16;
  auto label_of = [&](int i) { return labels.label(i / 16, i % 16); };
  for (int x = 0; x < nt; ++x)
    for (int y = 0; y < nt; ++y) {
      const bool xy = label_of(x) == label_of(y);
      CHECK(xy == (label_of(y) == label_of(x)));  // symmetry
      for (int z = 0; z < nt; ++z)
        if (xy && label_of(y) == label_of(z)) CHECK(label_of(x) == label_of(z));  // transitivity
    }
}

TEST_CASE("area fraction endpoints and arithmetic") {
  LayoutSet layout = layout_1f(16, 16, {{spec(1, {"a"}), rect_mask(16, 16, 0, 16, 0, 16)},
                                        {spec(2, {"b"}), BoolGrid(16, 16)},
                                        {spec(3, {"c"}), rect_mask(16, 16, 0, 4, 0, 16)}});
  CHECK(region_area_fraction(layout, 0, 1) == 1.0);
  CHECK(region_area_fraction(layout, 0, 2) == 0.0);
  CHECK(region_area_fraction(layout, 0, 3) == 0.25);  // 64 of 256
}

TEST_CASE("background area fraction complements the regions") {
  LayoutSet layout = layout_1f(4, 4, {{spec(1, {"a"}), rect_mask(4, 4, 0, 1, 0, 4)}});
  CHECK(region_area_fraction(layout, 0, 0) == doctest::Approx(12.0 / 16.0));
}

TEST_CASE("validate: duplicate region ids are rejected") {
  LayoutSet layout = layout_1f(2, 2, {{spec(1, {"a"}), rect_mask(2, 2, 0, 1, 0, 2)}});
  layout.regions.push_back(spec(1, {"b"}));
  layout.set_mask(0, 1, rect_mask(2, 2, 1, 2, 0, 2));
  CHECK_THROWS_AS(layout.validate(), ValidationError);
}

TEST_CASE("validate: part region must outrank what it overlaps") {
  LayoutSet layout =
      layout_1f(4, 4, {{spec(1, {"man"}, RegionLevel::kInstance, 2), rect_mask(4, 4, 0, 4, 0, 4)},
                       {spec(2, {"hat"}, RegionLevel::kPart, 1), rect_mask(4, 4, 0, 1, 0, 4)}});
  CHECK_THROWS_AS(layout.validate(), ValidationError);
  LayoutSet fixed =
      layout_1f(4, 4, {{spec(1, {"man"}, RegionLevel::kInstance, 1), rect_mask(4, 4, 0, 4, 0, 4)},
                       {spec(2, {"hat"}, RegionLevel::kPart, 2), rect_mask(4, 4, 0, 1, 0, 4)}});
  CHECK_NOTHROW(fixed.validate());
}

TEST_SUITE_END();
