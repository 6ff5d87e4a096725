#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "pixground/error.hpp"
#include "pixground/grid.hpp"
#include "pixground/serial.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace pixground;
using pixground::testing::random_int;
using pixground::testing::random_mask;

namespace {

PatchLayout random_layout(std::mt19937_64& rng, int w, int h) {
  PatchLayout l;
  l.rows = random_int(rng, 1, 3);
  l.cols = random_int(rng, 1, 3);
  l.tokens_per_side = random_int(rng, 1, 8);
  l.has_thumbnail = l.rows * l.cols > 1;
  l.image_width = w;
  l.image_height = h;
  return l;
}

TokenMask mask_with_selection(int grid, const std::vector<int>& on) {
  TokenMask tok;
  tok.layout.tokens_per_side = grid;
  tok.layout.image_width = grid;
  tok.layout.image_height = grid;
  tok.coverage.assign(std::size_t(grid) * grid, 0.0);
  tok.selected.assign(std::size_t(grid) * grid, 0);
  for (int i : on) {
    tok.coverage[std::size_t(i)] = 1.0;
    tok.selected[std::size_t(i)] = 1;
  }
  return tok;
}

}  // namespace

TEST(PlanPatches, SingleTileHasNoThumbnail) {
  const PatchLayout l = plan_patches(448, 448);
  EXPECT_EQ(l.rows, 1);
  EXPECT_EQ(l.cols, 1);
  EXPECT_FALSE(l.has_thumbnail);
  EXPECT_EQ(l.token_count(), 256);
}

TEST(PlanPatches, FourTilesPlusThumbnail) {
  const PatchLayout l = plan_patches(896, 896);
  EXPECT_EQ(l.rows * l.cols, 4);
  EXPECT_TRUE(l.has_thumbnail);
  EXPECT_EQ(l.token_count(), 1280);
  EXPECT_EQ(l.tile_token_count(), 1024);
}

TEST(PlanPatches, WideImage) {
  const PatchLayout l = plan_patches(896, 448);
  EXPECT_EQ(l.rows, 1);
  EXPECT_EQ(l.cols, 2);
  EXPECT_EQ(l.token_count(), 768);
}

TEST(PlanPatches, LargeImagesRespectTileBudget) {
  for (int w : {448, 1000, 3000, 10000}) {
    for (int h : {300, 2000, 9000}) {
      const PatchLayout l = plan_patches(w, h);
      EXPECT_LE(l.rows * l.cols, kDefaultMaxTiles);
      EXPECT_EQ(l.has_thumbnail, l.rows * l.cols > 1);
    }
  }
}

TEST(PlanPatches, RejectsBadArguments) {
  EXPECT_THROW(plan_patches(0, 10), Error);
  EXPECT_THROW(plan_patches(10, 10, 0), Error);
  EXPECT_THROW(plan_patches(10, 10, 448, 0), Error);
}

TEST(CellSpan, PartitionsTheExtent) {
  for (int extent : {1, 7, 64, 100}) {
    for (int cells : {1, 3, 16, 128}) {
      int expected_begin = 0;
      for (int k = 0; k < cells; ++k) {
        const CellSpan s = cell_span(k, extent, cells);
        EXPECT_EQ(s.begin, expected_begin);
        EXPECT_GE(s.end, s.begin);
        expected_begin = s.end;
      }
      EXPECT_EQ(expected_begin, extent);
    }
  }
}

TEST(Downsample, FullCellSelectedHalfCellNot) {
  PatchLayout l{1, 1, 2, false, 4, 4};
  BinaryMask m(4, 4);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) m.set(x, y);  // full top-left cell
  }
  m.set(2, 0);
  m.set(3, 0);  // half of the top-right cell
  const TokenMask tok = downsample_mask(m, l);
  EXPECT_EQ(tok.coverage, (std::vector<double>{1.0, 0.5, 0.0, 0.0}));
  EXPECT_EQ(tok.selected, (std::vector<std::uint8_t>{1, 0, 0, 0}));
  m.set(2, 1);
  EXPECT_EQ(downsample_mask(m, l).selected[1], 1);
}

TEST(Downsample, MatchesPerCellCountOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = random_int(rng, 1, 70), h = random_int(rng, 1, 70);
    const BinaryMask m = random_mask(rng, w, h, 0.5);
    const PatchLayout l = random_layout(rng, w, h);
    const auto [fg, total] = oracle::cell_counts(m, l);
    const TokenMask tok = downsample_mask(m, l);
    ASSERT_EQ(tok.coverage.size(), fg.size());
    for (std::size_t j = 0; j < fg.size(); ++j) {
      const double cov = total[j] == 0 ? 0.0 : double(fg[j]) / double(total[j]);
      ASSERT_EQ(tok.coverage[j], cov);
      ASSERT_EQ(tok.selected[j] != 0, 2 * fg[j] > total[j]);
    }
  }
}

TEST(Downsample, ParallelMatchesSerialReference) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    const int w = random_int(rng, 1, 120), h = random_int(rng, 1, 120);
    const BinaryMask m = random_mask(rng, w, h, 0.6);
    const PatchLayout l = random_layout(rng, w, h);
    const TokenMask a = downsample_mask(m, l), b = serial::downsample_mask(m, l);
    EXPECT_EQ(a.coverage, b.coverage);
    EXPECT_EQ(a.selected, b.selected);
  }
}

TEST(Downsample, ShapeMismatchIsAnError) {
  EXPECT_THROW(downsample_mask(BinaryMask(4, 4), PatchLayout{1, 1, 2, false, 5, 4}), Error);
}

TEST(SpatialSample, IdentityAtOrBelowCap) {
  const TokenMask tok = mask_with_selection(8, {1, 5, 9, 63});
  EXPECT_EQ(spatial_uniform_sample(tok, 4).indices, (std::vector<int>{1, 5, 9, 63}));
  EXPECT_EQ(spatial_uniform_sample(tok, 128), selected_tokens(tok));
}

TEST(SpatialSample, CapOneOnFullGridPicksCentre) {
  std::vector<int> all(16);
  for (int i = 0; i < 16; ++i) all[std::size_t(i)] = i;
  const auto sel = spatial_uniform_sample(mask_with_selection(4, all), 1);
  ASSERT_EQ(sel.size(), 1U);
  // Centre (2, 2) in cell units; nearest token centre with lowest index is (1, 1).
  EXPECT_EQ(sel.indices[0], 5);
}

TEST(SpatialSample, CapSubsetAndDeterminismProperties) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 60; ++trial) {
    const int w = random_int(rng, 16, 200), h = random_int(rng, 16, 200);
    const BinaryMask m = random_mask(rng, w, h, 0.3 + 0.1 * (trial % 7));
    const PatchLayout l = plan_patches(w, h, 64, 12, 16);
    const TokenMask tok = downsample_mask(m, l);
    const int cap = trial % 3 == 0 ? 128 : random_int(rng, 1, 300);
    const TokenSelection first = spatial_uniform_sample(tok, cap);
    EXPECT_LE(first.size(), std::size_t(cap));
    EXPECT_TRUE(std::is_sorted(first.indices.begin(), first.indices.end()));
    EXPECT_EQ(std::adjacent_find(first.indices.begin(), first.indices.end()), first.indices.end());
    for (int i : first.indices) EXPECT_EQ(tok.selected[std::size_t(i)], 1);
    if (tok.selected_count() <= std::size_t(cap)) EXPECT_EQ(first, selected_tokens(tok));
    if (tok.selected_count() > 0) EXPECT_FALSE(first.empty());
    for (int rerun = 0; rerun < 10; ++rerun) ASSERT_EQ(spatial_uniform_sample(tok, cap), first);
  }
}

TEST(SpatialSample, RejectsNonPositiveCap) {
  EXPECT_THROW(spatial_uniform_sample(mask_with_selection(2, {0}), 0), Error);
}

TEST(ExtractFeatures, GathersRowsInSelectionOrder) {
  FeatureMatrix f(4, 2);
  for (int i = 0; i < 8; ++i) f.data[std::size_t(i)] = i;
  const FeatureSequence out = extract_features(f, TokenSelection{{1, 3}});
  EXPECT_EQ(out.rows, 2);
  EXPECT_EQ(out.data, (std::vector<double>{2, 3, 6, 7}));
  EXPECT_THROW(extract_features(f, TokenSelection{{4}}), Error);
}

TEST(TokenSelectionJson, RoundTrip) {
  const TokenSelection sel{{0, 7, 42}};
  const nlohmann::json j = sel;
  EXPECT_EQ(j.get<TokenSelection>(), sel);
}
