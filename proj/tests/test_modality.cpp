#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "pixground/error.hpp"
#include "pixground/modality.hpp"
#include "pixground/serial.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace pixground;
using pixground::testing::random_int;

namespace {

FeatureMatrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  FeatureMatrix m(rows, cols);
  for (auto& v : m.data) v = n(rng);
  return m;
}

}  // namespace

TEST(Relevance, MatchesNaiveOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = random_int(rng, 1, 256), l = random_int(rng, 1, 16), d = random_int(rng, 1, 64);
    const FeatureMatrix v = random_matrix(rng, n, d), q = random_matrix(rng, l, d);
    const RelevanceField f = relevance_scores(v, q, Modality::optical);
    const auto expected = oracle::naive_beta(v, q);
    for (int j = 0; j < n; ++j) {
      ASSERT_NEAR(f.beta[std::size_t(j)], expected[std::size_t(j)], 1e-9 * std::abs(expected[std::size_t(j)]) + 1e-300);
    }
    EXPECT_NEAR(std::accumulate(f.beta.begin(), f.beta.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(Relevance, ParallelMatchesSerialReference) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureMatrix v = random_matrix(rng, 200, 32), q = random_matrix(rng, 8, 32);
    const auto a = relevance_scores(v, q, Modality::sar).beta;
    const auto b = serial::relevance_scores(v, q, Modality::sar).beta;
    for (std::size_t j = 0; j < a.size(); ++j) ASSERT_NEAR(a[j], b[j], 1e-12);
  }
}

TEST(Relevance, ConstantLogitsGiveUniformScores) {
  FeatureMatrix v(10, 4), q(3, 4);
  std::fill(v.data.begin(), v.data.end(), 1.0);
  std::fill(q.data.begin(), q.data.end(), 0.5);
  for (double b : relevance_scores(v, q, Modality::optical).beta) EXPECT_NEAR(b, 0.1, 1e-15);
}

TEST(Relevance, LargeLogitsStayFinite) {
  std::mt19937_64 rng(23);
  const FeatureMatrix v = random_matrix(rng, 50, 8, 100.0), q = random_matrix(rng, 4, 8, 100.0);
  const auto beta = relevance_scores(v, q, Modality::optical).beta;
  for (double b : beta) EXPECT_TRUE(std::isfinite(b));
  EXPECT_NEAR(std::accumulate(beta.begin(), beta.end(), 0.0), 1.0, 1e-9);
}

TEST(Relevance, PermutingVisualTokensPermutesScores) {
  std::mt19937_64 rng(24);
  const FeatureMatrix v = random_matrix(rng, 30, 6), q = random_matrix(rng, 5, 6);
  std::vector<int> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  FeatureMatrix pv(30, 6);
  for (int j = 0; j < 30; ++j) {
    std::copy(v.row(perm[std::size_t(j)]).begin(), v.row(perm[std::size_t(j)]).end(), pv.row(j).begin());
  }
  const auto a = relevance_scores(v, q, Modality::optical).beta;
  const auto b = relevance_scores(pv, q, Modality::optical).beta;
  for (int j = 0; j < 30; ++j) EXPECT_NEAR(b[std::size_t(j)], a[std::size_t(perm[std::size_t(j)])], 1e-12);
}

TEST(Relevance, ShiftAlongQueryDirectionIsInvariant) {
  // With one query, a common offset on every visual token shifts all logits equally.
  std::mt19937_64 rng(25);
  FeatureMatrix v = random_matrix(rng, 20, 5);
  const FeatureMatrix q = random_matrix(rng, 1, 5);
  const auto a = relevance_scores(v, q, Modality::optical).beta;
  for (int j = 0; j < 20; ++j) {
    for (int k = 0; k < 5; ++k) v.data[std::size_t(j) * 5 + k] += 0.7 * (k + 1);
  }
  const auto b = relevance_scores(v, q, Modality::optical).beta;
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
}

TEST(Relevance, ShapeErrors) {
  EXPECT_THROW(relevance_scores(FeatureMatrix(3, 4), FeatureMatrix(2, 5), Modality::sar), Error);
  EXPECT_THROW(relevance_scores(FeatureMatrix(0, 4), FeatureMatrix(2, 4), Modality::sar), Error);
}

TEST(SelectModality, HigherScoreWinsAndTiesGoToSar) {
  const RelevanceField opt{Modality::optical, {0.5, 0.2, 0.3}};
  const RelevanceField sar{Modality::sar, {0.2, 0.5, 0.3}};
  const auto a = select_modality(opt, sar, TokenSelection{{0, 1, 2}});
  EXPECT_EQ(a.choice, (std::vector<Modality>{Modality::optical, Modality::sar, Modality::sar}));
}

TEST(SelectModality, AllTiesSelectSarEverywhere) {
  std::mt19937_64 rng(26);
  const FeatureMatrix v = random_matrix(rng, 64, 8), q = random_matrix(rng, 3, 8);
  const auto opt = relevance_scores(v, q, Modality::optical);
  const auto sar = relevance_scores(v, q, Modality::sar);
  TokenSelection sel;
  for (int j = 0; j < 64; ++j) sel.indices.push_back(j);
  for (Modality m : select_modality(opt, sar, sel).choice) EXPECT_EQ(m, Modality::sar);
}

TEST(SelectModality, OutOfRangeToken) {
  const RelevanceField f{Modality::optical, {1.0}};
  EXPECT_THROW(select_modality(f, f, TokenSelection{{1}}), Error);
}

TEST(FuseFeatures, TakesRowsFromTheChosenModality) {
  FeatureMatrix opt(3, 2), sar(3, 2);
  opt.data = {1, 1, 2, 2, 3, 3};
  sar.data = {-1, -1, -2, -2, -3, -3};
  const TokenSelection sel{{0, 2}};
  const ModalityAssignment assign{sel, {Modality::sar, Modality::optical}};
  EXPECT_EQ(fuse_features(assign, opt, sar, sel).data, (std::vector<double>{-1, -1, 3, 3}));
  EXPECT_THROW(fuse_features(assign, opt, FeatureMatrix(2, 2), sel), Error);
  EXPECT_THROW(fuse_features(assign, opt, sar, TokenSelection{{0, 1}}), Error);
}

TEST(ModalityNames, ParseAndPrint) {
  EXPECT_EQ(parse_modality("optical"), Modality::optical);
  EXPECT_EQ(parse_modality("sar"), Modality::sar);
  EXPECT_EQ(modality_name(Modality::sar), "sar");
  EXPECT_THROW(parse_modality("lidar"), Error);
}
