#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "elda/uda.hpp"
#include "support/oracles.hpp"
#include "support/training.hpp"

namespace elda::uda {
namespace {

Tensor random_distribution(std::mt19937_64& rng, std::size_t C, std::size_t H, std::size_t W) {
  NoGradGuard guard;
  return softmax_channels(testing::random_tensor({1, C, H, W}, rng, -3.0, 3.0));
}

TEST(PseudoLabels, ThresholdExtremes) {
  std::mt19937_64 rng(81);
  const auto d = random_distribution(rng, 4, 6, 6);
  const auto all = pseudo_labels(d, 0.0);
  EXPECT_EQ(all.coverage, 1.0);
  EXPECT_EQ(all.labels.labels, model::argmax_classes(d));
  const auto none = pseudo_labels(d, 1.0);
  EXPECT_EQ(none.coverage, 0.0);
  for (auto v : none.labels.labels) EXPECT_EQ(v, kIgnoreIndex);
  EXPECT_THROW(pseudo_labels(d, 1.5), std::invalid_argument);
  EXPECT_THROW(pseudo_labels(d, -0.1), std::invalid_argument);
}

TEST(PseudoLabels, MatchesPerPixelLoop) {
  std::mt19937_64 rng(82);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = random_distribution(rng, 4, 5, 7);
    const auto got = pseudo_labels(d, 0.5);
    for (std::size_t i = 0; i < 35; ++i) {
      std::int32_t best = 0;
      double conf = d.at(i);
      for (std::int32_t c = 1; c < 4; ++c)
        if (d.at(c * 35 + i) > conf) {
          conf = d.at(c * 35 + i);
          best = c;
        }
      EXPECT_EQ(got.labels.labels[i], conf < 0.5 ? kIgnoreIndex : best);
      EXPECT_EQ(got.confidence[i], conf);
    }
  }
}

TEST(PseudoLabels, CoverageNonIncreasingInThreshold) {
  std::mt19937_64 rng(83);
  const auto d = random_distribution(rng, 5, 8, 8);
  double prev = 1.0;
  for (double t = 0.0; t <= 1.0; t += 0.05) {
    const double c = pseudo_labels(d, t).coverage;
    EXPECT_LE(c, prev);
    prev = c;
  }
}

LabelMap random_labels(std::mt19937_64& rng, std::size_t h, std::size_t w, std::int32_t C, double ignore_p = 0.0) {
  std::uniform_int_distribution<std::int32_t> cls(0, C - 1);
  std::bernoulli_distribution ign(ignore_p);
  LabelMap m(h, w);
  for (auto& v : m.labels) v = ign(rng) ? kIgnoreIndex : cls(rng);
  return m;
}

TEST(ClassMix, SingleClassSourceIsCopiedWhole) {
  std::mt19937_64 data_rng(84);
  const auto xs = testing::random_tensor({3, 4, 4}, data_rng), xt = testing::random_tensor({3, 4, 4}, data_rng);
  const LabelMap ys(4, 4, 2);
  Rng rng(1);
  const auto m = class_mix(xs, ys, xt, random_labels(data_rng, 4, 4, 3), rng);
  for (auto v : m.mask) EXPECT_EQ(v, 1);
  EXPECT_EQ(m.label, ys);
  for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_EQ(m.image.at(i), xs.at(i));
  EXPECT_EQ(m.selected, (std::vector<std::int32_t>{2}));
}

TEST(ClassMix, PixelEquationsAndSelectionCount) {
  std::mt19937_64 data_rng(85);
  Rng rng(2);
  for (int draw = 0; draw < 500; ++draw) {
    const std::size_t H = 6, W = 5, P = 30;
    const auto xs = testing::random_tensor({3, H, W}, data_rng), xt = testing::random_tensor({3, H, W}, data_rng);
    const auto ys = random_labels(data_rng, H, W, 1 + draw % 5);
    const auto yt = random_labels(data_rng, H, W, 5, 0.3);
    const auto m = class_mix(xs, ys, xt, yt, rng);

    const std::set<std::int32_t> present(ys.labels.begin(), ys.labels.end());
    const std::size_t K = present.size();
    ASSERT_EQ(m.selected.size(), std::max<std::size_t>(1, K / 2));
    const std::set<std::int32_t> sel(m.selected.begin(), m.selected.end());
    for (auto c : sel) ASSERT_TRUE(present.count(c));
    for (std::size_t i = 0; i < P; ++i) {
      const bool from_source = sel.count(ys.labels[i]) > 0;
      ASSERT_EQ(m.mask[i], from_source ? 1 : 0);
      ASSERT_EQ(m.label.labels[i], from_source ? ys.labels[i] : yt.labels[i]);
      for (std::size_t c = 0; c < 3; ++c)
        ASSERT_EQ(m.image.at(c * P + i), from_source ? xs.at(c * P + i) : xt.at(c * P + i));
    }
  }
  EXPECT_THROW(class_mix(Tensor::zeros({3, 2, 2}), LabelMap(2, 2), Tensor::zeros({3, 2, 3}), LabelMap(2, 3), rng),
               ShapeError);
}

TEST(UniformIndex, InRangeAndRoughlyUniform) {
  Rng rng(3);
  std::vector<int> hist(5, 0);
  for (int i = 0; i < 50000; ++i) ++hist[uniform_index(rng, 5)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
}

TEST(Sgd, MomentumUpdate) {
  model::ModelParams params;
  params.emplace("w", Tensor::from({2}, {1.0, -1.0}, true));
  Sgd opt({0.1, 0.5});
  params.at("w").mutable_grad()[0] = 2.0;
  params.at("w").mutable_grad()[1] = -4.0;
  opt.step(params);  // v = g
  EXPECT_DOUBLE_EQ(params.at("w").at(0), 1.0 - 0.1 * 2.0);
  EXPECT_DOUBLE_EQ(params.at("w").at(1), -1.0 + 0.1 * 4.0);
  opt.step(params);  // v = 0.5 g + g
  EXPECT_DOUBLE_EQ(params.at("w").at(0), 0.8 - 0.1 * 3.0);
}

TEST(Sgd, ClipsGlobalNormAcrossTensors) {
  model::ModelParams params;
  params.emplace("a", Tensor::from({1}, {0.0}, true));
  params.emplace("b", Tensor::from({1}, {0.0}, true));
  params.at("a").mutable_grad()[0] = 30.0;
  params.at("b").mutable_grad()[0] = 40.0;  // norm 50
  Sgd clipped({1.0, 0.0, 5.0});
  clipped.step(params);
  EXPECT_DOUBLE_EQ(params.at("a").at(0), -3.0);
  EXPECT_DOUBLE_EQ(params.at("b").at(0), -4.0);

  Sgd unclipped({1.0, 0.0, 0.0});
  unclipped.step(params);
  EXPECT_DOUBLE_EQ(params.at("a").at(0), -33.0);
}

class StepFixture : public ::testing::Test {
 protected:
  model::ModelConfig config = testing::small_config();

  StepInputs inputs(std::uint64_t seed, bool with_pseudo = false) const {
    data::SceneSpec spec;
    spec.size = 16;
    auto src = data::generate_scene(spec, seed);
    spec.domain = data::Domain::Target;
    auto tgt = data::generate_scene(spec, seed + 1000);
    StepInputs in{src.image, src.label, tgt.image, std::nullopt};
    if (with_pseudo) {
      PseudoLabelBatch p;
      p.labels = LabelMap(16, 16, 1);
      p.confidence.assign(256, 1.0);
      p.coverage = 1.0;
      in.pseudo = p;
    }
    return in;
  }

  std::vector<losses::LossReport> run(std::size_t steps, std::uint64_t seed) const {
    model::Model m(config, seed);
    Sgd opt;
    Rng rng(seed);
    edge::EdgeCache cache;
    std::vector<losses::LossReport> out;
    for (std::size_t s = 0; s < steps; ++s) out.push_back(train_step(m, opt, inputs(s), {}, rng, cache));
    return out;
  }
};

TEST_F(StepFixture, IdenticalSeedsGiveIdenticalReports) {
  const auto a = run(5, 1), b = run(5, 1);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].l_total, b[i].l_total);
    EXPECT_EQ(a[i].l_seg_init, b[i].l_seg_init);
    EXPECT_EQ(a[i].l_edge_final, b[i].l_edge_final);
  }
  EXPECT_NE(run(2, 2)[1].l_total, a[1].l_total);
}

TEST_F(StepFixture, LossStaysFiniteOverTwoHundredSteps) {
  for (const auto& r : run(200, 3)) {
    ASSERT_TRUE(std::isfinite(r.l_total));
    EXPECT_GE(r.l_edge_init, 0.0);
    EXPECT_LE(r.l_edge_init, 2.0);
    EXPECT_LE(r.l_edge_final, 2.0);
    EXPECT_NEAR(r.l_total, r.l_seg_init + r.l_seg_final + r.lambda * (r.l_edge_init + r.l_edge_final), 1e-12);
  }
}

TEST_F(StepFixture, ReportMatchesGraphAndAblationsDropEdgeTerms) {
  model::Model m(config, 4);
  Rng rng(4);
  edge::EdgeCache cache;
  const auto step = compute_step_loss(m, inputs(0), {}, rng, cache);
  EXPECT_EQ(step.report.l_total, step.total.item());
  EXPECT_GT(step.report.l_edge_init, 0.0);
  EXPECT_EQ(cache.size(), 2u);

  auto c = config;
  c.enable_cm = false;
  c.enable_edge_aux = false;
  model::Model base(c, 4);
  edge::EdgeCache unused;
  const auto s2 = compute_step_loss(base, inputs(0), {}, rng, unused);
  EXPECT_EQ(s2.report.l_edge_init, 0.0);
  EXPECT_EQ(s2.report.l_edge_final, 0.0);
  EXPECT_EQ(unused.size(), 0u);
}

// Pseudo-labels are constants: supplying the very same labels from outside
// the step reproduces its gradient exactly.
TEST_F(StepFixture, PseudoLabelsAreDetached) {
  model::Model m(config, 5);
  testing::randomize_biases_and_cm(m.params(), 6);
  edge::EdgeCache cache;
  auto in = inputs(7);
  Rng r1(8);
  auto internal = compute_step_loss(m, in, {0.3}, r1, cache);
  m.zero_grads();
  internal.total.backward();
  const auto g_internal = testing::flat_gradient(m);

  in.pseudo = internal.pseudo;
  Rng r2(8);
  auto external = compute_step_loss(m, in, {0.3}, r2, cache);
  m.zero_grads();
  external.total.backward();
  EXPECT_EQ(g_internal, testing::flat_gradient(m));
  EXPECT_FALSE(internal.pseudo.labels.labels.empty());
}

TEST_F(StepFixture, TargetTermsVanishWithFullThresholdAndZeroLambda) {
  config.lambda = 0.0;
  model::Model m(config, 9);
  testing::randomize_biases_and_cm(m.params(), 10);
  edge::EdgeCache cache;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto in = inputs(seed);
    Rng rng(seed);
    auto step = compute_step_loss(m, in, {1.0}, rng, cache);
    ASSERT_EQ(step.pseudo.coverage, 0.0);
    m.zero_grads();
    step.total.backward();
    const auto g = testing::flat_gradient(m);
    const auto ref = testing::source_only_gradient(m, in, step.mixed.mask);
    ASSERT_EQ(g.size(), ref.size());
    double diff = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) diff += (g[i] - ref[i]) * (g[i] - ref[i]);
    EXPECT_LT(std::sqrt(diff), 1e-10);
  }
}

TEST_F(StepFixture, TrainStepMovesWeightsAndClearsOldGradients) {
  model::Model m(config, 14);
  Sgd opt;
  Rng rng(15);
  edge::EdgeCache cache;
  const auto before = m.params().at("sdi.enc0.kernel").at(0);
  train_step(m, opt, inputs(1, true), {}, rng, cache);
  const auto g1 = testing::flat_gradient(m);
  train_step(m, opt, inputs(1, true), {}, rng, cache);
  EXPECT_NE(m.params().at("sdi.enc0.kernel").at(0), before);
  // gradients reflect only the latest step
  auto in = inputs(1, true);
  Rng rng2(15);
  model::Model fresh(config, 14);
  Sgd opt2;
  train_step(fresh, opt2, in, {}, rng2, cache);
  EXPECT_EQ(testing::flat_gradient(fresh), g1);
}

}  // namespace
}  // namespace elda::uda
