#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "coherence/error.hpp"
#include "coherence/gradcheck.hpp"
#include "coherence/vlv.hpp"
#include "test_util.hpp"

namespace coherence::vlv {
namespace {

using testing::S;
using text::SentenceIds;
using text::TokenId;

// log N(x; mu, var) summed over coordinates.
double log_normal(const std::vector<double>& x, const GaussianParams& p) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - p.mu[k];
    s += -0.5 * std::log(2.0 * M_PI * p.var[k]) - 0.5 * d * d / p.var[k];
  }
  return s;
}

GaussianParams random_gaussian(std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mu(-1.5, 1.5), var(0.2, 3.0);
  GaussianParams p;
  for (std::size_t i = 0; i < k; ++i) {
    p.mu.push_back(mu(rng));
    p.var.push_back(var(rng));
  }
  return p;
}

TEST(GaussianKl, AnalyticCases) {
  const GaussianParams std2{{0, 0}, {1, 1}};
  EXPECT_NEAR(gaussian_kl(std2, std2), 0.0, 1e-12);
  EXPECT_NEAR(gaussian_kl({{1, 0}, {1, 1}}, std2), 0.5, 1e-9);
  EXPECT_NEAR(gaussian_kl({{0}, {0.25}}, {{0}, {1}}), 0.5 * (0.25 - 1.0 + std::log(4.0)), 1e-9);
  EXPECT_NEAR(gaussian_kl({{0}, {0.25}}, {{0}, {1}}), 0.31815, 1e-5);
}

TEST(GaussianKl, MatchesMonteCarlo) {
  std::mt19937_64 rng(17);
  for (int draw = 0; draw < 20; ++draw) {
    const auto q = random_gaussian(3, rng), p = random_gaussian(3, rng);
    constexpr int kSamples = 50000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < kSamples; ++i) {
      const auto z = sample_latent(q, rng);
      const double v = log_normal(z, q) - log_normal(z, p);
      sum += v;
      sq += v * v;
    }
    const double mean = sum / kSamples;
    const double se = std::sqrt((sq / kSamples - mean * mean) / kSamples);
    EXPECT_LE(std::abs(gaussian_kl(q, p) - mean), 3.0 * se) << "draw " << draw;
  }
}

TEST(GaussianKl, NonNegativeAndZeroOnlyWhenEqual) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto q = random_gaussian(4, rng), p = random_gaussian(4, rng);
    EXPECT_GT(gaussian_kl(q, p), 0.0);
    EXPECT_NEAR(gaussian_kl(q, q), 0.0, 1e-12);
  }
}

TEST(GaussianKl, DimensionMismatch) {
  EXPECT_THROW(gaussian_kl({{0}, {1}}, {{0, 0}, {1, 1}}), Error);
}

TEST(GaussianKl, GraphVersionAgrees) {
  std::mt19937_64 rng(8);
  const auto q = random_gaussian(3, rng), p = random_gaussian(3, rng);
  ParamStore ps;
  Graph g(ps);
  const Var kl = gaussian_kl(g, {g.constant_vector(q.mu), g.constant_vector(q.var)},
                             {g.constant_vector(p.mu), g.constant_vector(p.var)});
  EXPECT_NEAR(g.scalar(kl), gaussian_kl(q, p), 1e-12);
}

TEST(SampleLatent, FloorVarianceReturnsMean) {
  std::mt19937_64 rng(1);
  const GaussianParams p{{0.3, -2.0}, {kVarianceFloor * 1e-6, kVarianceFloor * 1e-6}};
  const auto z = sample_latent(p, rng);
  for (int k = 0; k < 2; ++k) EXPECT_NEAR(z[k], p.mu[k], 1e-3 * std::sqrt(kVarianceFloor));
}

TEST(SampleLatent, EmpiricalMeanWithinClt) {
  std::mt19937_64 rng(2);
  const GaussianParams p{{1.0, -0.5, 0.0}, {0.5, 2.0, 1.0}};
  std::vector<double> mean(3, 0.0);
  for (int i = 0; i < 10000; ++i) {
    const auto z = sample_latent(p, rng);
    for (int k = 0; k < 3; ++k) mean[k] += z[k] / 10000.0;
  }
  for (int k = 0; k < 3; ++k) EXPECT_LE(std::abs(mean[k] - p.mu[k]), 4.0 * std::sqrt(p.var[k] / 10000.0));
}

TEST(SampleLatent, SameSeedSameSample) {
  const GaussianParams p{{1.0, 2.0}, {0.5, 0.1}};
  std::mt19937_64 a(9), b(9);
  EXPECT_EQ(sample_latent(p, a), sample_latent(p, b));
}

TEST(Reparameterize, GradientFlowsToMeanAndVariance) {
  ParamStore ps;
  std::mt19937_64 rng(4);
  ps.add_uniform("mu", Shape{3}, 1.0, rng);
  ps.add("v", Tensor::vector({0.5, 1.2, 2.0}));
  const std::vector<double> eps = {0.3, -1.1, 0.7};
  const auto r = grad_check(ps, [&](Graph& g) {
    const Var z = reparameterize(g, {g.param("mu"), g.param("v")}, eps);
    return g.sum(g.square(z));
  });
  EXPECT_LT(r.max_relative_error, 1e-6);
}

VlvConfig small_config(std::uint64_t seed = 5, std::size_t window = 2) {
  VlvConfig c;
  c.embed_dim = 4;
  c.hidden_dim = 4;
  c.context_dim = 4;
  c.latent_dim = 3;
  c.window = window;
  c.train.init_scale = 0.5;
  c.train.seed = seed;
  return c;
}

constexpr std::size_t kV = 9;

TEST(PriorPosterior, VarianceFloorLengthAndDeterminism) {
  VlvModel m(Direction::kForward, kV, 0, small_config());
  const std::vector<double> z = {0.1, -0.2, 0.3};
  const std::vector<SentenceIds> ctx = {S({4, 5}), S({6})};
  for (auto& w : m.params().value(m.prior_net().var_b()).data) w = -1e3;
  const auto p = m.prior_params(z, ctx);
  ASSERT_EQ(p.var.size(), 3u);
  for (double v : p.var) EXPECT_GE(v, kVarianceFloor);
  const auto q = m.posterior_params(z, ctx);
  ASSERT_EQ(q.var.size(), 3u);
  for (double v : q.var) EXPECT_GE(v, kVarianceFloor);
  EXPECT_EQ(m.prior_params(z, ctx).mu, p.mu);
  EXPECT_EQ(m.posterior_params(z, ctx).var, q.var);
}

TEST(PriorPosterior, SensitiveToPreviousLatent) {
  VlvModel m(Direction::kForward, kV, 0, small_config());
  const std::vector<SentenceIds> ctx = {S({4, 5})};
  EXPECT_NE(m.prior_params(std::vector<double>{0, 0, 0}, ctx).mu,
            m.prior_params(std::vector<double>{1, 0, 0}, ctx).mu);
  EXPECT_NE(m.posterior_params(std::vector<double>{0, 0, 0}, ctx).mu,
            m.posterior_params(std::vector<double>{0, 0, 1}, ctx).mu);
}

TEST(PriorPosterior, EmptyContextAndBadLatentFail) {
  VlvModel m(Direction::kForward, kV, 0, small_config());
  EXPECT_THROW(m.prior_params(std::vector<double>{0, 0, 0}, {}), Error);
  const std::vector<SentenceIds> ctx = {S({4})};
  EXPECT_THROW(m.prior_params(std::vector<double>{0, 0}, ctx), ShapeError);
}

TEST(PriorPosterior, PriorIgnoresSentencesOutsideWindow) {
  VlvModel m(Direction::kForward, kV, 0, small_config(5, 2));
  const std::vector<double> z = {0.4, 0.1, -0.3};
  std::vector<SentenceIds> ctx = {S({4, 4}), S({5, 6}), S({7}), S({8, 5})};
  const auto before = m.prior_params(z, ctx);
  ctx[0] = S({8, 8, 8});
  ctx[1] = S({6});
  const auto after = m.prior_params(z, ctx);
  EXPECT_EQ(before.mu, after.mu);
  EXPECT_EQ(before.var, after.var);
  ctx[2] = S({4});
  EXPECT_NE(m.prior_params(z, ctx).mu, before.mu);
}

TEST(PriorPosterior, SharedWeightsGiveSameOutput) {
  VlvModel m(Direction::kForward, kV, 0, small_config());
  const std::string pre = m.prior_net().prefix, post = m.posterior_net().prefix;
  for (const auto& [name, p] : m.params().items()) {
    if (name.rfind(pre, 0) == 0) m.params().value(post + name.substr(pre.size())) = p.value;
  }
  const std::vector<double> z = {0.2, 0.2, -0.7};
  const std::vector<SentenceIds> ctx = {S({5}), S({6, 7})};
  const auto p = m.prior_params(z, ctx), q = m.posterior_params(z, ctx);
  EXPECT_EQ(p.mu, q.mu);
  EXPECT_EQ(p.var, q.var);
}

TEST(PriorPosterior, GradientCheckThroughBothHeads) {
  VlvModel m(Direction::kForward, kV, 0, small_config());
  const std::vector<double> z = {0.2, -0.4, 0.6};
  const std::vector<SentenceIds> ctx = {S({5, 4}), S({6, 7})};
  const auto r = grad_check(m.params(), [&](Graph& g) {
    const Var zp = g.constant_vector(z);
    const auto p = m.prior(g, zp, ctx);
    const auto q = m.posterior(g, zp, ctx);
    return g.add(g.add(g.sum(g.square(p.mu)), g.sum(p.var)), g.add(g.sum(g.square(q.mu)), g.sum(q.var)));
  });
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
}

const text::EncodedParagraph& paragraph() {
  static const text::EncodedParagraph p = {S({4, 5}), S({6, 7, 8}), S({5, 4}), S({8})};
  return p;
}

TEST(ElboStep, ReconstructionIsLogProbability) {
  VlvModel m(Direction::kForward, kV, 0, small_config());
  std::mt19937_64 rng(1);
  for (std::size_t n = 0; n < paragraph().size(); ++n) {
    const auto s = elbo_step(m, paragraph(), n, rng);
    EXPECT_LE(s.reconstruction, 0.0);
    EXPECT_GE(s.kl, 0.0);
  }
}

TEST(ElboStep, KlZeroWhenPosteriorEqualsPrior) {
  VlvModel m(Direction::kForward, kV, 0, small_config());
  for (const auto* net : {&m.prior_net(), &m.posterior_net()}) {
    for (auto& w : m.params().value(net->mu_w()).data) w = 0.0;
    for (auto& w : m.params().value(net->var_w()).data) w = 0.0;
    m.params().value(net->mu_b()) = Tensor::vector({0.3, -0.1, 0.2});
    m.params().value(net->var_b()) = Tensor::vector({0.5, 1.0, -0.4});
  }
  std::mt19937_64 rng(2);
  for (std::size_t n = 0; n < paragraph().size(); ++n) EXPECT_NEAR(elbo_step(m, paragraph(), n, rng).kl, 0.0, 1e-12);
}

TEST(ElboStep, StepsSumToFullParagraph) {
  VlvModel m(Direction::kForward, kV, 0, small_config());
  std::mt19937_64 rng(3);
  const Noise noise = m.draw_noise(4, rng);
  Graph g(m.params());
  const auto t = m.elbo_terms(g, paragraph(), noise, 3);
  std::mt19937_64 again(3);
  const auto s = elbo_step(m, paragraph(), 3, again);
  Graph h(m.params());
  const auto first = m.elbo_terms(h, paragraph(), noise, 2);
  EXPECT_NEAR(s.reconstruction, g.scalar(t.reconstruction) - h.scalar(first.reconstruction), 1e-9);
  EXPECT_NEAR(s.kl, g.scalar(t.kl) - h.scalar(first.kl), 1e-9);
}

TEST(ElboTerms, GradientCheckWithFrozenNoise) {
  VlvModel m(Direction::kForward, kV, 0, small_config(6));
  std::mt19937_64 rng(5);
  const Noise noise = m.draw_noise(paragraph().size(), rng);
  const auto r = grad_check(m.params(), [&](Graph& g) {
    const auto t = m.elbo_terms(g, paragraph(), noise, paragraph().size() - 1);
    return g.sub(t.kl, t.reconstruction);
  });
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter << "[" << r.worst_index << "]";
}

TEST(VlvLogProb, DeterministicAndNormalized) {
  VlvModel m(Direction::kForward, kV, 0, small_config(7));
  const std::vector<SentenceIds> ctx = {S({4}), S({6, 5})};
  EXPECT_EQ(m.log_prob(ctx, S({7, 8})).total, m.log_prob(ctx, S({7, 8})).total);
  double total = 0.0;
  for (TokenId w = 0; w < static_cast<TokenId>(kV); ++w) total += std::exp(m.log_prob(ctx, SentenceIds{{w}}).total);
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(VlvLogProb, SampledScoringDiffersFromPriorMean) {
  VlvModel m(Direction::kForward, kV, 0, small_config(7));
  const std::vector<SentenceIds> ctx = {S({4}), S({6, 5})};
  std::mt19937_64 a(1), b(1);
  const double s1 = m.log_prob_sampled(ctx, S({7, 8}), a).total;
  EXPECT_EQ(s1, m.log_prob_sampled(ctx, S({7, 8}), b).total);
  EXPECT_NE(s1, m.log_prob(ctx, S({7, 8})).total);
}

TEST(VlvLogProb, ZeroLatentPathwayIsVanilla) {
  VlvModel m(Direction::kForward, kV, 0, small_config(8));
  Tensor& w = m.params().value(m.decoder().out_w());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    for (std::size_t c = 4; c < w.cols(); ++c) w.at(r, c) = 0.0;
  }
  seq2seq::Seq2SeqModel vanilla(Direction::kForward, kV, 0, {4, 4, TrainConfig{}});
  for (auto& [name, p] : vanilla.params().items()) {
    const Tensor& from = m.params().value("vlv.decoder" + name.substr(3));
    if (name == vanilla.network().out_w()) {
      for (std::size_t r = 0; r < p.value.rows(); ++r) {
        for (std::size_t c = 0; c < p.value.cols(); ++c) p.value.at(r, c) = from.at(r, c);
      }
    } else {
      p.value = from;
    }
  }
  const std::vector<SentenceIds> ctx = {S({4}), S({6, 5})};
  EXPECT_NEAR(m.log_prob(ctx, S({7, 8, 4})).total, vanilla.log_prob(&ctx.back(), S({7, 8, 4})).total, 1e-12);
  const SentenceIds marker = text::boundary_sentence();
  EXPECT_NEAR(m.log_prob({}, S({5})).total, vanilla.log_prob(&marker, S({5})).total, 1e-12);
}

TEST(VlvModelTest, RejectsLanguageModelDirection) {
  EXPECT_THROW(VlvModel(Direction::kLanguageModel, kV, 0, small_config()), Error);
}

std::vector<text::EncodedParagraph> memorization_corpus() {
  std::vector<text::EncodedParagraph> c;
  for (TokenId i = 0; i < 8; ++i) {
    c.push_back({S({static_cast<TokenId>(4 + i % 5), 5}), S({static_cast<TokenId>(4 + (i + 2) % 5), 8}),
                 S({7, static_cast<TokenId>(4 + (i + 4) % 5)})});
  }
  return c;
}

TEST(TrainVlv, ElboImprovesMonotonically) {
  VlvConfig c = small_config(11);
  c.embed_dim = c.hidden_dim = c.context_dim = 8;
  c.anneal_steps = 0;
  c.track_elbo = true;
  c.train.init_scale = 0.08;
  c.train.epochs = 20;
  c.train.batch_size = 1;
  VlvModel m(Direction::kForward, kV, 0, c);
  const auto corpus = memorization_corpus();
  const auto r = train_vlv(m, corpus);
  ASSERT_EQ(r.epoch_elbo.size(), 20u);
  for (std::size_t e = 1; e < 20; ++e) EXPECT_GE(r.epoch_elbo[e], r.epoch_elbo[e - 1] - 1e-3) << "epoch " << e;
  EXPECT_GT(r.epoch_elbo.back(), r.epoch_elbo.front());
}

TEST(TrainVlv, PosteriorCollapseWithoutAnnealing) {
  VlvConfig c = small_config(12);
  c.embed_dim = c.hidden_dim = c.context_dim = 8;
  c.latent_dim = 1;
  c.anneal_steps = 0;
  c.track_elbo = true;
  c.train.epochs = 30;
  c.train.batch_size = 1;
  const std::vector<text::EncodedParagraph> corpus(8, {S({4, 5}), S({6, 7}), S({8, 4})});
  VlvModel m(Direction::kForward, kV, 0, c);
  const auto before = evaluate_elbo(m, corpus, c.elbo_seed);
  const auto r = train_vlv(m, corpus);
  EXPECT_LT(r.epoch_kl.back(), 0.01);
  EXPECT_LT(r.epoch_kl.back(), 0.1 * before.kl);
  EXPECT_GT(r.epoch_reconstruction.back(), before.reconstruction);
}

TEST(TrainVlv, BackwardModelReadsReversed) {
  VlvConfig c = small_config(13);
  c.train.epochs = 1;
  VlvModel f(Direction::kForward, kV, 0, c), b(Direction::kBackward, kV, 0, c);
  const auto corpus = memorization_corpus();
  std::vector<text::EncodedParagraph> rev = corpus;
  for (auto& p : rev) std::reverse(p.begin(), p.end());
  EXPECT_NEAR(evaluate_elbo(b, corpus, 1).elbo, evaluate_elbo(f, rev, 1).elbo, 1e-12);
}

}  // namespace
}  // namespace coherence::vlv
