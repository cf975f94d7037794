#include <benchmark/benchmark.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "coherence/eval.hpp"
#include "coherence/lstm.hpp"
#include "coherence/seq2seq.hpp"

namespace coherence {
namespace {

void BM_LstmStep(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  ParamStore store;
  std::mt19937_64 rng(1);
  const lstm::LstmParams spec{"bench", dim, dim};
  lstm::init_lstm(store, spec, rng);
  const std::vector<double> x(dim, 0.1);
  for (auto _ : state) {
    Graph g(store);
    const auto bound = lstm::bind(g, spec);
    auto s = lstm::step(g, bound, g.constant_vector(x), lstm::zero_state(g, spec));
    benchmark::DoNotOptimize(g.value(s.h));
  }
}
BENCHMARK(BM_LstmStep)->Arg(32)->Arg(128);

void BM_LstmStepBackward(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  ParamStore store;
  std::mt19937_64 rng(1);
  const lstm::LstmParams spec{"bench", dim, dim};
  lstm::init_lstm(store, spec, rng);
  const std::vector<double> x(dim, 0.1);
  for (auto _ : state) {
    Graph g(store);
    const auto bound = lstm::bind(g, spec);
    auto s = lstm::step(g, bound, g.constant_vector(x), lstm::zero_state(g, spec));
    g.backward(g.sum(s.h));
    benchmark::DoNotOptimize(g.gradients());
  }
}
BENCHMARK(BM_LstmStepBackward)->Arg(32)->Arg(128);

void BM_BeamDecode(benchmark::State& state) {
  TrainConfig t;
  t.seed = 3;
  const seq2seq::Seq2SeqModel m(Direction::kForward, 200, 0, {32, 32, t});
  text::SentenceIds ctx{{10, 11, 12, 13, text::kEos}};
  const auto width = static_cast<std::size_t>(state.range(0));
  const BeamConfig beam{width, width, 12};
  for (auto _ : state) benchmark::DoNotOptimize(m.beam_decode(std::span(&ctx, 1), beam));
}
BENCHMARK(BM_BeamDecode)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_LogProb(benchmark::State& state) {
  TrainConfig t;
  t.seed = 3;
  const seq2seq::Seq2SeqModel m(Direction::kForward, 200, 0, {32, 32, t});
  text::SentenceIds ctx{{10, 11, 12, 13, text::kEos}}, target{{20, 21, 22, 23, 24, 25, text::kEos}};
  for (auto _ : state) benchmark::DoNotOptimize(m.log_prob(std::span(&ctx, 1), target).total);
}
BENCHMARK(BM_LogProb);

void BM_KendallTau(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(9));
  for (auto _ : state) benchmark::DoNotOptimize(eval::kendall_tau(order, n));
}
BENCHMARK(BM_KendallTau)->Arg(8)->Arg(24)->Arg(1024);

void BM_Reconstruct(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> w(n * n);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  for (double& x : w) x = normal(rng);
  const auto scorer = eval::pairwise([&](std::size_t a, std::size_t b) { return w[a * n + b]; });
  for (auto _ : state) benchmark::DoNotOptimize(eval::reconstruct(scorer, n, 10).score);
}
BENCHMARK(BM_Reconstruct)->Arg(8)->Arg(24);

}  // namespace
}  // namespace coherence

BENCHMARK_MAIN();
