#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "cli/cli.hpp"
#include "cli/gradient_suite.hpp"
#include "coherence/adversary.hpp"
#include "coherence/eval.hpp"
#include "coherence/hmmlda.hpp"
#include "coherence/scorers.hpp"
#include "coherence/seq2seq.hpp"
#include "coherence/synth.hpp"
#include "coherence/vlv.hpp"
#include "../test_util.hpp"

namespace coherence {
namespace {

using text::EncodedParagraph;
using text::SentenceIds;
using text::TokenId;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// ---------------------------------------------------------------- 1

Verdict gradient_integrity() {
  const auto start = Clock::now();
  bool ok = true;
  std::string detail;
  for (const auto& e : cli::run_gradient_suite("all")) {
    ok = ok && e.report.max_relative_error < 1e-4 && e.report.coordinates_checked > 0;
    detail += e.model + "=" + fmt("%.2e", e.report.max_relative_error) + " ";
  }
  const double t = seconds_since(start);
  detail += "runtime=" + fmt("%.1fs", t);
  return {ok && t < 60.0, detail};
}

// ---------------------------------------------------------------- 2

double log_normal(const std::vector<double>& x, const vlv::GaussianParams& p) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - p.mu[k];
    s += -0.5 * std::log(2.0 * M_PI * p.var[k]) - 0.5 * d * d / p.var[k];
  }
  return s;
}

Verdict kl_correctness() {
  const vlv::GaussianParams std2{{0, 0}, {1, 1}};
  const double a = vlv::gaussian_kl(std2, std2);
  const double b = vlv::gaussian_kl({{1, 0}, {1, 1}}, std2);
  const double c = vlv::gaussian_kl({{0}, {0.25}}, {{0}, {1}});
  bool ok = std::abs(a) <= 1e-9 && std::abs(b - 0.5) <= 1e-9 &&
            std::abs(c - 0.5 * (0.25 - 1.0 + std::log(4.0))) <= 1e-9 && std::abs(c - 0.31815) < 1e-5;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> mu(-1.5, 1.5), var(0.2, 3.0);
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    vlv::GaussianParams q, p;
    for (int k = 0; k < 3; ++k) {
      q.mu.push_back(mu(rng));
      q.var.push_back(var(rng));
      p.mu.push_back(mu(rng));
      p.var.push_back(var(rng));
    }
    double sum = 0.0, sq = 0.0;
    constexpr int kSamples = 50000;
    for (int i = 0; i < kSamples; ++i) {
      const auto z = vlv::sample_latent(q, rng);
      const double v = log_normal(z, q) - log_normal(z, p);
      sum += v;
      sq += v * v;
    }
    const double mean = sum / kSamples;
    const double se = std::sqrt((sq / kSamples - mean * mean) / kSamples);
    const double z = std::abs(vlv::gaussian_kl(q, p) - mean) / se;
    worst = std::max(worst, z);
  }
  ok = ok && worst <= 3.0;
  return {ok, "analytic=" + fmt("%.6f", a) + "," + fmt("%.6f", b) + "," + fmt("%.6f", c) +
                  " worst_mc_deviation=" + fmt("%.2f", worst) + "se"};
}

// ---------------------------------------------------------------- 3

Verdict kendall() {
  std::size_t checked = 0;
  bool ok = true;
  for (std::size_t n = 2; n <= 7; ++n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    do {
      std::size_t inv = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) inv += p[i] > p[j];
      }
      const double expect = 1.0 - 2.0 * static_cast<double>(inv) / static_cast<double>(n * (n - 1));
      ok = ok && eval::count_inversions(p) == inv && std::abs(eval::kendall_tau(p, n) - expect) < 1e-15;
      ++checked;
    } while (std::next_permutation(p.begin(), p.end()));
  }
  const std::vector<std::size_t> id = {0, 1, 2, 3}, rev = {3, 2, 1, 0};
  const double t_id = eval::kendall_tau(id, 4), t_rev = eval::kendall_tau(rev, 4);
  ok = ok && t_id == 1.0 && std::abs(t_rev) < 1e-15;
  return {ok, "permutations=" + std::to_string(checked) + " identity=" + fmt("%.3f", t_id) +
                  " reversal=" + fmt("%.3f", t_rev)};
}

// ---------------------------------------------------------------- 4

constexpr std::size_t kTinyVocab = 6;

SentenceIds S(std::initializer_list<TokenId> ids) { return testing::S(ids); }

// Every content sequence of length <= max_len followed by EOS.
std::vector<SentenceIds> all_sequences(std::size_t max_len) {
  std::vector<TokenId> content = {text::kUnk};
  for (TokenId t = static_cast<TokenId>(text::kReservedCount); t < static_cast<TokenId>(kTinyVocab); ++t) content.push_back(t);
  std::vector<SentenceIds> out;
  std::vector<std::vector<TokenId>> frontier = {{}};
  for (std::size_t len = 0; len <= max_len; ++len) {
    std::vector<std::vector<TokenId>> next;
    for (const auto& f : frontier) {
      SentenceIds s{f};
      s.ids.push_back(text::kEos);
      out.push_back(s);
      for (TokenId t : content) {
        auto g = f;
        g.push_back(t);
        next.push_back(g);
      }
    }
    frontier = std::move(next);
  }
  return out;
}

bool beam_matches(const ConditionalModel& m, std::span<const SentenceIds> context, std::size_t max_len) {
  double best = -INFINITY;
  SentenceIds arg;
  for (const auto& s : all_sequences(max_len)) {
    const double lp = m.log_prob(context, s).total;
    if (lp > best) {
      best = lp;
      arg = s;
    }
  }
  std::size_t beam = 1;
  for (std::size_t k = 0; k < max_len; ++k) beam *= kTinyVocab;
  const auto hyps = m.beam_decode(context, BeamConfig{beam, 1, max_len});
  return !hyps.empty() && hyps[0].sentence == arg && std::abs(hyps[0].log_prob - best) < 1e-9;
}

Verdict beam_exactness() {
  std::size_t cases = 0, ok_cases = 0;
  const std::vector<SentenceIds> ctx = {S({4, 5}), S({5})};
  const std::vector<EncodedParagraph> topic_corpus = {{S({4, 5}), S({5, 4, 4})}, {S({5}), S({4, 4})}};
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    TrainConfig t;
    t.init_scale = 1.5;
    t.seed = seed;
    for (std::size_t max_len = 1; max_len <= 3; ++max_len) {
      const seq2seq::Seq2SeqModel lm(Direction::kLanguageModel, kTinyVocab, 0, {3, 4, t});
      const seq2seq::Seq2SeqModel fwd(Direction::kForward, kTinyVocab, 0, {3, 4, t});
      hmmlda::HmmLdaConfig hc;
      hc.topics = 2;
      hc.sweeps = 5;
      const auto st = hmmlda::fit_hmm_lda(topic_corpus, kTinyVocab, hc);
      const hmmlda::HmmLdaGmModel gm(Direction::kForward, st, kTinyVocab, 0, {3, 4, 2, t});
      vlv::VlvConfig vc;
      vc.embed_dim = vc.hidden_dim = vc.context_dim = 3;
      vc.latent_dim = 2;
      vc.train = t;
      const vlv::VlvModel v(Direction::kForward, kTinyVocab, 0, vc);
      ok_cases += beam_matches(lm, {}, max_len);
      ok_cases += beam_matches(fwd, std::span(ctx).last(1), max_len);
      ok_cases += beam_matches(gm, ctx, max_len);
      ok_cases += beam_matches(v, ctx, max_len);
      cases += 4;
    }
  }
  std::size_t orderings = 0, ok_orderings = 0;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  for (std::size_t n = 2; n <= 5; ++n) {
    std::size_t fact = 1;
    for (std::size_t k = 2; k < n; ++k) fact *= k;
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<double> w(n * n);
      for (double& x : w) x = normal(rng);
      const auto scorer = eval::pairwise([&](std::size_t a, std::size_t b) { return w[a * n + b]; });
      std::vector<std::size_t> rest(n - 1);
      std::iota(rest.begin(), rest.end(), 1);
      double best = -INFINITY;
      std::vector<std::size_t> arg;
      do {
        double total = w[rest[0]];
        for (std::size_t k = 1; k < rest.size(); ++k) total += w[rest[k - 1] * n + rest[k]];
        if (total > best) {
          best = total;
          arg = {0};
          arg.insert(arg.end(), rest.begin(), rest.end());
        }
      } while (std::next_permutation(rest.begin(), rest.end()));
      const auto r = eval::reconstruct(scorer, n, fact);
      ok_orderings += r.order == arg && std::abs(r.score - best) < 1e-12;
      ++orderings;
    }
  }
  return {ok_cases == cases && ok_orderings == orderings,
          "sequence_cases=" + std::to_string(ok_cases) + "/" + std::to_string(cases) +
              " ordering_cases=" + std::to_string(ok_orderings) + "/" + std::to_string(orderings)};
}

// ---------------------------------------------------------------- 5

Verdict mmi_identity() {
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<TokenId> tok(4, 8);
  std::uniform_int_distribution<int> len(1, 5);
  double worst = 0.0;
  bool zero = true;
  for (int draw = 0; draw < 100; ++draw) {
    TrainConfig t;
    t.init_scale = 1.0;
    t.seed = rng();
    const seq2seq::Seq2SeqModel f(Direction::kForward, 9, 0, {3, 4, t});
    t.seed = rng();
    const seq2seq::Seq2SeqModel b(Direction::kBackward, 9, 0, {3, 4, t});
    t.seed = rng();
    const seq2seq::Seq2SeqModel l(Direction::kLanguageModel, 9, 0, {3, 4, t});
    SentenceIds prev, next;
    for (int i = len(rng); i > 0; --i) prev.ids.push_back(tok(rng));
    for (int i = len(rng); i > 0; --i) next.ids.push_back(tok(rng));
    prev.ids.push_back(text::kEos);
    next.ids.push_back(text::kEos);
    const double mmi = scorers::score_mmi(f, b, l, prev, next).value;
    const double bi = scorers::score_bi(f, b, prev, next).value;
    const double lm_terms = l.log_prob(nullptr, prev).total / static_cast<double>(prev.length()) +
                            l.log_prob(nullptr, next).total / static_cast<double>(next.length());
    worst = std::max(worst, std::abs(mmi - (bi - lm_terms)));
    const testing::ContextFree cf(l, Direction::kForward), cb(l, Direction::kBackward);
    zero = zero && scorers::score_mmi(cf, cb, l, prev, next).value == 0.0;
  }
  return {worst <= 1e-12 && zero, "max_deviation=" + fmt("%.2e", worst) + " equal_models_zero=" + (zero ? "yes" : "no")};
}

// ---------------------------------------------------------------- 6, 7, 9 shared task

struct OrderedTask {
  text::Vocab vocab;
  std::vector<EncodedParagraph> train, held_out;
  std::vector<eval::ParagraphPair> pairs;
  std::optional<seq2seq::Seq2SeqModel> forward, backward, language;
};

OrderedTask& ordered_task() {
  static std::unique_ptr<OrderedTask> task;
  if (task) return *task;
  task = std::make_unique<OrderedTask>();
  synth::GeneratorSpec spec;
  const auto train = synth::generate(spec, 2000);
  spec.seed = 43;
  spec.min_paragraph = spec.max_paragraph = 24;
  const auto held = synth::generate(spec, 200);
  task->vocab = text::build_vocab(train.corpus, 1000, 1);
  task->train = text::encode_corpus(task->vocab, train.corpus);
  task->held_out = text::encode_corpus(task->vocab, held.corpus);
  text::Rng rng(5);
  for (const auto& p : task->held_out) task->pairs.push_back({p, text::permute_paragraph(p, rng).second});
  seq2seq::Seq2SeqConfig c;
  c.embed_dim = c.hidden_dim = 32;
  c.train.epochs = 4;
  for (Direction d : {Direction::kForward, Direction::kBackward, Direction::kLanguageModel}) {
    auto m = seq2seq::train_seq2seq(seq2seq::make_pairs(task->train, d), d, task->vocab, c);
    (d == Direction::kForward ? task->forward : d == Direction::kBackward ? task->backward : task->language).emplace(std::move(m));
  }
  return *task;
}

double accuracy(scorers::Mode mode, const scorers::Models& models, std::span<const eval::ParagraphPair> pairs) {
  return eval::binary_accuracy([&](std::span<const SentenceIds> d) { return scorers::score_document(mode, models, d); },
                               pairs)
      .accuracy;
}

Verdict ordering_skill() {
  const auto start = Clock::now();
  auto& t = ordered_task();
  const scorers::Models m{&*t.forward, &*t.backward, &*t.language};
  const double uni = accuracy(scorers::Mode::kUni, m, t.pairs);
  const double bi = accuracy(scorers::Mode::kBi, m, t.pairs);
  const double mmi = accuracy(scorers::Mode::kMmi, m, t.pairs);
  const double secs = seconds_since(start);
  return {uni >= 0.9 && mmi >= bi && bi >= uni && secs <= 1800.0,
          "uni=" + fmt("%.3f", uni) + " bi=" + fmt("%.3f", bi) + " mmi=" + fmt("%.3f", mmi) +
              " runtime=" + fmt("%.0fs", secs)};
}

Verdict reconstruction_skill() {
  auto& t = ordered_task();
  const scorers::Models m{&*t.forward, &*t.backward, &*t.language};
  text::Rng rng(6);
  double tau = 0.0;
  for (const auto& p : t.held_out) {
    const std::size_t n = p.size();
    // bag[k] is the true sentence at bag index k; sentence 0 stays first.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin() + 1, perm.end(), rng);
    std::vector<std::size_t> truth(n);
    for (std::size_t k = 0; k < n; ++k) truth[perm[k]] = k;
    std::vector<double> table(n * n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 1; b < n; ++b) {
        if (a != b) table[a * n + b] = scorers::score_pair(scorers::Mode::kMmi, m, p[perm[a]], p[perm[b]]).value;
      }
    }
    tau += eval::reconstruct(eval::pairwise([&](std::size_t a, std::size_t b) { return table[a * n + b]; }), n, 10, truth).tau;
  }
  tau /= static_cast<double>(t.held_out.size());
  // Random orderings with the first sentence fixed.
  double baseline = 0.0;
  std::mt19937_64 brng(7);
  constexpr int kDraws = 10000;
  for (int i = 0; i < kDraws; ++i) {
    const std::size_t n = t.held_out[static_cast<std::size_t>(i) % t.held_out.size()].size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin() + 1, order.end(), brng);
    baseline += eval::kendall_tau(order, n) / kDraws;
  }
  return {tau >= 0.6 && baseline <= 0.55, "tau=" + fmt("%.3f", tau) + " random_baseline=" + fmt("%.3f", baseline)};
}

// ---------------------------------------------------------------- 8

Verdict hmmlda_recovery() {
  synth::GeneratorSpec spec;
  spec.kind = synth::Kind::kTwoTopic;
  const auto two = synth::generate(spec, 300);
  const text::Vocab v2 = text::build_vocab(two.corpus, 1000, 1);
  hmmlda::HmmLdaConfig hc;
  hc.topics = 2;
  hc.sweeps = 200;
  const auto st2 = hmmlda::fit_hmm_lda(text::encode_corpus(v2, two.corpus), v2.size(), hc);
  std::size_t agree = 0;
  for (const auto& a : two.annotations) agree += st2.assignments[a.paragraph][a.position] == (a.label == "t1" ? 1 : 0);
  double purity = static_cast<double>(agree) / static_cast<double>(two.annotations.size());
  purity = std::max(purity, 1.0 - purity);

  synth::GeneratorSpec td;
  td.kind = synth::Kind::kTwoTopic;
  td.topics = 8;
  td.noise_words = 20;
  td.noise_rate = 0.8;
  td.stay_probability = 1.0;
  td.min_sentence = 3;
  td.max_sentence = 5;
  const auto train = synth::generate(td, 1000);
  td.seed = 99;
  const auto held = synth::generate(td, 200);
  const text::Vocab vocab = text::build_vocab(train.corpus, 1000, 1);
  const auto tr = text::encode_corpus(vocab, train.corpus);
  const auto he = text::encode_corpus(vocab, held.corpus);
  hmmlda::HmmLdaConfig tc;
  tc.topics = 8;
  tc.sweeps = 50;
  const auto st = hmmlda::fit_hmm_lda(tr, vocab.size(), tc);
  hmmlda::GmConfig g;
  g.embed_dim = g.hidden_dim = 32;
  g.topic_dim = 16;
  g.train.epochs = 8;
  hmmlda::HmmLdaGmModel gm(Direction::kForward, st, vocab.size(), vocab.digest(), g);
  hmmlda::train(gm, hmmlda::make_gm_examples(st, tr, Direction::kForward));
  const double gm_ppl = std::exp(hmmlda::mean_token_nll(gm, hmmlda::make_gm_examples(st, he, Direction::kForward)));
  seq2seq::Seq2SeqConfig sc;
  sc.embed_dim = sc.hidden_dim = 32;
  sc.train.epochs = 8;
  const auto s2s = seq2seq::train_seq2seq(seq2seq::make_pairs(tr, Direction::kForward), Direction::kForward, vocab, sc);
  const double s2s_ppl = std::exp(seq2seq::mean_token_nll(s2s, seq2seq::make_pairs(he, Direction::kForward)));
  return {purity > 0.9 && gm_ppl <= s2s_ppl,
          "purity=" + fmt("%.3f", purity) + " gm_ppl=" + fmt("%.3f", gm_ppl) + " s2s_ppl=" + fmt("%.3f", s2s_ppl)};
}

// ---------------------------------------------------------------- 9

Verdict vlv_sanity() {
  vlv::VlvConfig mc;
  mc.embed_dim = mc.hidden_dim = mc.context_dim = 8;
  mc.latent_dim = 3;
  mc.window = 2;
  mc.anneal_steps = 0;
  mc.track_elbo = true;
  mc.train.epochs = 20;
  mc.train.batch_size = 1;
  mc.train.seed = 11;
  std::vector<EncodedParagraph> memo;
  for (TokenId i = 0; i < 8; ++i) {
    memo.push_back({S({static_cast<TokenId>(4 + i % 5), 5}), S({static_cast<TokenId>(4 + (i + 2) % 5), 8}),
                    S({7, static_cast<TokenId>(4 + (i + 4) % 5)})});
  }
  vlv::VlvModel small(Direction::kForward, 9, 0, mc);
  const auto r = vlv::train_vlv(small, memo);
  bool monotone = r.epoch_elbo.size() == 20;
  for (std::size_t e = 1; e < r.epoch_elbo.size(); ++e) monotone = monotone && r.epoch_elbo[e] >= r.epoch_elbo[e - 1] - 1e-3;

  auto& t = ordered_task();
  vlv::VlvConfig c;
  c.embed_dim = c.hidden_dim = c.context_dim = 32;
  c.latent_dim = 8;
  c.anneal_steps = 200;
  c.train.epochs = 3;
  vlv::VlvModel f(Direction::kForward, t.vocab.size(), t.vocab.digest(), c);
  vlv::train_vlv(f, t.train);
  const double vlv_acc = accuracy(scorers::Mode::kUni, {&f, nullptr, nullptr}, t.pairs);
  const double s2s_acc = accuracy(scorers::Mode::kUni, {&*t.forward, nullptr, nullptr}, t.pairs);
  return {monotone && vlv_acc >= s2s_acc,
          std::string("elbo_monotone=") + (monotone ? "yes" : "no") + " elbo_first=" +
              fmt("%.3f", r.epoch_elbo.front()) + " elbo_last=" + fmt("%.3f", r.epoch_elbo.back()) +
              " vlv_acc=" + fmt("%.3f", vlv_acc) + " s2s_acc=" + fmt("%.3f", s2s_acc)};
}

// ---------------------------------------------------------------- 10

eval::AdversarialReport adversary_run(double sentinel_rate) {
  synth::GeneratorSpec spec;
  spec.kind = synth::Kind::kSentinel;
  spec.sentinel_rate = sentinel_rate;
  const auto corpus = synth::generate(spec, 600);
  const text::Vocab vocab = text::build_vocab(corpus.corpus, 1000, 1);
  std::vector<eval::AdversarialExample> humans, machines, test;
  const auto all = synth::adversarial_examples(corpus, vocab);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const std::size_t item = i / 2;
    // Without sentinels, humans and machines come from different items so
    // no chunk appears in both classes.
    if (sentinel_rate == 0.0 && (all[i].human ? item % 2 != 0 : item % 2 != 1)) continue;
    if (item < 400) {
      (all[i].human ? humans : machines).push_back(all[i]);
    } else {
      test.push_back(all[i]);
    }
  }
  eval::AdversaryConfig ac;
  ac.embed_dim = ac.word_hidden = ac.sent_hidden = 16;
  ac.train.epochs = 5;
  eval::AdversarialEvaluator ev(vocab.size(), vocab.digest(), ac);
  eval::train_adversarial_evaluator(ev, humans, machines);
  return eval::adver_suc(ev, test);
}

Verdict adversarial_pipeline() {
  const auto sentinel = adversary_run(1.0);
  const auto chance = adversary_run(0.0);
  const bool sums = sentinel.adver_suc + sentinel.accuracy == 1.0 && chance.adver_suc + chance.accuracy == 1.0;
  return {sentinel.accuracy > 0.95 && sentinel.adver_suc < 0.05 && std::abs(chance.adver_suc - 0.5) <= 0.05 && sums,
          "sentinel_acc=" + fmt("%.3f", sentinel.accuracy) + " sentinel_advsuc=" + fmt("%.3f", sentinel.adver_suc) +
              " chance_advsuc=" + fmt("%.3f", chance.adver_suc) + " sums_exact=" + (sums ? "yes" : "no")};
}

// ---------------------------------------------------------------- 11

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs every subcommand once in `dir`; returns the concatenated reports and
// written files, or the first failing command.
std::pair<std::string, std::string> pipeline(const std::filesystem::path& dir) {
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto P = [&](const std::string& name) { return (dir / name).string(); };
  testing::write_file(dir / "tiny.conf",
                      "embed_dim = 4\nhidden_dim = 4\ncontext_dim = 4\nlatent_dim = 2\ntopics = 3\ntopic_dim = 2\n"
                      "sweeps = 5\nepochs = 1\nword_hidden = 4\nsent_hidden = 4\nbeam_size = 3\nnbest = 3\n"
                      "max_len = 5\nclasses = 24\nthreads = 1\nanneal_steps = 10\n");
  testing::write_file(dir / "emb.txt", "c0w1 1 0 0.5\nc1w2 0 1 0.5\nc2w0 1 1 0\nc3w3 0.2 0.1 1\n");
  const std::vector<std::string> conf = {"--config", P("tiny.conf")};
  const std::vector<std::string> data = {"--data", P("data")};
  const std::string fwd = P("fwd.ckpt"), bwd = P("bwd.ckpt"), lm = P("lm.ckpt");
  std::vector<std::vector<std::string>> commands = {
      {"synth", "--kind", "ordered", "--count", "12", "--out", P("ordered.txt"), "--annotations", P("ordered.ann")},
      {"synth", "--kind", "two-topic", "--count", "5", "--out", P("topics.txt"), "--noise-rate", "0.3"},
      {"synth", "--kind", "sentinel", "--count", "8", "--out", P("sentinel.txt"), "--annotations", P("sentinel.ann")},
      {"ingest", "--corpus", P("ordered.txt"), "--out", P("data")},
      {"ingest", "--corpus", P("sentinel.txt"), "--out", P("sdata")},
      {"train", "--model", "lm", "--out", lm},
      {"train", "--model", "s2s-fwd", "--out", fwd},
      {"train", "--model", "s2s-bwd", "--out", bwd},
      {"train", "--model", "hmmlda", "--out", P("topics.ckpt")},
      {"train", "--model", "hmmlda-gm-fwd", "--out", P("gmf.ckpt"), "--topic-model", P("topics.ckpt")},
      {"train", "--model", "hmmlda-gm-bwd", "--out", P("gmb.ckpt"), "--topic-model", P("topics.ckpt")},
      {"train", "--model", "vlv-fwd", "--out", P("vf.ckpt")},
      {"train", "--model", "vlv-bwd", "--out", P("vb.ckpt")},
      {"train", "--model", "discrim", "--out", P("d.ckpt")},
      {"score", "--mode", "uni", "--forward", fwd},
      {"score", "--mode", "bi", "--forward", fwd, "--backward", bwd},
      {"score", "--mode", "mmi", "--forward", fwd, "--backward", bwd, "--lm", lm},
      {"score", "--mode", "mmi", "--backend", "hmmlda", "--forward", P("gmf.ckpt"), "--backward", P("gmb.ckpt"), "--lm", lm},
      {"score", "--mode", "bi", "--backend", "vlv", "--forward", P("vf.ckpt"), "--backward", P("vb.ckpt")},
      {"score", "--mode", "discrim", "--discrim", P("d.ckpt")},
      {"score", "--mode", "cosine", "--embeddings", P("emb.txt")},
      {"eval-binary", "--mode", "mmi", "--forward", fwd, "--backward", bwd, "--lm", lm},
      {"eval-binary", "--mode", "oracle"},
      {"reconstruct", "--mode", "bi", "--forward", fwd, "--backward", bwd, "--standard-tau"},
      {"reconstruct", "--mode", "uni", "--backend", "vlv", "--forward", P("vf.ckpt")},
      {"generate", "--turns", "2", "--rerank", "mmi", "--forward", fwd, "--backward", bwd, "--lm", lm},
      {"gradcheck"},
  };
  for (auto& c : commands) {
    const std::string& sub = c[0];
    if (sub == "train" || sub == "score" || sub == "eval-binary" || sub == "reconstruct" || sub == "generate") {
      c.insert(c.end(), data.begin(), data.end());
    }
    c.insert(c.end(), conf.begin(), conf.end());
  }
  commands.push_back({"train", "--model", "adversary", "--corpus", P("sentinel.txt"), "--vocab", P("sdata/vocab.txt"),
                      "--annotations", P("sentinel.ann"), "--out", P("adv.ckpt"), "--config", P("tiny.conf")});
  commands.push_back({"adversarial-eval", "--evaluator", P("adv.ckpt"), "--corpus", P("sentinel.txt"), "--vocab",
                      P("sdata/vocab.txt"), "--annotations", P("sentinel.ann"), "--config", P("tiny.conf")});

  std::string transcript;
  for (const auto& c : commands) {
    std::ostringstream out, err;
    const int code = cli::run_cli(c, out, err);
    std::string line;
    for (const auto& a : c) line += a + " ";
    if (code != 0) return {"", "exit " + std::to_string(code) + ": " + line + ": " + err.str()};
    transcript += line + "\n" + out.str();
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) transcript += f.string() + "\n" + read_bytes(f);
  return {transcript, ""};
}

Verdict determinism() {
  const auto dir = std::filesystem::temp_directory_path() / ("coherence-accept-" + std::to_string(::getpid()));
  const auto [first, e1] = pipeline(dir);
  const auto [second, e2] = pipeline(dir);
  std::filesystem::remove_all(dir);
  if (!e1.empty() || !e2.empty()) return {false, e1.empty() ? e2 : e1};
  return {first == second, "commands=31 transcript_bytes=" + std::to_string(first.size()) +
                               " identical=" + (first == second ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* name;
  Verdict (*run)();
};

const Criterion kCriteria[] = {
    {1, "gradient-integrity", gradient_integrity}, {2, "kl-correctness", kl_correctness},
    {3, "kendall-tau", kendall},                   {4, "beam-exactness", beam_exactness},
    {5, "mmi-identity", mmi_identity},             {6, "ordering-skill", ordering_skill},
    {7, "reconstruction-skill", reconstruction_skill}, {8, "hmmlda-recovery", hmmlda_recovery},
    {9, "vlv-sanity", vlv_sanity},                 {10, "adversarial-pipeline", adversarial_pipeline},
    {11, "determinism", determinism},
};

}  // namespace
}  // namespace coherence

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string id; std::getline(list, id, ',');) only.insert(std::stoi(id));
    } else {
      std::cerr << "usage: acceptance [--only N[,M...]]\n";
      return 2;
    }
  }
  int failed = 0;
  for (const auto& c : coherence::kCriteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = coherence::Clock::now();
    coherence::Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << c.id << " " << c.name << " " << v.detail << " ("
              << coherence::fmt("%.1fs", coherence::seconds_since(start)) << ")" << std::endl;
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
