#include "coherence/seq2seq.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <sstream>

#include "coherence/error.hpp"
#include "coherence/trainer.hpp"

namespace coherence::seq2seq {

using text::SentenceIds;
using text::TokenId;

void EncoderDecoder::init(ParamStore& store, std::mt19937_64& rng, double scale) const {
  lstm::init_embedding(store, embedding(), rng, scale);
  if (has_encoder) lstm::init_lstm(store, encoder(), rng, scale);
  lstm::init_lstm(store, decoder(), rng, scale);
  store.add_uniform(out_w(), Shape{vocab_size, hidden_dim + latent_dim}, scale, rng);
  store.add_zeros(out_b(), Shape{vocab_size});
}

EncoderDecoder::Bound EncoderDecoder::bind(Graph& g) const {
  Bound b{g.param(embedding().name), g.param(out_w()), g.param(out_b()), std::nullopt,
          lstm::bind(g, decoder())};
  if (has_encoder) b.enc = lstm::bind(g, encoder());
  return b;
}

lstm::LstmState EncoderDecoder::start(Graph& g, const Bound& b, const SentenceIds* source) const {
  lstm::LstmState state = lstm::zero_state(g, decoder());
  if (source == nullptr) return state;
  if (!b.enc) throw Error("language model cannot take a source sentence");
  for (TokenId id : source->ids) state = lstm::step(g, *b.enc, g.row(b.emb, id), state);
  return state;
}

Var EncoderDecoder::step(Graph& g, const Bound& b, lstm::LstmState& state, TokenId prev,
                         std::optional<Var> latent) const {
  state = lstm::step(g, b.dec, g.row(b.emb, prev), state);
  if (latent_dim == 0) return g.affine(b.out_w, state.h, b.out_b);
  if (!latent) throw Error("latent-conditioned decoder needs a latent vector");
  return g.affine(b.out_w, g.concat({state.h, *latent}), b.out_b);
}

Var EncoderDecoder::target_nll(Graph& g, const Bound& b, const SentenceIds* source,
                               const SentenceIds& target, std::optional<Var> latent) const {
  if (target.ids.empty()) throw Error("empty target sentence");
  lstm::LstmState state = start(g, b, source);
  TokenId prev = text::kBos;
  std::vector<Var> losses;
  losses.reserve(target.ids.size());
  for (TokenId t : target.ids) {
    Var logits = step(g, b, state, prev, latent);
    losses.push_back(g.softmax_xent(logits, t));
    prev = t;
  }
  return g.sum(g.concat(losses));
}

double log_softmax_at(std::span<const double> logits, std::size_t token) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  return -(mx + std::log(z) - logits[token]);
}

std::vector<Hypothesis> EncoderDecoder::beam_search(Graph& g, const Bound& b,
                                                    const SentenceIds* source,
                                                    std::optional<Var> latent,
                                                    const BeamConfig& config) const {
  if (config.beam_size == 0 || config.nbest == 0 || config.nbest > config.beam_size) {
    throw Error("beam search needs beam_size >= nbest >= 1");
  }
  struct Live {
    std::vector<TokenId> tokens;
    double score = 0.0;
    lstm::LstmState state;
  };
  struct Candidate {
    std::size_t parent;
    TokenId token;
    double score;
  };

  std::vector<Live> active{{{}, 0.0, start(g, b, source)}};
  std::vector<Hypothesis> pool;
  for (std::size_t depth = 0; depth <= config.max_len && !active.empty(); ++depth) {
    const bool forced = depth == config.max_len;
    std::vector<Candidate> candidates;
    std::vector<lstm::LstmState> next_states(active.size());
    for (std::size_t h = 0; h < active.size(); ++h) {
      lstm::LstmState state = active[h].state;
      const TokenId prev = active[h].tokens.empty() ? text::kBos : active[h].tokens.back();
      const auto& logits = g.value(step(g, b, state, prev, latent)).data;
      next_states[h] = state;
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (double v : logits) z += std::exp(v - mx);
      const double log_z = mx + std::log(z);
      for (TokenId t = 0; t < vocab_size; ++t) {
        if (t == text::kPad || t == text::kBos) continue;
        if (forced && t != text::kEos) continue;
        candidates.push_back({h, t, active[h].score - (log_z - logits[t])});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& x, const Candidate& y) { return x.score > y.score; });
    if (candidates.size() > config.beam_size) candidates.resize(config.beam_size);

    std::vector<Live> next;
    for (const auto& c : candidates) {
      std::vector<TokenId> tokens = active[c.parent].tokens;
      tokens.push_back(c.token);
      if (c.token == text::kEos) {
        pool.push_back({SentenceIds{std::move(tokens)}, c.score, forced});
      } else {
        next.push_back({std::move(tokens), c.score, next_states[c.parent]});
      }
    }
    active = std::move(next);

    // Scores only decrease with length, so once nbest finished hypotheses beat
    // every live one the result is settled.
    if (pool.size() >= config.nbest && !active.empty()) {
      std::vector<double> scores;
      for (const auto& p : pool) scores.push_back(p.log_prob);
      std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(config.nbest - 1),
                       scores.end(), std::greater<>());
      const double kth = scores[config.nbest - 1];
      double best_live = active.front().score;
      for (const auto& a : active) best_live = std::max(best_live, a.score);
      if (best_live < kth) break;
    }
  }
  std::stable_sort(pool.begin(), pool.end(),
                   [](const Hypothesis& x, const Hypothesis& y) { return x.log_prob > y.log_prob; });
  if (pool.size() > config.nbest) pool.resize(config.nbest);
  return pool;
}

std::string_view checkpoint_kind(Direction direction) {
  switch (direction) {
    case Direction::kForward: return "s2s-fwd";
    case Direction::kBackward: return "s2s-bwd";
    case Direction::kLanguageModel: return "lm";
  }
  return "";
}

Seq2SeqModel::Seq2SeqModel(Direction direction, const text::Vocab& vocab, const Seq2SeqConfig& config)
    : Seq2SeqModel(direction, vocab.size(), vocab.digest(), config) {}

Seq2SeqModel::Seq2SeqModel(Direction direction, std::size_t vocab_size, std::uint64_t vocab_digest,
                           const Seq2SeqConfig& config)
    : direction_(direction), vocab_digest_(vocab_digest), config_(config) {
  net_.prefix = "s2s";
  net_.vocab_size = vocab_size;
  net_.embed_dim = config.embed_dim;
  net_.hidden_dim = config.hidden_dim;
  net_.has_encoder = direction != Direction::kLanguageModel;
  std::mt19937_64 rng(config.train.seed);
  net_.init(params_, rng, config.train.init_scale);
}

Var Seq2SeqModel::loss(Graph& g, const SentenceIds* source, const SentenceIds& target) const {
  if ((direction_ == Direction::kLanguageModel) != (source == nullptr)) {
    throw Error(direction_ == Direction::kLanguageModel
                    ? "language model takes no source sentence"
                    : "conditional model needs a source sentence");
  }
  check_vocab(*this, target);
  if (source) check_vocab(*this, *source);
  auto b = net_.bind(g);
  return net_.target_nll(g, b, source, target, std::nullopt);
}

LogProb Seq2SeqModel::log_prob(const SentenceIds* source, const SentenceIds& target) const {
  Graph g(params_);
  return {-g.scalar(loss(g, source, target)), target.ids.size()};
}

LogProb Seq2SeqModel::log_prob(std::span<const SentenceIds> context, const SentenceIds& target) const {
  if (direction_ == Direction::kLanguageModel) {
    if (!context.empty()) throw Error("language model takes an empty context");
    return log_prob(nullptr, target);
  }
  if (context.empty()) throw Error("conditional model needs a context sentence");
  return log_prob(&context.back(), target);
}

std::vector<Hypothesis> Seq2SeqModel::beam_decode(const SentenceIds* source,
                                                  const BeamConfig& config) const {
  if ((direction_ == Direction::kLanguageModel) != (source == nullptr)) {
    throw Error("source/direction mismatch in beam_decode");
  }
  if (source) check_vocab(*this, *source);
  Graph g(params_);
  auto b = net_.bind(g);
  return net_.beam_search(g, b, source, std::nullopt, config);
}

std::vector<Hypothesis> Seq2SeqModel::beam_decode(std::span<const SentenceIds> context,
                                                  const BeamConfig& config) const {
  if (direction_ == Direction::kLanguageModel) return beam_decode(nullptr, config);
  if (context.empty()) throw Error("conditional model needs a context sentence");
  return beam_decode(&context.back(), config);
}

Checkpoint Seq2SeqModel::to_checkpoint() const {
  Checkpoint ck;
  ck.metadata["kind"] = std::string(checkpoint_kind(direction_));
  ck.metadata["direction"] = std::string(direction_name(direction_));
  ck.metadata["vocab_size"] = std::to_string(net_.vocab_size);
  ck.metadata["vocab_digest"] = std::to_string(vocab_digest_);
  ck.metadata["embed_dim"] = std::to_string(net_.embed_dim);
  ck.metadata["hidden_dim"] = std::to_string(net_.hidden_dim);
  const TrainConfig& t = config_.train;
  char real[64];
  ck.metadata["epochs"] = std::to_string(t.epochs);
  ck.metadata["batch_size"] = std::to_string(t.batch_size);
  std::snprintf(real, sizeof real, "%.17g", t.learning_rate);
  ck.metadata["learning_rate"] = real;
  std::snprintf(real, sizeof real, "%.17g", t.clip);
  ck.metadata["clip"] = real;
  std::snprintf(real, sizeof real, "%.17g", t.init_scale);
  ck.metadata["init_scale"] = real;
  ck.metadata["seed"] = std::to_string(t.seed);
  std::string cfg;
  for (const auto& [key, value] : ck.metadata) cfg += key + "=" + value + ";";
  ck.metadata["config_digest"] = std::to_string(fnv1a(cfg));
  store_params(ck, params_);
  return ck;
}

Seq2SeqModel Seq2SeqModel::from_checkpoint(const Checkpoint& ck) {
  const Direction direction = parse_direction(ck.meta("direction"));
  ck.require_kind(checkpoint_kind(direction));
  Seq2SeqConfig config;
  config.embed_dim = ck.meta_size("embed_dim");
  config.hidden_dim = ck.meta_size("hidden_dim");
  config.train.epochs = ck.meta_size("epochs");
  config.train.batch_size = ck.meta_size("batch_size");
  config.train.learning_rate = ck.meta_double("learning_rate");
  config.train.clip = ck.meta_double("clip");
  config.train.init_scale = ck.meta_double("init_scale");
  config.train.seed = std::stoull(ck.meta("seed"));
  Seq2SeqModel model(direction, ck.meta_size("vocab_size"), std::stoull(ck.meta("vocab_digest")),
                     config);
  load_params(ck, model.params_);
  return model;
}

std::vector<TrainingPair> make_pairs(std::span<const text::EncodedParagraph> paragraphs,
                                     Direction direction) {
  std::vector<TrainingPair> pairs;
  for (const auto& p : paragraphs) {
    if (direction == Direction::kLanguageModel) {
      for (const auto& s : p) pairs.push_back({std::nullopt, s});
      continue;
    }
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
      if (direction == Direction::kForward) {
        pairs.push_back({p[i], p[i + 1]});
      } else {
        pairs.push_back({p[i + 1], p[i]});
      }
    }
  }
  return pairs;
}

TrainReport train(Seq2SeqModel& model, std::span<const TrainingPair> pairs) {
  if (pairs.empty()) throw Error("seq2seq training set is empty");
  const TrainConfig& tc = model.config().train;
  std::mt19937_64 rng(tc.seed + 1);
  TrainReport report;
  const ExampleBuilder build = [&](Graph& g, std::size_t i) {
    const auto& p = pairs[i];
    return ExampleLoss{model.loss(g, p.source ? &*p.source : nullptr, p.target),
                       static_cast<double>(p.target.ids.size())};
  };
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const double loss = run_epoch(model.params(), pairs.size(), build, tc, rng);
    report.epoch_loss.push_back(loss);
    if (tc.on_epoch) tc.on_epoch(epoch, loss);
  }
  return report;
}

Seq2SeqModel train_seq2seq(std::span<const TrainingPair> pairs, Direction direction,
                           const text::Vocab& vocab, const Seq2SeqConfig& config,
                           TrainReport* report) {
  Seq2SeqModel model(direction, vocab, config);
  TrainReport r = train(model, pairs);
  if (report) *report = std::move(r);
  return model;
}

double mean_token_nll(const Seq2SeqModel& model, std::span<const TrainingPair> pairs) {
  double nll = 0.0;
  double tokens = 0.0;
  for (const auto& p : pairs) {
    LogProb lp = model.log_prob(p.source ? &*p.source : nullptr, p.target);
    nll -= lp.total;
    tokens += static_cast<double>(lp.tokens);
  }
  return tokens > 0 ? nll / tokens : 0.0;
}

}  // namespace coherence::seq2seq
