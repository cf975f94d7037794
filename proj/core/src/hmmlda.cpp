#include "coherence/hmmlda.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "coherence/error.hpp"
#include "coherence/trainer.hpp"

namespace coherence::hmmlda {

using text::SentenceIds;
using text::TokenId;

bool is_topic_word(TokenId id) { return id != text::kEos && id != text::kPad; }

double TopicState::transition_prob(std::size_t from, std::size_t to) const {
  return (static_cast<double>(transition[from * topics + to]) + alpha) /
         (static_cast<double>(transition_out[from]) + static_cast<double>(topics) * alpha);
}

double TopicState::initial_prob(std::size_t k) const {
  const double total = static_cast<double>(std::accumulate(initial.begin(), initial.end(), std::int64_t{0}));
  return (static_cast<double>(initial[k]) + alpha) / (total + static_cast<double>(topics) * alpha);
}

double TopicState::word_prob(std::size_t k, TokenId w) const {
  return (static_cast<double>(topic_word[k * vocab_size + w]) + beta) /
         (static_cast<double>(topic_total[k]) + static_cast<double>(vocab_size) * beta);
}

namespace {

void check_corpus(std::span<const text::EncodedParagraph> corpus, std::size_t vocab_size) {
  for (const auto& p : corpus) {
    for (const auto& s : p) {
      for (TokenId id : s.ids) {
        if (id >= vocab_size) {
          throw Error("token id " + std::to_string(id) + " outside vocabulary of size " +
                      std::to_string(vocab_size));
        }
      }
    }
  }
}

// Adds `delta` to every count touched by sentence n taking topic k.
void apply(TopicState& st, const text::EncodedParagraph& para, const std::vector<int>& z,
           std::size_t n, int delta, bool emissions, bool incoming, bool outgoing) {
  const std::size_t T = st.topics;
  const auto k = static_cast<std::size_t>(z[n]);
  if (emissions) {
    for (TokenId w : para[n].ids) {
      if (!is_topic_word(w)) continue;
      st.topic_word[k * st.vocab_size + w] += delta;
      st.topic_total[k] += delta;
    }
  }
  if (incoming) {
    if (n == 0) {
      st.initial[k] += delta;
    } else {
      const auto prev = static_cast<std::size_t>(z[n - 1]);
      st.transition[prev * T + k] += delta;
      st.transition_out[prev] += delta;
    }
  }
  if (outgoing && n + 1 < para.size()) {
    const auto next = static_cast<std::size_t>(z[n + 1]);
    st.transition[k * T + next] += delta;
    st.transition_out[k] += delta;
  }
}

std::vector<double> normalize_log(std::vector<double> logw) {
  const double mx = *std::max_element(logw.begin(), logw.end());
  double z = 0.0;
  for (double& v : logw) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : logw) v /= z;
  return logw;
}

void recount_final(TopicState& st) {
  std::fill(st.final.begin(), st.final.end(), 0);
  for (const auto& z : st.assignments) {
    if (!z.empty()) ++st.final[static_cast<std::size_t>(z.back())];
  }
}

double sentence_loglik(const TopicState& st, std::size_t k, const SentenceIds& s) {
  double ll = 0.0;
  for (TokenId w : s.ids) {
    if (is_topic_word(w)) ll += std::log(st.word_prob(k, w));
  }
  return ll;
}

void check_state_ids(const TopicState& st, const SentenceIds& s) {
  for (TokenId id : s.ids) {
    if (id >= st.vocab_size) throw Error("token id outside topic model vocabulary");
  }
}

}  // namespace

TopicState fit_hmm_lda(std::span<const text::EncodedParagraph> corpus, std::size_t vocab_size,
                       const HmmLdaConfig& config) {
  if (config.topics == 0) throw Error("topic count must be positive");
  if (corpus.empty()) throw Error("topic model training corpus is empty");
  if (!(config.alpha > 0.0) || !(config.beta > 0.0)) throw Error("Dirichlet priors must be positive");
  check_corpus(corpus, vocab_size);
  const std::size_t T = config.topics;

  TopicState st;
  st.topics = T;
  st.vocab_size = vocab_size;
  st.alpha = config.alpha;
  st.beta = config.beta;
  st.transition.assign(T * T, 0);
  st.transition_out.assign(T, 0);
  st.initial.assign(T, 0);
  st.topic_word.assign(T * vocab_size, 0);
  st.topic_total.assign(T, 0);
  st.final.assign(T, 0);

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(T) - 1);
  st.assignments.resize(corpus.size());
  for (std::size_t p = 0; p < corpus.size(); ++p) {
    auto& z = st.assignments[p];
    z.resize(corpus[p].size());
    for (auto& k : z) k = pick(rng);
    for (std::size_t n = 0; n < z.size(); ++n) apply(st, corpus[p], z, n, +1, true, true, false);
  }
  recount_final(st);

  const double Ta = static_cast<double>(T) * st.alpha;
  const double Vb = static_cast<double>(vocab_size) * st.beta;
  std::vector<double> logw(T);
  std::vector<std::pair<TokenId, int>> words;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (std::size_t sweep = 0; sweep < config.sweeps; ++sweep) {
    for (std::size_t p = 0; p < corpus.size(); ++p) {
      const auto& para = corpus[p];
      auto& z = st.assignments[p];
      for (std::size_t n = 0; n < para.size(); ++n) {
        apply(st, para, z, n, -1, true, true, true);
        const bool has_prev = n > 0;
        const bool has_next = n + 1 < para.size();
        const std::size_t prev = has_prev ? static_cast<std::size_t>(z[n - 1]) : 0;
        const std::size_t next = has_next ? static_cast<std::size_t>(z[n + 1]) : 0;

        // Per-type counts within the sentence, for the sequential Polya term.
        words.clear();
        for (TokenId w : para[n].ids) {
          if (!is_topic_word(w)) continue;
          auto it = std::find_if(words.begin(), words.end(), [w](const auto& e) { return e.first == w; });
          if (it == words.end()) {
            words.emplace_back(w, 1);
          } else {
            ++it->second;
          }
        }
        int total_words = 0;
        for (const auto& e : words) total_words += e.second;

        for (std::size_t k = 0; k < T; ++k) {
          double lw = has_prev ? std::log(static_cast<double>(st.transition[prev * T + k]) + st.alpha)
                               : std::log(static_cast<double>(st.initial[k]) + st.alpha);
          if (has_next) {
            const double same_in = (has_prev && prev == k) ? 1.0 : 0.0;
            const double same_out = (has_prev && prev == k && k == next) ? 1.0 : 0.0;
            lw += std::log(static_cast<double>(st.transition[k * T + next]) + st.alpha + same_out) -
                  std::log(static_cast<double>(st.transition_out[k]) + Ta + same_in);
          }
          for (const auto& [w, c] : words) {
            const double base = static_cast<double>(st.topic_word[k * vocab_size + w]) + st.beta;
            for (int j = 0; j < c; ++j) lw += std::log(base + j);
          }
          const double tot = static_cast<double>(st.topic_total[k]) + Vb;
          for (int j = 0; j < total_words; ++j) lw -= std::log(tot + j);
          logw[k] = lw;
        }
        const auto probs = normalize_log(logw);
        double u = unit(rng);
        std::size_t chosen = T - 1;
        for (std::size_t k = 0; k < T; ++k) {
          u -= probs[k];
          if (u < 0.0) {
            chosen = k;
            break;
          }
        }
        z[n] = static_cast<int>(chosen);
        apply(st, para, z, n, +1, true, true, true);
      }
    }
    recount_final(st);
    if (config.on_sweep) config.on_sweep(sweep, st);
  }
  return st;
}

void check_consistency(const TopicState& st, std::span<const text::EncodedParagraph> corpus) {
  const std::size_t T = st.topics;
  if (st.assignments.size() != corpus.size()) throw Error("assignment table does not match corpus");
  TopicState fresh = st;
  std::fill(fresh.transition.begin(), fresh.transition.end(), 0);
  std::fill(fresh.transition_out.begin(), fresh.transition_out.end(), 0);
  std::fill(fresh.initial.begin(), fresh.initial.end(), 0);
  std::fill(fresh.topic_word.begin(), fresh.topic_word.end(), 0);
  std::fill(fresh.topic_total.begin(), fresh.topic_total.end(), 0);
  recount_final(fresh);
  for (std::size_t p = 0; p < corpus.size(); ++p) {
    const auto& z = st.assignments[p];
    if (z.size() != corpus[p].size()) throw Error("assignment count differs from sentence count");
    for (int k : z) {
      if (k < 0 || static_cast<std::size_t>(k) >= T) throw Error("topic assignment out of range");
    }
    for (std::size_t n = 0; n < z.size(); ++n) apply(fresh, corpus[p], z, n, +1, true, true, false);
  }
  auto same = [](const auto& a, const auto& b, const char* what) {
    if (a != b) throw Error(std::string(what) + " counts disagree with assignments");
  };
  same(fresh.transition, st.transition, "transition");
  same(fresh.transition_out, st.transition_out, "transition row-sum");
  same(fresh.initial, st.initial, "initial");
  same(fresh.final, st.final, "final");
  same(fresh.topic_word, st.topic_word, "topic-word");
  same(fresh.topic_total, st.topic_total, "topic-total");
  for (std::size_t k = 0; k < T; ++k) {
    std::int64_t row = 0;
    for (std::size_t j = 0; j < T; ++j) row += st.transition[k * T + j];
    if (row != st.transition_out[k]) throw Error("transition row sums are stale");
  }
}

TopicState reversed(const TopicState& st) {
  const std::size_t T = st.topics;
  TopicState r = st;
  std::swap(r.initial, r.final);
  std::fill(r.transition_out.begin(), r.transition_out.end(), 0);
  for (auto& z : r.assignments) std::reverse(z.begin(), z.end());
  for (std::size_t i = 0; i < T; ++i) {
    for (std::size_t j = 0; j < T; ++j) {
      r.transition[j * T + i] = st.transition[i * T + j];
      r.transition_out[j] += st.transition[i * T + j];
    }
  }
  return r;
}

std::vector<double> infer_topic_dist(const TopicState& st, const SentenceIds& sentence,
                                     std::span<const double> prev_dist) {
  if (prev_dist.size() != st.topics) throw ShapeError("topic distribution has the wrong length");
  check_state_ids(st, sentence);
  const auto prior = predict_next(st, prev_dist);
  std::vector<double> logw(st.topics);
  for (std::size_t k = 0; k < st.topics; ++k) {
    logw[k] = std::log(prior[k]) + sentence_loglik(st, k, sentence);
  }
  return normalize_log(std::move(logw));
}

std::vector<double> infer_first(const TopicState& st, const SentenceIds& sentence) {
  check_state_ids(st, sentence);
  std::vector<double> logw(st.topics);
  for (std::size_t k = 0; k < st.topics; ++k) {
    logw[k] = std::log(st.initial_prob(k)) + sentence_loglik(st, k, sentence);
  }
  return normalize_log(std::move(logw));
}

std::vector<double> predict_next(const TopicState& st, std::span<const double> dist) {
  if (dist.size() != st.topics) throw ShapeError("topic distribution has the wrong length");
  std::vector<double> out(st.topics, 0.0);
  for (std::size_t j = 0; j < st.topics; ++j) {
    if (dist[j] == 0.0) continue;
    for (std::size_t k = 0; k < st.topics; ++k) out[k] += dist[j] * st.transition_prob(j, k);
  }
  return out;
}

std::vector<double> topic_vector(const TopicState& st, std::span<const SentenceIds> context) {
  if (context.empty()) {
    std::vector<double> out(st.topics);
    for (std::size_t k = 0; k < st.topics; ++k) out[k] = st.initial_prob(k);
    return out;
  }
  auto dist = infer_first(st, context.front());
  for (std::size_t i = 1; i < context.size(); ++i) dist = infer_topic_dist(st, context[i], dist);
  return predict_next(st, dist);
}

std::vector<text::EncodedParagraph> reverse_paragraphs(std::span<const text::EncodedParagraph> paragraphs) {
  std::vector<text::EncodedParagraph> out(paragraphs.begin(), paragraphs.end());
  for (auto& p : out) std::reverse(p.begin(), p.end());
  return out;
}

void store_topics(Checkpoint& ck, const TopicState& st) {
  ck.metadata["topics"] = std::to_string(st.topics);
  ck.metadata["topic_vocab_size"] = std::to_string(st.vocab_size);
  std::ostringstream prior;
  prior.precision(17);
  prior << st.alpha;
  ck.metadata["alpha"] = prior.str();
  prior.str("");
  prior << st.beta;
  ck.metadata["beta"] = prior.str();
  const std::size_t T = st.topics;
  ck.int_tensors["hmmlda.counts.transition"] = IntTensor{Shape{T, T}, st.transition};
  ck.int_tensors["hmmlda.counts.initial"] = IntTensor{Shape{T}, st.initial};
  ck.int_tensors["hmmlda.counts.final"] = IntTensor{Shape{T}, st.final};
  ck.int_tensors["hmmlda.counts.topic_word"] = IntTensor{Shape{T, st.vocab_size}, st.topic_word};
}

TopicState load_topics(const Checkpoint& ck) {
  TopicState st;
  st.topics = ck.meta_size("topics");
  st.vocab_size = ck.meta_size("topic_vocab_size");
  st.alpha = ck.meta_double("alpha");
  st.beta = ck.meta_double("beta");
  auto ints = [&](const std::string& name, std::size_t expected) {
    auto it = ck.int_tensors.find(name);
    if (it == ck.int_tensors.end()) throw FormatError("checkpoint missing tensor '" + name + "'");
    if (it->second.data.size() != expected) throw FormatError("tensor '" + name + "' has the wrong size");
    return it->second.data;
  };
  const std::size_t T = st.topics;
  st.transition = ints("hmmlda.counts.transition", T * T);
  st.initial = ints("hmmlda.counts.initial", T);
  st.final = ints("hmmlda.counts.final", T);
  st.topic_word = ints("hmmlda.counts.topic_word", T * st.vocab_size);
  st.transition_out.assign(T, 0);
  st.topic_total.assign(T, 0);
  for (std::size_t i = 0; i < T; ++i) {
    for (std::size_t j = 0; j < T; ++j) st.transition_out[i] += st.transition[i * T + j];
    for (std::size_t w = 0; w < st.vocab_size; ++w) st.topic_total[i] += st.topic_word[i * st.vocab_size + w];
  }
  return st;
}

Checkpoint topic_checkpoint(const TopicState& st, std::uint64_t vocab_digest) {
  Checkpoint ck;
  ck.metadata["kind"] = "hmmlda";
  ck.metadata["vocab_size"] = std::to_string(st.vocab_size);
  ck.metadata["vocab_digest"] = std::to_string(vocab_digest);
  store_topics(ck, st);
  return ck;
}

HmmLdaGmModel::HmmLdaGmModel(Direction direction, TopicState topics, std::size_t vocab_size,
                             std::uint64_t vocab_digest, const GmConfig& config)
    : direction_(direction), vocab_digest_(vocab_digest), config_(config), topics_(std::move(topics)) {
  if (direction == Direction::kLanguageModel) throw Error("HMM-LDA-GM needs a source sentence");
  if (topics_.vocab_size != vocab_size) throw Error("vocabulary mismatch between topic model and network");
  net_.prefix = "hmmlda";
  net_.vocab_size = vocab_size;
  net_.embed_dim = config.embed_dim;
  net_.hidden_dim = config.hidden_dim;
  net_.latent_dim = config.topic_dim;
  net_.has_encoder = true;
  std::mt19937_64 rng(config.train.seed);
  net_.init(params_, rng, config.train.init_scale);
  params_.add_uniform(topic_matrix_name(), Shape{topics_.topics, config.topic_dim},
                      config.train.init_scale, rng);
}

Var HmmLdaGmModel::loss(Graph& g, const SentenceIds& source, const SentenceIds& target,
                        std::span<const double> topic_dist) const {
  check_vocab(*this, source);
  check_vocab(*this, target);
  if (topic_dist.size() != topics_.topics) throw ShapeError("topic vector has the wrong length");
  auto b = net_.bind(g);
  const Var z = g.vecmat(g.constant_vector(topic_dist), g.param(topic_matrix_name()));
  return net_.target_nll(g, b, &source, target, z);
}

LogProb HmmLdaGmModel::log_prob(std::span<const SentenceIds> context, const SentenceIds& target) const {
  if (context.empty()) throw Error("conditional model needs a context sentence");
  const auto t = topic_vector(topics_, context);
  Graph g(params_);
  return {-g.scalar(loss(g, context.back(), target, t)), target.ids.size()};
}

std::vector<Hypothesis> HmmLdaGmModel::beam_decode(std::span<const SentenceIds> context,
                                                   const BeamConfig& config) const {
  if (context.empty()) throw Error("conditional model needs a context sentence");
  check_vocab(*this, context.back());
  const auto t = topic_vector(topics_, context);
  Graph g(params_);
  auto b = net_.bind(g);
  const Var z = g.vecmat(g.constant_vector(t), g.param(topic_matrix_name()));
  return net_.beam_search(g, b, &context.back(), z, config);
}

Checkpoint HmmLdaGmModel::to_checkpoint() const {
  Checkpoint ck;
  ck.metadata["kind"] = direction_ == Direction::kForward ? "hmmlda-fwd" : "hmmlda-bwd";
  ck.metadata["direction"] = std::string(direction_name(direction_));
  ck.metadata["vocab_size"] = std::to_string(net_.vocab_size);
  ck.metadata["vocab_digest"] = std::to_string(vocab_digest_);
  ck.metadata["embed_dim"] = std::to_string(config_.embed_dim);
  ck.metadata["hidden_dim"] = std::to_string(config_.hidden_dim);
  ck.metadata["topic_dim"] = std::to_string(config_.topic_dim);
  store_topics(ck, topics_);
  store_params(ck, params_);
  return ck;
}

HmmLdaGmModel HmmLdaGmModel::from_checkpoint(const Checkpoint& ck) {
  const Direction direction = parse_direction(ck.meta("direction"));
  ck.require_kind(direction == Direction::kForward ? "hmmlda-fwd" : "hmmlda-bwd");
  TopicState st = load_topics(ck);
  GmConfig config;
  config.embed_dim = ck.meta_size("embed_dim");
  config.hidden_dim = ck.meta_size("hidden_dim");
  config.topic_dim = ck.meta_size("topic_dim");
  HmmLdaGmModel model(direction, std::move(st), ck.meta_size("vocab_size"),
                      std::stoull(ck.meta("vocab_digest")), config);
  load_params(ck, model.params_);
  return model;
}

std::vector<GmExample> make_gm_examples(const TopicState& topics,
                                        std::span<const text::EncodedParagraph> paragraphs,
                                        Direction direction) {
  if (direction == Direction::kLanguageModel) throw Error("HMM-LDA-GM needs a source sentence");
  std::vector<text::EncodedParagraph> view(paragraphs.begin(), paragraphs.end());
  if (direction == Direction::kBackward) view = reverse_paragraphs(paragraphs);
  std::vector<GmExample> out;
  for (const auto& p : view) {
    if (p.size() < 2) continue;
    auto dist = infer_first(topics, p.front());
    for (std::size_t n = 1; n < p.size(); ++n) {
      out.push_back({p[n - 1], p[n], predict_next(topics, dist)});
      dist = infer_topic_dist(topics, p[n], dist);
    }
  }
  return out;
}

seq2seq::TrainReport train(HmmLdaGmModel& model, std::span<const GmExample> examples) {
  if (examples.empty()) throw Error("HMM-LDA-GM training set is empty");
  const TrainConfig& tc = model.config().train;
  std::mt19937_64 rng(tc.seed + 1);
  seq2seq::TrainReport report;
  const ExampleBuilder build = [&](Graph& g, std::size_t i) {
    const auto& e = examples[i];
    return ExampleLoss{model.loss(g, e.source, e.target, e.topic_dist),
                       static_cast<double>(e.target.ids.size())};
  };
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const double loss = run_epoch(model.params(), examples.size(), build, tc, rng);
    report.epoch_loss.push_back(loss);
    if (tc.on_epoch) tc.on_epoch(epoch, loss);
  }
  return report;
}

double mean_token_nll(const HmmLdaGmModel& model, std::span<const GmExample> examples) {
  double nll = 0.0, tokens = 0.0;
  for (const auto& e : examples) {
    Graph g(model.params());
    nll += g.scalar(model.loss(g, e.source, e.target, e.topic_dist));
    tokens += static_cast<double>(e.target.ids.size());
  }
  return tokens > 0 ? nll / tokens : 0.0;
}

}  // namespace coherence::hmmlda
