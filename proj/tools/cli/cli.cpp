#include "cli/cli.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <numeric>
#include <optional>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli/config.hpp"
#include "cli/gradient_suite.hpp"
#include "coherence/adversary.hpp"
#include "coherence/checkpoint.hpp"
#include "coherence/discrim.hpp"
#include "coherence/error.hpp"
#include "coherence/eval.hpp"
#include "coherence/hmmlda.hpp"
#include "coherence/scorers.hpp"
#include "coherence/seq2seq.hpp"
#include "coherence/synth.hpp"
#include "coherence/vlv.hpp"

namespace coherence::cli {
namespace {

namespace fs = std::filesystem;
using text::EncodedParagraph;
using text::SentenceIds;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void report(std::ostream& out, const std::string& id, const std::string& metric, const std::string& value) {
  out << id << '\t' << metric << '\t' << value << '\n';
}

void report(std::ostream& out, const std::string& id, const std::string& metric, double value) {
  report(out, id, metric, fmt(value));
}

void summary_block(std::ostream& out, const std::string& metric, const std::vector<double>& values) {
  const double mean =
      values.empty() ? 0.0 : std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  nlohmann::json j;
  j["metric"] = metric;
  j["mean"] = mean;
  j["count"] = values.size();
  j["values"] = values;
  out << j.dump() << '\n';
}

// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::map<std::string, std::string> flags;
  std::map<std::string, std::vector<CLI::Option*>> options;  // one per subcommand

  Config resolve() const {
    Config c;
    if (!config_path.empty()) c.load_file(config_path);
    for (const auto& [key, opts] : options) {
      for (const auto* opt : opts) {
        if (opt->count() > 0) c.set(key, flags.at(key));
      }
    }
    return c;
  }
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--config", common.config_path, "key=value config file");
  for (const auto& [key, value] : Config::defaults()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    common.flags[key];
    common.options[key].push_back(
        sub->add_option(flag, common.flags[key], "config key " + key + " (default " + value + ")"));
  }
}

struct Dataset {
  text::Vocab vocab;
  std::vector<EncodedParagraph> paragraphs;
};

struct DataArgs {
  std::string data;
  std::string corpus;
  std::string vocab;
};

void add_data(CLI::App* sub, DataArgs& d) {
  sub->add_option("--data", d.data, "directory written by ingest");
  sub->add_option("--corpus", d.corpus, "corpus text file");
  sub->add_option("--vocab", d.vocab, "vocabulary file");
}

Checkpoint encoded_corpus_checkpoint(const std::vector<EncodedParagraph>& paragraphs, const text::Vocab& vocab) {
  Checkpoint ck;
  ck.metadata["kind"] = "corpus";
  ck.metadata["vocab_size"] = std::to_string(vocab.size());
  ck.metadata["vocab_digest"] = std::to_string(vocab.digest());
  std::vector<std::int64_t> tokens, lengths, sizes;
  for (const auto& p : paragraphs) {
    sizes.push_back(static_cast<std::int64_t>(p.size()));
    for (const auto& s : p) {
      lengths.push_back(static_cast<std::int64_t>(s.ids.size()));
      for (auto id : s.ids) tokens.push_back(id);
    }
  }
  ck.int_tensors["corpus.tokens"] = IntTensor{Shape{tokens.size()}, tokens};
  ck.int_tensors["corpus.sentence_lengths"] = IntTensor{Shape{lengths.size()}, lengths};
  ck.int_tensors["corpus.paragraph_sizes"] = IntTensor{Shape{sizes.size()}, sizes};
  return ck;
}

std::vector<EncodedParagraph> decode_corpus_checkpoint(const Checkpoint& ck, const text::Vocab& vocab) {
  ck.require_kind("corpus");
  if (std::stoull(ck.meta("vocab_digest")) != vocab.digest()) {
    throw Error("vocabulary mismatch between corpus and vocab file");
  }
  auto get = [&](const char* name) -> const std::vector<std::int64_t>& {
    auto it = ck.int_tensors.find(name);
    if (it == ck.int_tensors.end()) throw FormatError(std::string("corpus missing tensor '") + name + "'");
    return it->second.data;
  };
  const auto& tokens = get("corpus.tokens");
  const auto& lengths = get("corpus.sentence_lengths");
  const auto& sizes = get("corpus.paragraph_sizes");
  std::vector<EncodedParagraph> out;
  std::size_t t = 0, s = 0;
  for (auto n : sizes) {
    EncodedParagraph p;
    for (std::int64_t k = 0; k < n; ++k) {
      if (s >= lengths.size()) throw FormatError("corpus sentence table is truncated");
      SentenceIds sent;
      for (std::int64_t j = 0; j < lengths[s]; ++j) {
        if (t >= tokens.size()) throw FormatError("corpus token table is truncated");
        const auto id = tokens[t++];
        if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) throw FormatError("corpus token id out of range");
        sent.ids.push_back(static_cast<text::TokenId>(id));
      }
      ++s;
      p.push_back(std::move(sent));
    }
    out.push_back(std::move(p));
  }
  return out;
}

Dataset load_dataset(const DataArgs& d) {
  Dataset ds;
  if (!d.data.empty()) {
    ds.vocab = text::Vocab::load(fs::path(d.data) / "vocab.txt");
    ds.paragraphs = decode_corpus_checkpoint(load_checkpoint(fs::path(d.data) / "corpus.bin"), ds.vocab);
    return ds;
  }
  if (d.corpus.empty() || d.vocab.empty()) throw Error("pass --data, or both --corpus and --vocab");
  ds.vocab = text::Vocab::load(d.vocab);
  ds.paragraphs = text::encode_corpus(ds.vocab, text::load_corpus(d.corpus));
  return ds;
}

void require_vocab(std::uint64_t digest, std::size_t size, const text::Vocab& vocab, const std::string& what) {
  if (digest != vocab.digest() || size != vocab.size()) throw Error("vocabulary mismatch: " + what);
}

std::string generative_kind(const std::string& backend, Direction d) {
  if (d == Direction::kLanguageModel) return "lm";
  const std::string suffix = d == Direction::kForward ? "-fwd" : "-bwd";
  if (backend == "s2s" || backend == "hmmlda" || backend == "vlv") return backend + suffix;
  throw Error("unknown backend '" + backend + "'");
}

std::unique_ptr<ConditionalModel> load_generative(const std::string& path, const std::string& backend, Direction d) {
  const Checkpoint ck = load_checkpoint(path);
  const std::string kind = generative_kind(backend, d);
  ck.require_kind(kind);
  if (kind == "lm" || backend == "s2s") return std::make_unique<seq2seq::Seq2SeqModel>(seq2seq::Seq2SeqModel::from_checkpoint(ck));
  if (backend == "hmmlda") return std::make_unique<hmmlda::HmmLdaGmModel>(hmmlda::HmmLdaGmModel::from_checkpoint(ck));
  return std::make_unique<vlv::VlvModel>(vlv::VlvModel::from_checkpoint(ck));
}

// Class index of an ordered-corpus sentence, read from its first token "c<k>w<j>".
std::optional<std::size_t> ordered_class(const text::Vocab& vocab, const SentenceIds& s) {
  if (s.ids.empty()) return std::nullopt;
  const std::string& tok = vocab.token(s.ids.front());
  if (tok.size() < 4 || tok[0] != 'c') return std::nullopt;
  const auto w = tok.find('w');
  if (w == std::string::npos || w == 1) return std::nullopt;
  try {
    return std::stoul(tok.substr(1, w - 1));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

struct ScorerArgs {
  std::string mode = "uni";
  std::string backend = "s2s";
  std::string forward, backward, lm, discrim, embeddings;
};

void add_scorer(CLI::App* sub, ScorerArgs& s, bool document_modes) {
  auto* mode = sub->add_option("--mode", s.mode, "scorer mode");
  if (document_modes) {
    mode->check(CLI::IsMember({"uni", "bi", "mmi", "discrim", "cosine", "oracle"}));
  } else {
    mode->check(CLI::IsMember({"uni", "bi", "mmi", "oracle"}));
  }
  sub->add_option("--backend", s.backend, "generative backend")->check(CLI::IsMember({"s2s", "hmmlda", "vlv"}));
  sub->add_option("--forward", s.forward, "forward model checkpoint");
  sub->add_option("--backward", s.backward, "backward model checkpoint");
  sub->add_option("--lm", s.lm, "language model checkpoint");
  if (document_modes) {
    sub->add_option("--discrim", s.discrim, "discriminative model checkpoint");
    sub->add_option("--embeddings", s.embeddings, "word vectors for cosine mode");
  }
}

// Loaded models for one scoring run.
struct Scorer {
  std::string mode;
  std::string backend;
  std::unique_ptr<ConditionalModel> forward, backward, lm;
  std::optional<discrim::DiscrimModel> discrim;
  text::EmbeddingTable embeddings;
  const text::Vocab* vocab = nullptr;
  std::size_t classes = 24;

  scorers::Models models() const { return {forward.get(), backward.get(), lm.get()}; }
  bool generative() const { return mode == "uni" || mode == "bi" || mode == "mmi"; }
};

Scorer make_scorer(const ScorerArgs& a, const text::Vocab& vocab, const Config& config) {
  Scorer s;
  s.mode = a.mode;
  s.backend = a.backend;
  s.vocab = &vocab;
  s.classes = config.size("classes");
  if (s.generative()) {
    const auto mode = scorers::parse_mode(a.mode);
    if (a.forward.empty()) throw Error("--forward is required for mode " + a.mode);
    s.forward = load_generative(a.forward, a.backend, Direction::kForward);
    if (mode != scorers::Mode::kUni) {
      if (a.backward.empty()) throw Error("--backward is required for mode " + a.mode);
      s.backward = load_generative(a.backward, a.backend, Direction::kBackward);
    }
    if (mode == scorers::Mode::kMmi) {
      if (a.lm.empty()) throw Error("--lm is required for mode mmi");
      s.lm = load_generative(a.lm, "s2s", Direction::kLanguageModel);
    }
    scorers::validate(mode, s.models());
    require_vocab(s.forward->vocab_digest(), s.forward->vocab_size(), vocab, "model and data");
  } else if (a.mode == "discrim") {
    if (a.discrim.empty()) throw Error("--discrim is required for mode discrim");
    s.discrim = discrim::DiscrimModel::from_checkpoint(load_checkpoint(a.discrim));
    require_vocab(s.discrim->vocab_digest(), s.discrim->vocab_size(), vocab, "model and data");
  } else if (a.mode == "cosine") {
    if (a.embeddings.empty()) throw Error("--embeddings is required for mode cosine");
    s.embeddings = text::load_embeddings(a.embeddings);
  }
  return s;
}

double oracle_pair(const Scorer& s, const SentenceIds& prev, const SentenceIds& next) {
  const auto a = ordered_class(*s.vocab, prev);
  const auto b = ordered_class(*s.vocab, next);
  if (!a || !b) throw Error("oracle mode needs ordered-corpus tokens of the form c<k>w<j>");
  return (*a + 1) % s.classes == *b ? 1.0 : 0.0;
}

double score_document(const Scorer& s, std::span<const SentenceIds> p) {
  if (s.generative()) return scorers::score_document(scorers::parse_mode(s.mode), s.models(), p);
  if (s.mode == "discrim") return discrim::score_document_discrim(*s.discrim, p);
  if (s.mode == "cosine") {
    std::vector<std::string> raw;
    for (const auto& sent : p) raw.push_back(text::to_string(*s.vocab, sent));
    return eval::cosine_coherence(s.embeddings, raw);
  }
  if (p.size() < 2) throw Error("document scoring needs at least 2 sentences");
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) total += oracle_pair(s, p[i], p[i + 1]);
  return total / static_cast<double>(p.size() - 1);
}

std::vector<std::string> reversed_args(const std::vector<std::string>& args) {
  return {args.rbegin(), args.rend()};
}

// ---------------------------------------------------------------- commands

void cmd_ingest(const Config& c, const std::string& corpus_path, const std::string& out_dir, std::ostream& out) {
  const text::Corpus corpus = text::load_corpus(corpus_path);
  const text::Vocab vocab = text::build_vocab(corpus, c.size("vocab_size"), c.size("min_count"));
  const auto encoded = text::encode_corpus(vocab, corpus);
  fs::create_directories(out_dir);
  vocab.save(fs::path(out_dir) / "vocab.txt");
  save_checkpoint(encoded_corpus_checkpoint(encoded, vocab), fs::path(out_dir) / "corpus.bin");
  std::size_t tokens = 0;
  for (const auto& p : encoded) {
    for (const auto& s : p) tokens += s.ids.size();
  }
  report(out, "ingest", "paragraphs", std::to_string(encoded.size()));
  report(out, "ingest", "sentences", std::to_string(corpus.sentence_count()));
  report(out, "ingest", "tokens", std::to_string(tokens));
  report(out, "ingest", "vocab_size", std::to_string(vocab.size()));
}

struct TrainArgs {
  std::string model;
  std::string out_path;
  std::string topic_model;
  std::string embeddings;
  std::string annotations;
};

void cmd_train(const Config& c, const TrainArgs& t, const DataArgs& d, std::ostream& out) {
  auto epoch_printer = [&out, &t](TrainConfig& tc) {
    tc.on_epoch = [&out, name = t.model](std::size_t e, double loss) {
      report(out, name, "epoch-" + std::to_string(e + 1) + "-loss", loss);
    };
  };
  Checkpoint ck;
  std::size_t coordinates = 0;

  if (t.model == "adversary") {
    if (t.annotations.empty()) throw Error("--annotations is required to train the adversary");
    if (d.corpus.empty() || d.vocab.empty()) throw Error("adversary training needs --corpus and --vocab");
    const text::Vocab vocab = text::Vocab::load(d.vocab);
    synth::SynthCorpus sc{text::load_corpus(d.corpus), synth::load_annotations(t.annotations)};
    std::vector<eval::AdversarialExample> pos, neg;
    for (auto& e : synth::adversarial_examples(sc, vocab)) (e.human ? pos : neg).push_back(std::move(e));
    auto cfg = c.adversary();
    epoch_printer(cfg.train);
    eval::AdversarialEvaluator ev(vocab.size(), vocab.digest(), cfg);
    eval::train_adversarial_evaluator(ev, pos, neg);
    ck = ev.to_checkpoint();
    coordinates = ev.params().coordinate_count();
  } else {
    const Dataset ds = load_dataset(d);
    const std::size_t V = ds.vocab.size();
    const std::uint64_t digest = ds.vocab.digest();
    if (t.model == "lm" || t.model == "s2s-fwd" || t.model == "s2s-bwd") {
      const Direction dir = t.model == "lm" ? Direction::kLanguageModel
                            : t.model == "s2s-fwd" ? Direction::kForward
                                                   : Direction::kBackward;
      auto cfg = c.seq2seq();
      epoch_printer(cfg.train);
      seq2seq::Seq2SeqModel m(dir, V, digest, cfg);
      seq2seq::train(m, seq2seq::make_pairs(ds.paragraphs, dir));
      ck = m.to_checkpoint();
      coordinates = m.params().coordinate_count();
    } else if (t.model == "hmmlda") {
      const auto st = hmmlda::fit_hmm_lda(ds.paragraphs, V, c.topics());
      ck = hmmlda::topic_checkpoint(st, digest);
      report(out, "hmmlda", "topics", std::to_string(st.topics));
      report(out, "hmmlda", "sweeps", std::to_string(c.size("sweeps")));
    } else if (t.model == "hmmlda-gm-fwd" || t.model == "hmmlda-gm-bwd") {
      if (t.topic_model.empty()) throw Error("--topic-model is required for " + t.model);
      const Checkpoint tk = load_checkpoint(t.topic_model);
      tk.require_kind("hmmlda");
      require_vocab(std::stoull(tk.meta("vocab_digest")), tk.meta_size("vocab_size"), ds.vocab, "topic model and data");
      const Direction dir = t.model == "hmmlda-gm-fwd" ? Direction::kForward : Direction::kBackward;
      hmmlda::TopicState st = hmmlda::load_topics(tk);
      if (dir == Direction::kBackward) st = hmmlda::reversed(st);
      auto cfg = c.gm();
      epoch_printer(cfg.train);
      hmmlda::HmmLdaGmModel m(dir, st, V, digest, cfg);
      hmmlda::train(m, hmmlda::make_gm_examples(st, ds.paragraphs, dir));
      ck = m.to_checkpoint();
      coordinates = m.params().coordinate_count();
    } else if (t.model == "vlv-fwd" || t.model == "vlv-bwd") {
      auto cfg = c.vlv();
      epoch_printer(cfg.train);
      vlv::VlvModel m(t.model == "vlv-fwd" ? Direction::kForward : Direction::kBackward, V, digest, cfg);
      vlv::train_vlv(m, ds.paragraphs);
      ck = m.to_checkpoint();
      coordinates = m.params().coordinate_count();
    } else if (t.model == "discrim") {
      auto cfg = c.discrim();
      epoch_printer(cfg.train);
      std::optional<text::EmbeddingTable> table;
      if (!t.embeddings.empty()) {
        table = text::load_embeddings(t.embeddings);
        cfg.embed_dim = table->dimension();
      }
      discrim::DiscrimModel m(V, digest, cfg);
      if (table) m.use_pretrained(ds.vocab, *table);
      discrim::train_discriminative(m, ds.paragraphs);
      ck = m.to_checkpoint();
      coordinates = m.params().coordinate_count();
    } else {
      throw Error("unknown model kind '" + t.model + "'");
    }
  }
  save_checkpoint(ck, t.out_path);
  report(out, t.model, "kind", ck.meta("kind"));
  if (coordinates > 0) report(out, t.model, "parameters", std::to_string(coordinates));
}

void cmd_score(const Config& c, const ScorerArgs& sa, const DataArgs& d, std::ostream& out) {
  const Dataset ds = load_dataset(d);
  const Scorer s = make_scorer(sa, ds.vocab, c);
  std::vector<double> values(ds.paragraphs.size());
  std::vector<std::vector<scorers::CoherenceScore>> pairs(ds.paragraphs.size());
  eval::parallel_for(values.size(), c.size("threads"), [&](std::size_t i) {
    values[i] = score_document(s, ds.paragraphs[i]);
    if (s.generative()) pairs[i] = scorers::score_adjacent_pairs(scorers::parse_mode(s.mode), s.models(), ds.paragraphs[i]);
  });
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::string id = "p" + std::to_string(i);
    for (std::size_t k = 0; k < pairs[i].size(); ++k) {
      const auto& t = pairs[i][k].terms;
      report(out, id + "." + std::to_string(k), "pair-" + s.mode,
             fmt(pairs[i][k].value) + "\tfwd=" + fmt(t.forward) + ";bwd=" + fmt(t.backward) + ";lm_prev=" +
                 fmt(t.lm_prev) + ";lm_next=" + fmt(t.lm_next) + ";n_prev=" + std::to_string(t.n_prev) +
                 ";n_next=" + std::to_string(t.n_next));
    }
    report(out, id, "score-" + s.mode, values[i]);
  }
  if (s.generative()) report(out, "all", "formula", std::string(scorers::formula_notes()));
  summary_block(out, "score-" + s.mode, values);
}

void cmd_eval_binary(const Config& c, const ScorerArgs& sa, const DataArgs& d, const std::string& pairs_path,
                     std::ostream& out) {
  text::Vocab vocab;
  std::vector<eval::ParagraphPair> pairs;
  if (!pairs_path.empty()) {
    if (d.vocab.empty()) throw Error("--vocab is required with --pairs");
    vocab = text::Vocab::load(d.vocab);
    for (const auto& p : text::load_permutation_pairs(pairs_path)) {
      eval::ParagraphPair e;
      for (const auto& s : p.original) e.original.push_back(text::encode_sentence(vocab, s));
      for (const auto& s : p.permuted) e.permuted.push_back(text::encode_sentence(vocab, s));
      pairs.push_back(std::move(e));
    }
  } else {
    Dataset ds = load_dataset(d);
    vocab = std::move(ds.vocab);
    const std::uint64_t seed = c.u64("seed");
    for (std::size_t i = 0; i < ds.paragraphs.size(); ++i) {
      if (ds.paragraphs[i].size() < 2) continue;
      text::Rng rng(seed + i);
      pairs.push_back({ds.paragraphs[i], text::permute_paragraph(ds.paragraphs[i], rng).second});
    }
  }
  const Scorer s = make_scorer(sa, vocab, c);
  const auto r = eval::binary_accuracy([&](std::span<const SentenceIds> p) { return score_document(s, p); }, pairs,
                                       c.size("threads"));
  std::vector<double> correct;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string id = "pair" + std::to_string(i);
    report(out, id, "original", r.original_scores[i]);
    report(out, id, "permuted", r.permuted_scores[i]);
    correct.push_back(r.original_scores[i] > r.permuted_scores[i] ? 1.0 : 0.0);
  }
  report(out, "summary", "accuracy", r.accuracy);
  report(out, "summary", "count", std::to_string(pairs.size()));
  summary_block(out, "accuracy", correct);
}

void cmd_reconstruct(const Config& c, const ScorerArgs& sa, const DataArgs& d, bool standard_tau, std::ostream& out) {
  const Dataset ds = load_dataset(d);
  const Scorer s = make_scorer(sa, ds.vocab, c);
  const bool contextual = s.mode == "uni" && s.backend != "s2s";
  const std::size_t beam = c.size("beam_size");
  const std::uint64_t seed = c.u64("seed");
  std::vector<eval::OrderingResult> results(ds.paragraphs.size());
  eval::parallel_for(ds.paragraphs.size(), c.size("threads"), [&](std::size_t i) {
    const auto& p = ds.paragraphs[i];
    const std::size_t n = p.size();
    if (n < 2) return;
    // Shuffle the bag behind the fixed first sentence so ties cannot favour the true order.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    text::Rng rng(seed + i);
    std::shuffle(perm.begin() + 1, perm.end(), rng);
    std::vector<SentenceIds> bag;
    for (auto k : perm) bag.push_back(p[k]);
    std::vector<std::size_t> truth(n);
    for (std::size_t k = 0; k < n; ++k) truth[perm[k]] = k;

    eval::OrderingScorer scorer;
    if (contextual) {
      scorer = [&](std::span<const std::size_t> prefix, std::size_t next) {
        std::vector<SentenceIds> ctx;
        for (auto k : prefix) ctx.push_back(bag[k]);
        const LogProb lp = s.forward->log_prob(ctx, bag[next]);
        return lp.total / static_cast<double>(lp.tokens);
      };
    } else {
      std::vector<std::vector<double>> table(n, std::vector<double>(n, 0.0));
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 1; b < n; ++b) {
          if (a == b) continue;
          table[a][b] = s.mode == "oracle"
                            ? oracle_pair(s, bag[a], bag[b])
                            : scorers::score_pair(scorers::parse_mode(s.mode), s.models(), bag[a], bag[b]).value;
        }
      }
      scorer = eval::pairwise([table = std::move(table)](std::size_t a, std::size_t b) { return table[a][b]; });
    }
    results[i] = eval::reconstruct(scorer, n, beam, truth);
  });
  std::vector<double> taus;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].order.empty()) continue;
    const std::string id = "p" + std::to_string(i);
    report(out, id, "N", std::to_string(results[i].order.size()));
    report(out, id, "tau", results[i].tau);
    if (standard_tau) report(out, id, "standard-tau", results[i].standard_tau);
    taus.push_back(results[i].tau);
  }
  if (taus.empty()) throw Error("no paragraph has 2 or more sentences");
  report(out, "summary", "mean-tau", std::accumulate(taus.begin(), taus.end(), 0.0) / static_cast<double>(taus.size()));
  summary_block(out, "tau", taus);
}

void cmd_generate(const Config& c, const ScorerArgs& sa, const DataArgs& d, std::size_t turns,
                  const std::string& rerank, std::size_t context_size, std::ostream& out) {
  const Dataset ds = load_dataset(d);
  ScorerArgs args = sa;
  args.mode = rerank;
  const Scorer s = make_scorer(args, ds.vocab, c);
  const BeamConfig beam = c.beam();
  const auto mode = scorers::parse_mode(rerank);
  std::vector<std::vector<SentenceIds>> outputs(ds.paragraphs.size());
  eval::parallel_for(ds.paragraphs.size(), c.size("threads"), [&](std::size_t i) {
    const auto& p = ds.paragraphs[i];
    std::vector<SentenceIds> context(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(std::min(context_size, p.size())));
    if (context.empty()) return;
    outputs[i] = eval::generate_turns({s.forward.get(), s.backward.get(), s.lm.get()}, context, turns, beam, mode);
  });
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    for (std::size_t k = 0; k < outputs[i].size(); ++k) {
      report(out, "p" + std::to_string(i), "turn-" + std::to_string(k + 1), text::to_string(ds.vocab, outputs[i][k]));
    }
  }
}

void cmd_adversarial_eval(const Config& c, const std::string& evaluator, const DataArgs& d,
                          const std::string& annotations, std::ostream& out) {
  if (d.corpus.empty() || d.vocab.empty() || annotations.empty()) {
    throw Error("adversarial-eval needs --corpus, --vocab and --annotations");
  }
  const text::Vocab vocab = text::Vocab::load(d.vocab);
  const auto ev = eval::AdversarialEvaluator::from_checkpoint(load_checkpoint(evaluator));
  require_vocab(ev.vocab_digest(), ev.vocab_size(), vocab, "evaluator and data");
  synth::SynthCorpus sc{text::load_corpus(d.corpus), synth::load_annotations(annotations)};
  const auto examples = synth::adversarial_examples(sc, vocab);
  const auto r = eval::adver_suc(ev, examples, c.size("threads"));
  report(out, "adversarial", "accuracy", r.accuracy);
  report(out, "adversarial", "adver-suc", r.adver_suc);
  for (const auto& [n, v] : r.per_turn) report(out, "adversarial", "adver-" + std::to_string(n), v);
  report(out, "adversarial", "count", std::to_string(r.count));
}

struct SynthArgs {
  std::string kind = "ordered";
  std::size_t count = 100;
  std::string out_path;
  std::string annotations;
  std::size_t min_paragraph = 8, max_paragraph = 8, turns = 1, topics = 2;
  double noise_rate = 0.0, sentinel_rate = 1.0, stay = 0.8;
};

void cmd_synth(const Config& c, const SynthArgs& a, std::ostream& out) {
  synth::GeneratorSpec spec;
  spec.kind = synth::parse_kind(a.kind);
  spec.seed = c.u64("seed");
  spec.classes = c.size("classes");
  spec.min_paragraph = a.min_paragraph;
  spec.max_paragraph = a.max_paragraph;
  spec.turns = a.turns;
  spec.topics = a.topics;
  spec.noise_rate = a.noise_rate;
  if (a.noise_rate > 0.0) spec.noise_words = 20;
  spec.sentinel_rate = a.sentinel_rate;
  spec.stay_probability = a.stay;
  const auto sc = synth::generate(spec, a.count);
  text::save_corpus(sc.corpus, a.out_path);
  if (!a.annotations.empty()) synth::save_annotations(sc.annotations, a.annotations);
  report(out, "synth", "paragraphs", std::to_string(sc.corpus.paragraphs.size()));
  report(out, "synth", "sentences", std::to_string(sc.corpus.sentence_count()));
}

int cmd_gradcheck(const std::string& model, std::ostream& out) {
  bool ok = true;
  for (const auto& e : run_gradient_suite(model)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", e.report.max_relative_error);
    report(out, e.model, "max-rel-error", buf);
    report(out, e.model, "coordinates", std::to_string(e.report.coordinates_checked));
    report(out, e.model, "status", e.report.passed() ? "pass" : "fail");
    ok = ok && e.report.passed();
  }
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural discourse coherence toolkit", "coherence"};
  app.require_subcommand(1);

  Common common;
  DataArgs data;
  ScorerArgs scorer;

  std::string corpus_path, out_dir;
  auto* ingest = app.add_subcommand("ingest", "tokenize a corpus and build its vocabulary");
  ingest->add_option("--corpus", corpus_path, "corpus text file")->required();
  ingest->add_option("--out", out_dir, "output directory")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a model and write its checkpoint");
  train->add_option("--model", train_args.model, "model kind")
      ->required()
      ->check(CLI::IsMember({"lm", "s2s-fwd", "s2s-bwd", "hmmlda", "hmmlda-gm-fwd", "hmmlda-gm-bwd", "vlv-fwd",
                             "vlv-bwd", "discrim", "adversary"}));
  train->add_option("--out", train_args.out_path, "checkpoint path")->required();
  train->add_option("--topic-model", train_args.topic_model, "hmmlda checkpoint for hmmlda-gm models");
  train->add_option("--embeddings", train_args.embeddings, "pretrained word vectors for discrim");
  train->add_option("--annotations", train_args.annotations, "role annotations for adversary training");
  add_data(train, data);

  auto* score = app.add_subcommand("score", "score paragraphs");
  add_scorer(score, scorer, true);
  add_data(score, data);

  std::string pairs_path;
  auto* binary = app.add_subcommand("eval-binary", "original-vs-permuted classification accuracy");
  add_scorer(binary, scorer, true);
  add_data(binary, data);
  binary->add_option("--pairs", pairs_path, "permutation pairs file");

  bool standard_tau = false;
  auto* recon = app.add_subcommand("reconstruct", "recover sentence order by beam search");
  add_scorer(recon, scorer, false);
  add_data(recon, data);
  recon->add_flag("--standard-tau", standard_tau, "also report the standard Kendall tau");

  std::size_t turns = 1, context_size = 3;
  std::string rerank = "uni";
  auto* generate = app.add_subcommand("generate", "continue paragraphs turn by turn");
  generate->add_option("--turns", turns, "sentences to generate")->check(CLI::Range(1, 3));
  generate->add_option("--rerank", rerank, "N-best reranking")->check(CLI::IsMember({"uni", "bi", "mmi"}));
  generate->add_option("--context", context_size, "context sentences taken from each paragraph");
  generate->add_option("--backend", scorer.backend, "generative backend")->check(CLI::IsMember({"s2s", "hmmlda", "vlv"}));
  generate->add_option("--forward", scorer.forward, "forward model checkpoint")->required();
  generate->add_option("--backward", scorer.backward, "backward model checkpoint");
  generate->add_option("--lm", scorer.lm, "language model checkpoint");
  add_data(generate, data);

  std::string evaluator, annotations;
  auto* adversarial = app.add_subcommand("adversarial-eval", "AdverSuc of an evaluator on labelled chunks");
  adversarial->add_option("--evaluator", evaluator, "adversary checkpoint")->required();
  adversarial->add_option("--annotations", annotations, "role annotations")->required();
  add_data(adversarial, data);

  std::string grad_model = "all";
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks on tiny models");
  gradcheck->add_option("--model", grad_model, "model to check, or all");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic corpus");
  synth_cmd->add_option("--kind", synth_args.kind)->check(CLI::IsMember({"ordered", "two-topic", "sentinel"}));
  synth_cmd->add_option("--count", synth_args.count)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out", synth_args.out_path)->required();
  synth_cmd->add_option("--annotations", synth_args.annotations);
  synth_cmd->add_option("--min-paragraph", synth_args.min_paragraph);
  synth_cmd->add_option("--max-paragraph", synth_args.max_paragraph);
  synth_cmd->add_option("--turns", synth_args.turns);
  synth_cmd->add_option("--topic-count", synth_args.topics);
  synth_cmd->add_option("--noise-rate", synth_args.noise_rate);
  synth_cmd->add_option("--sentinel-rate", synth_args.sentinel_rate);
  synth_cmd->add_option("--stay", synth_args.stay);

  for (auto* sub : app.get_subcommands({})) add_common(sub, common);

  try {
    app.parse(reversed_args(args));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    const Config config = common.resolve();
    if (ingest->parsed()) cmd_ingest(config, corpus_path, out_dir, out);
    if (train->parsed()) cmd_train(config, train_args, data, out);
    if (score->parsed()) cmd_score(config, scorer, data, out);
    if (binary->parsed()) cmd_eval_binary(config, scorer, data, pairs_path, out);
    if (recon->parsed()) cmd_reconstruct(config, scorer, data, standard_tau, out);
    if (generate->parsed()) cmd_generate(config, scorer, data, turns, rerank, context_size, out);
    if (adversarial->parsed()) cmd_adversarial_eval(config, evaluator, data, annotations, out);
    if (synth_cmd->parsed()) cmd_synth(config, synth_args, out);
    if (gradcheck->parsed()) return cmd_gradcheck(grad_model, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace coherence::cli
