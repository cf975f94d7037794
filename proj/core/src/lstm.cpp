#include "coherence/lstm.hpp"

#include "coherence/error.hpp"

namespace coherence::lstm {

void init_lstm(ParamStore& store, const LstmParams& p, std::mt19937_64& rng, double scale) {
  const Shape w{p.hidden_dim, p.input_dim + p.hidden_dim};
  for (const char* gate : {"Wi", "Wf", "Wo", "Wc"}) store.add_uniform(p.prefix + "." + gate, w, scale, rng);
  for (const char* gate : {"bi", "bf", "bo", "bc"}) store.add_zeros(p.prefix + "." + gate, Shape{p.hidden_dim});
}

BoundLstm bind(Graph& g, const LstmParams& p) {
  BoundLstm b;
  b.spec = p;
  b.wi = g.param(p.prefix + ".Wi");
  b.wf = g.param(p.prefix + ".Wf");
  b.wo = g.param(p.prefix + ".Wo");
  b.wc = g.param(p.prefix + ".Wc");
  b.bi = g.param(p.prefix + ".bi");
  b.bf = g.param(p.prefix + ".bf");
  b.bo = g.param(p.prefix + ".bo");
  b.bc = g.param(p.prefix + ".bc");
  const Shape expected{p.hidden_dim, p.input_dim + p.hidden_dim};
  if (g.shape(b.wi) != expected) {
    throw ShapeError(p.prefix + ".Wi has shape " + shape_string(g.shape(b.wi)) + ", expected " +
                     shape_string(expected));
  }
  return b;
}

LstmState zero_state(Graph& g, const LstmParams& p) {
  return {g.zeros(p.hidden_dim), g.zeros(p.hidden_dim)};
}

LstmState step(Graph& g, const BoundLstm& l, Var input, const LstmState& prev) {
  Var z = g.concat({input, prev.h});
  Var i = g.sigmoid(g.affine(l.wi, z, l.bi));
  Var f = g.sigmoid(g.affine(l.wf, z, l.bf));
  Var o = g.sigmoid(g.affine(l.wo, z, l.bo));
  Var cand = g.tanh(g.affine(l.wc, z, l.bc));
  Var c = g.add(g.mul(f, prev.c), g.mul(i, cand));
  Var h = g.mul(o, g.tanh(c));
  return {h, c};
}

Encoding encode(Graph& g, const LstmParams& params, std::span<const Var> inputs,
                std::optional<LstmState> initial) {
  if (inputs.empty()) throw Error("lstm encode: empty input sequence");
  BoundLstm l = bind(g, params);
  Encoding out;
  out.final = initial ? *initial : zero_state(g, params);
  out.hidden.reserve(inputs.size());
  for (Var x : inputs) {
    out.final = step(g, l, x, out.final);
    out.hidden.push_back(out.final.h);
  }
  return out;
}

void init_embedding(ParamStore& store, const EmbeddingParams& p, std::mt19937_64& rng, double scale) {
  store.add_uniform(p.name, Shape{p.vocab_size, p.dim}, scale, rng);
}

void load_pretrained(ParamStore& store, const EmbeddingParams& p, const text::Vocab& vocab,
                     const text::EmbeddingTable& table) {
  Parameter& param = store.at(p.name);
  if (!table.empty() && table.dimension() != p.dim) {
    throw ShapeError("pretrained embeddings have dimension " + std::to_string(table.dimension()) +
                     ", model expects " + std::to_string(p.dim));
  }
  for (std::size_t id = 0; id < vocab.size() && id < p.vocab_size; ++id) {
    if (const auto* v = table.find(vocab.token(static_cast<text::TokenId>(id)))) {
      auto row = param.value.row(id);
      std::copy(v->begin(), v->end(), row.begin());
    }
  }
  param.trainable = false;
}

std::vector<Var> embed(Graph& g, Var table, std::span<const text::TokenId> ids) {
  std::vector<Var> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(g.row(table, id));
  return out;
}

HierEncoderParams make_hier_params(const std::string& prefix, std::size_t embed_dim,
                                   std::size_t word_hidden, std::size_t sent_hidden) {
  return {{prefix + ".word", embed_dim, word_hidden}, {prefix + ".sent", word_hidden, sent_hidden}};
}

void init_hier(ParamStore& store, const HierEncoderParams& p, std::mt19937_64& rng, double scale) {
  if (p.sent.input_dim != p.word.hidden_dim) {
    throw ShapeError("sentence-level LSTM input must equal word-level hidden size");
  }
  init_lstm(store, p.word, rng, scale);
  init_lstm(store, p.sent, rng, scale);
}

Var encode_sentence(Graph& g, const LstmParams& word, Var embeddings,
                    const text::SentenceIds& sentence) {
  auto inputs = embed(g, embeddings, sentence.ids);
  return encode(g, word, inputs).final.h;
}

Var hier_encode_vectors(Graph& g, const HierEncoderParams& params,
                        std::span<const Var> sentence_vectors) {
  if (sentence_vectors.empty()) throw Error("hierarchical encode: no sentences");
  return encode(g, params.sent, sentence_vectors).final.h;
}

Var hier_encode(Graph& g, const HierEncoderParams& params, Var embeddings,
                std::span<const text::SentenceIds> sentences) {
  if (sentences.empty()) throw Error("hierarchical encode: no sentences");
  std::vector<Var> vectors;
  vectors.reserve(sentences.size());
  for (const auto& s : sentences) vectors.push_back(encode_sentence(g, params.word, embeddings, s));
  return hier_encode_vectors(g, params, vectors);
}

}  // namespace coherence::lstm
