#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "coherence/graph.hpp"
#include "coherence/params.hpp"
#include "coherence/text.hpp"

namespace coherence::lstm {

// Names the parameters of one single-layer LSTM: "<prefix>.{Wi,Wf,Wo,Wc,bi,bf,bo,bc}".
// Each W has shape {hidden, input + hidden} and acts on concat(x_t, h_{t-1}).
struct LstmParams {
  std::string prefix;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
};

void init_lstm(ParamStore& store, const LstmParams& params, std::mt19937_64& rng,
               double scale = kDefaultInitScale);

struct LstmState {
  Var h;
  Var c;
};

// Parameter nodes of one LSTM resolved against a graph.
struct BoundLstm {
  LstmParams spec;
  Var wi, wf, wo, wc, bi, bf, bo, bc;
};

BoundLstm bind(Graph& g, const LstmParams& params);

LstmState zero_state(Graph& g, const LstmParams& params);
LstmState step(Graph& g, const BoundLstm& lstm, Var input, const LstmState& prev);

struct Encoding {
  std::vector<Var> hidden;  // one per input
  LstmState final;
};

// Runs the LSTM over `inputs` from `initial` (zero state when absent).
Encoding encode(Graph& g, const LstmParams& params, std::span<const Var> inputs,
                std::optional<LstmState> initial = std::nullopt);

// Word embedding matrix "<name>" of shape {vocab, dim}.
struct EmbeddingParams {
  std::string name;
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
};

void init_embedding(ParamStore& store, const EmbeddingParams& params, std::mt19937_64& rng,
                    double scale = kDefaultInitScale);
// Copies vectors of in-vocabulary tokens from `table` and freezes the matrix.
// Rows for tokens missing from the table keep their random initialization.
void load_pretrained(ParamStore& store, const EmbeddingParams& params, const text::Vocab& vocab,
                     const text::EmbeddingTable& table);

std::vector<Var> embed(Graph& g, Var table, std::span<const text::TokenId> ids);

// Word-level LSTM over each sentence, then a sentence-level LSTM over the
// word-level final states.
struct HierEncoderParams {
  LstmParams word;
  LstmParams sent;
};

HierEncoderParams make_hier_params(const std::string& prefix, std::size_t embed_dim,
                                   std::size_t word_hidden, std::size_t sent_hidden);
void init_hier(ParamStore& store, const HierEncoderParams& params, std::mt19937_64& rng,
               double scale = kDefaultInitScale);

Var encode_sentence(Graph& g, const LstmParams& word, Var embeddings,
                    const text::SentenceIds& sentence);
Var hier_encode(Graph& g, const HierEncoderParams& params, Var embeddings,
                std::span<const text::SentenceIds> sentences);
// Sentence-level pass over precomputed sentence vectors.
Var hier_encode_vectors(Graph& g, const HierEncoderParams& params, std::span<const Var> sentence_vectors);

}  // namespace coherence::lstm
