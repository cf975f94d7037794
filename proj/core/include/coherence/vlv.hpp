#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "coherence/checkpoint.hpp"
#include "coherence/graph.hpp"
#include "coherence/lstm.hpp"
#include "coherence/model.hpp"
#include "coherence/seq2seq.hpp"
#include "coherence/text.hpp"

namespace coherence::vlv {

inline constexpr double kVarianceFloor = 1e-6;

// Diagonal Gaussian over a K-dimensional latent discourse state.
struct GaussianParams {
  std::vector<double> mu;
  std::vector<double> var;  // variances, all > 0

  std::size_t dim() const { return mu.size(); }
};

void validate(const GaussianParams& p);

// KL(q || p) for diagonal Gaussians.
double gaussian_kl(const GaussianParams& q, const GaussianParams& p);
// mu + sqrt(var) * eps, eps ~ N(0, I).
std::vector<double> sample_latent(const GaussianParams& params, std::mt19937_64& rng);

struct GaussianVars {
  Var mu;
  Var var;
};

Var gaussian_kl(Graph& g, const GaussianVars& q, const GaussianVars& p);
Var reparameterize(Graph& g, const GaussianVars& params, std::span<const double> eps);

struct VlvConfig {
  std::size_t embed_dim = 100;
  std::size_t hidden_dim = 100;   // decoder
  std::size_t context_dim = 100;  // word and sentence level of the context encoders
  std::size_t latent_dim = 16;    // K
  std::size_t window = 3;         // W context sentences
  std::size_t anneal_steps = 5000;  // 0 disables annealing
  bool track_elbo = false;        // evaluate the training-set ELBO after each epoch
  std::uint64_t elbo_seed = 7;    // noise seed for that evaluation
  TrainConfig train;
};

// Context network: embeddings, hierarchical encoder and the mean and variance
// heads, which read concat(sentence-level state, z_prev).
struct ContextNet {
  std::string prefix;
  lstm::EmbeddingParams emb;
  lstm::HierEncoderParams enc;
  std::size_t latent_dim = 0;

  std::string mu_w() const { return prefix + ".mu.W"; }
  std::string mu_b() const { return prefix + ".mu.b"; }
  std::string var_w() const { return prefix + ".var.W"; }
  std::string var_b() const { return prefix + ".var.b"; }
};

// Per-sentence standard normal draws used by the reparameterization.
using Noise = std::vector<std::vector<double>>;

struct ElboTerms {
  Var reconstruction;  // sum of log p(s_n | z_n, s_{n-1})
  Var kl;              // sum of KL(q_n || p_n)
  std::size_t tokens = 0;
};

class VlvModel final : public ConditionalModel {
 public:
  VlvModel(Direction direction, std::size_t vocab_size, std::uint64_t vocab_digest,
           const VlvConfig& config);

  Direction direction() const override { return direction_; }
  std::string_view backend() const override { return "vlv"; }
  std::size_t vocab_size() const override { return decoder_.vocab_size; }
  std::uint64_t vocab_digest() const override { return vocab_digest_; }

  // Uses the prior mean for the target latent. Context latents are the
  // posterior means of the observed context sentences.
  LogProb log_prob(std::span<const text::SentenceIds> context,
                   const text::SentenceIds& target) const override;
  // As log_prob, with the target latent sampled from the prior.
  LogProb log_prob_sampled(std::span<const text::SentenceIds> context, const text::SentenceIds& target,
                           std::mt19937_64& rng) const;
  std::vector<Hypothesis> beam_decode(std::span<const text::SentenceIds> context,
                                      const BeamConfig& config) const override;

  // Context windows are truncated to the last W sentences; an empty context is
  // an error (document-initial positions pass the marker sentence).
  GaussianVars prior(Graph& g, Var z_prev, std::span<const text::SentenceIds> context) const;
  GaussianVars posterior(Graph& g, Var z_prev, std::span<const text::SentenceIds> context) const;
  GaussianParams prior_params(std::span<const double> z_prev,
                              std::span<const text::SentenceIds> context) const;
  GaussianParams posterior_params(std::span<const double> z_prev,
                                  std::span<const text::SentenceIds> context) const;

  // Single-sample ELBO terms over sentences [0, upto] of `paragraph`, with z
  // drawn from the posterior through `noise` (one K-vector per sentence).
  ElboTerms elbo_terms(Graph& g, const text::EncodedParagraph& paragraph, const Noise& noise,
                       std::size_t upto) const;
  Noise draw_noise(std::size_t sentences, std::mt19937_64& rng) const;

  const VlvConfig& config() const { return config_; }
  const ContextNet& prior_net() const { return prior_; }
  const ContextNet& posterior_net() const { return post_; }
  const seq2seq::EncoderDecoder& decoder() const { return decoder_; }
  std::string z0_name() const { return "vlv.z0"; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  Checkpoint to_checkpoint() const;
  static VlvModel from_checkpoint(const Checkpoint& checkpoint);

 private:
  GaussianVars heads(Graph& g, const ContextNet& net, Var z_prev,
                     std::span<const text::SentenceIds> context) const;
  // Prior-side context of position n: the last W sentences before it, or the marker.
  std::vector<text::SentenceIds> prior_context(std::span<const text::SentenceIds> sentences,
                                               std::size_t n) const;
  LogProb score(std::span<const text::SentenceIds> context, const text::SentenceIds& target,
                std::mt19937_64* rng) const;

  Direction direction_;
  std::uint64_t vocab_digest_;
  VlvConfig config_;
  ContextNet prior_;
  ContextNet post_;
  seq2seq::EncoderDecoder decoder_;
  ParamStore params_;
};

struct ElboStep {
  double reconstruction = 0.0;  // log-probability, <= 0
  double kl = 0.0;
};

// ELBO terms of sentence n, with the chain of earlier latents sampled from
// the posterior.
ElboStep elbo_step(const VlvModel& model, const text::EncodedParagraph& paragraph, std::size_t n,
                   std::mt19937_64& rng);

struct VlvReport {
  std::vector<double> epoch_loss;  // annealed objective per token
  std::vector<double> epoch_elbo;  // per-token ELBO with fixed noise, when tracked
  std::vector<double> epoch_reconstruction;
  std::vector<double> epoch_kl;
};

// Per-token ELBO, reconstruction and KL of `paragraphs` with noise drawn from `seed`.
struct ElboSummary {
  double elbo = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
};
ElboSummary evaluate_elbo(const VlvModel& model, std::span<const text::EncodedParagraph> paragraphs,
                          std::uint64_t seed);

// Paragraphs are read in the model's direction (reversed for backward models).
VlvReport train_vlv(VlvModel& model, std::span<const text::EncodedParagraph> paragraphs);

}  // namespace coherence::vlv
