#include "coherence/vlv.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "coherence/error.hpp"
#include "coherence/trainer.hpp"

namespace coherence::vlv {

using text::SentenceIds;

void validate(const GaussianParams& p) {
  if (p.mu.size() != p.var.size()) throw ShapeError("Gaussian mean and variance lengths differ");
  for (double v : p.var) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error("Gaussian variances must be positive and finite");
  }
}

double gaussian_kl(const GaussianParams& q, const GaussianParams& p) {
  validate(q);
  validate(p);
  if (q.dim() != p.dim()) {
    throw ShapeError("KL between Gaussians of dimension " + std::to_string(q.dim()) + " and " +
                     std::to_string(p.dim()));
  }
  double kl = 0.0;
  for (std::size_t k = 0; k < q.dim(); ++k) {
    const double d = p.mu[k] - q.mu[k];
    kl += q.var[k] / p.var[k] - 1.0 + std::log(p.var[k] / q.var[k]) + d * d / p.var[k];
  }
  return 0.5 * kl;
}

std::vector<double> sample_latent(const GaussianParams& params, std::mt19937_64& rng) {
  validate(params);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(params.dim());
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = params.mu[k] + std::sqrt(params.var[k]) * normal(rng);
  return z;
}

Var gaussian_kl(Graph& g, const GaussianVars& q, const GaussianVars& p) {
  const Var ratio = g.div(q.var, p.var);
  const Var log_ratio = g.sub(g.log(p.var), g.log(q.var));
  const Var quad = g.div(g.square(g.sub(p.mu, q.mu)), p.var);
  const Var inner = g.add_constant(g.add(g.add(ratio, log_ratio), quad), -1.0);
  return g.scale(g.sum(inner), 0.5);
}

Var reparameterize(Graph& g, const GaussianVars& params, std::span<const double> eps) {
  return g.add(params.mu, g.mul(g.sqrt(params.var), g.constant_vector(eps)));
}

namespace {

ContextNet make_context_net(const std::string& prefix, std::size_t vocab, const VlvConfig& c) {
  ContextNet net;
  net.prefix = prefix;
  net.emb = {prefix + ".emb", vocab, c.embed_dim};
  net.enc = lstm::make_hier_params(prefix, c.embed_dim, c.context_dim, c.context_dim);
  net.latent_dim = c.latent_dim;
  return net;
}

void init_context_net(ParamStore& store, const ContextNet& net, std::mt19937_64& rng, double scale) {
  lstm::init_embedding(store, net.emb, rng, scale);
  lstm::init_hier(store, net.enc, rng, scale);
  const std::size_t in = net.enc.sent.hidden_dim + net.latent_dim;
  store.add_uniform(net.mu_w(), Shape{net.latent_dim, in}, scale, rng);
  store.add_zeros(net.mu_b(), Shape{net.latent_dim});
  store.add_uniform(net.var_w(), Shape{net.latent_dim, in}, scale, rng);
  store.add_zeros(net.var_b(), Shape{net.latent_dim});
}

GaussianVars heads_from_vectors(Graph& g, const ContextNet& net, Var z_prev,
                                std::span<const Var> sentence_vectors) {
  const Var ctx = lstm::hier_encode_vectors(g, net.enc, sentence_vectors);
  const Var x = g.concat({ctx, z_prev});
  const Var mu = g.affine(g.param(net.mu_w()), x, g.param(net.mu_b()));
  const Var var = g.add_constant(g.softplus(g.affine(g.param(net.var_w()), x, g.param(net.var_b()))),
                                 kVarianceFloor);
  return {mu, var};
}

GaussianParams values(const Graph& g, const GaussianVars& v) {
  return {g.value(v.mu).data, g.value(v.var).data};
}

// Word-level encodings of one paragraph for one context network, computed
// once per graph. Slot 0 is the marker sentence.
class SentenceCache {
 public:
  SentenceCache(Graph& g, const ContextNet& net, std::span<const SentenceIds> sentences)
      : g_(g), net_(net), sentences_(sentences), vecs_(sentences.size() + 1) {}

  Var marker() { return get(0, text::boundary_sentence()); }
  Var at(std::size_t n) { return get(n + 1, sentences_[n]); }

 private:
  Var get(std::size_t slot, const SentenceIds& s) {
    if (!vecs_[slot]) {
      if (!emb_) emb_ = g_.param(net_.emb.name);
      vecs_[slot] = lstm::encode_sentence(g_, net_.enc.word, *emb_, s);
    }
    return *vecs_[slot];
  }

  Graph& g_;
  const ContextNet& net_;
  std::span<const SentenceIds> sentences_;
  std::vector<std::optional<Var>> vecs_;
  std::optional<Var> emb_;
};

// Sentence vectors of the prior context of position n (last W sentences or
// the marker), optionally followed by sentence n itself.
std::vector<Var> window_vectors(SentenceCache& cache, std::size_t n, std::size_t window,
                                bool include_current) {
  std::vector<Var> out;
  if (n == 0) {
    out.push_back(cache.marker());
  } else {
    for (std::size_t i = n > window ? n - window : 0; i < n; ++i) out.push_back(cache.at(i));
  }
  if (include_current) out.push_back(cache.at(n));
  return out;
}

}  // namespace

VlvModel::VlvModel(Direction direction, std::size_t vocab_size, std::uint64_t vocab_digest,
                   const VlvConfig& config)
    : direction_(direction), vocab_digest_(vocab_digest), config_(config) {
  if (direction == Direction::kLanguageModel) throw Error("VLV-GM is a conditional model");
  if (config.latent_dim == 0) throw Error("latent dimension must be positive");
  if (config.window == 0) throw Error("context window must be positive");
  prior_ = make_context_net("vlv.prior", vocab_size, config);
  post_ = make_context_net("vlv.post", vocab_size, config);
  decoder_.prefix = "vlv.decoder";
  decoder_.vocab_size = vocab_size;
  decoder_.embed_dim = config.embed_dim;
  decoder_.hidden_dim = config.hidden_dim;
  decoder_.latent_dim = config.latent_dim;
  decoder_.has_encoder = true;
  std::mt19937_64 rng(config.train.seed);
  const double scale = config.train.init_scale;
  decoder_.init(params_, rng, scale);
  init_context_net(params_, prior_, rng, scale);
  init_context_net(params_, post_, rng, scale);
  params_.add_uniform(z0_name(), Shape{config.latent_dim}, scale, rng);
}

GaussianVars VlvModel::heads(Graph& g, const ContextNet& net, Var z_prev,
                             std::span<const SentenceIds> context) const {
  if (context.empty()) throw Error("latent context is empty; use the marker sentence");
  if (g.shape(z_prev) != Shape{config_.latent_dim}) throw ShapeError("z_prev has the wrong length");
  const std::size_t keep = std::min(context.size(), net.prefix == post_.prefix ? config_.window + 1
                                                                                 : config_.window);
  const auto window = context.subspan(context.size() - keep);
  const Var emb = g.param(net.emb.name);
  std::vector<Var> vecs;
  for (const auto& s : window) {
    check_vocab(*this, s);
    vecs.push_back(lstm::encode_sentence(g, net.enc.word, emb, s));
  }
  return heads_from_vectors(g, net, z_prev, vecs);
}

GaussianVars VlvModel::prior(Graph& g, Var z_prev, std::span<const SentenceIds> context) const {
  return heads(g, prior_, z_prev, context);
}

GaussianVars VlvModel::posterior(Graph& g, Var z_prev, std::span<const SentenceIds> context) const {
  return heads(g, post_, z_prev, context);
}

GaussianParams VlvModel::prior_params(std::span<const double> z_prev,
                                      std::span<const SentenceIds> context) const {
  Graph g(params_);
  return values(g, prior(g, g.constant_vector(z_prev), context));
}

GaussianParams VlvModel::posterior_params(std::span<const double> z_prev,
                                          std::span<const SentenceIds> context) const {
  Graph g(params_);
  return values(g, posterior(g, g.constant_vector(z_prev), context));
}

Noise VlvModel::draw_noise(std::size_t sentences, std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Noise noise(sentences, std::vector<double>(config_.latent_dim));
  for (auto& eps : noise) {
    for (double& e : eps) e = normal(rng);
  }
  return noise;
}

ElboTerms VlvModel::elbo_terms(Graph& g, const text::EncodedParagraph& para, const Noise& noise,
                               std::size_t upto) const {
  if (upto >= para.size()) throw Error("sentence index outside paragraph");
  if (noise.size() <= upto) throw Error("not enough noise vectors for the paragraph");
  for (const auto& s : para) check_vocab(*this, s);
  SentenceCache prior_cache(g, prior_, para);
  SentenceCache post_cache(g, post_, para);
  const auto bound = decoder_.bind(g);
  const SentenceIds marker = text::boundary_sentence();

  Var z_prev = g.param(z0_name());
  std::vector<Var> rec, kl;
  ElboTerms out;
  for (std::size_t n = 0; n <= upto; ++n) {
    const auto p_vecs = window_vectors(prior_cache, n, config_.window, false);
    const auto q_vecs = window_vectors(post_cache, n, config_.window, true);
    const GaussianVars p = heads_from_vectors(g, prior_, z_prev, p_vecs);
    const GaussianVars q = heads_from_vectors(g, post_, z_prev, q_vecs);
    const Var z = reparameterize(g, q, noise[n]);
    const SentenceIds& source = n == 0 ? marker : para[n - 1];
    rec.push_back(g.scale(decoder_.target_nll(g, bound, &source, para[n], z), -1.0));
    kl.push_back(gaussian_kl(g, q, p));
    out.tokens += para[n].length();
    z_prev = z;
  }
  out.reconstruction = g.sum(g.concat(rec));
  out.kl = g.sum(g.concat(kl));
  return out;
}

std::vector<SentenceIds> VlvModel::prior_context(std::span<const SentenceIds> sentences,
                                                 std::size_t n) const {
  if (n == 0) return {text::boundary_sentence()};
  const std::size_t first = n > config_.window ? n - config_.window : 0;
  return {sentences.begin() + static_cast<std::ptrdiff_t>(first),
          sentences.begin() + static_cast<std::ptrdiff_t>(n)};
}

LogProb VlvModel::score(std::span<const SentenceIds> context, const SentenceIds& target,
                        std::mt19937_64* rng) const {
  check_vocab(*this, target);
  for (const auto& s : context) check_vocab(*this, s);
  Graph g(params_);
  std::vector<SentenceIds> seq(context.begin(), context.end());
  seq.push_back(target);
  SentenceCache prior_cache(g, prior_, seq);
  SentenceCache post_cache(g, post_, seq);
  Var z_prev = g.param(z0_name());
  const std::size_t m = context.size();
  for (std::size_t n = 0; n < m; ++n) {
    const auto q_vecs = window_vectors(post_cache, n, config_.window, true);
    z_prev = heads_from_vectors(g, post_, z_prev, q_vecs).mu;
  }
  const auto p_vecs = window_vectors(prior_cache, m, config_.window, false);
  const GaussianVars p = heads_from_vectors(g, prior_, z_prev, p_vecs);
  Var z = p.mu;
  if (rng) {
    const auto sample = sample_latent(values(g, p), *rng);
    z = g.constant_vector(sample);
  }
  const SentenceIds marker = text::boundary_sentence();
  const SentenceIds& source = m == 0 ? marker : context.back();
  const auto bound = decoder_.bind(g);
  return {-g.scalar(decoder_.target_nll(g, bound, &source, target, z)), target.length()};
}

LogProb VlvModel::log_prob(std::span<const SentenceIds> context, const SentenceIds& target) const {
  return score(context, target, nullptr);
}

LogProb VlvModel::log_prob_sampled(std::span<const SentenceIds> context, const SentenceIds& target,
                                   std::mt19937_64& rng) const {
  return score(context, target, &rng);
}

std::vector<Hypothesis> VlvModel::beam_decode(std::span<const SentenceIds> context,
                                              const BeamConfig& config) const {
  for (const auto& s : context) check_vocab(*this, s);
  Graph g(params_);
  std::vector<SentenceIds> seq(context.begin(), context.end());
  SentenceCache prior_cache(g, prior_, seq);
  SentenceCache post_cache(g, post_, seq);
  Var z_prev = g.param(z0_name());
  const std::size_t m = context.size();
  for (std::size_t n = 0; n < m; ++n) {
    z_prev = heads_from_vectors(g, post_, z_prev, window_vectors(post_cache, n, config_.window, true)).mu;
  }
  const Var z = heads_from_vectors(g, prior_, z_prev, window_vectors(prior_cache, m, config_.window, false)).mu;
  const SentenceIds marker = text::boundary_sentence();
  const SentenceIds& source = m == 0 ? marker : context.back();
  const auto bound = decoder_.bind(g);
  return decoder_.beam_search(g, bound, &source, z, config);
}

Checkpoint VlvModel::to_checkpoint() const {
  Checkpoint ck;
  ck.metadata["kind"] = direction_ == Direction::kForward ? "vlv-fwd" : "vlv-bwd";
  ck.metadata["direction"] = std::string(direction_name(direction_));
  ck.metadata["vocab_size"] = std::to_string(decoder_.vocab_size);
  ck.metadata["vocab_digest"] = std::to_string(vocab_digest_);
  ck.metadata["embed_dim"] = std::to_string(config_.embed_dim);
  ck.metadata["hidden_dim"] = std::to_string(config_.hidden_dim);
  ck.metadata["context_dim"] = std::to_string(config_.context_dim);
  ck.metadata["latent_dim"] = std::to_string(config_.latent_dim);
  ck.metadata["window"] = std::to_string(config_.window);
  ck.metadata["anneal_steps"] = std::to_string(config_.anneal_steps);
  store_params(ck, params_);
  return ck;
}

VlvModel VlvModel::from_checkpoint(const Checkpoint& ck) {
  const Direction direction = parse_direction(ck.meta("direction"));
  ck.require_kind(direction == Direction::kForward ? "vlv-fwd" : "vlv-bwd");
  VlvConfig config;
  config.embed_dim = ck.meta_size("embed_dim");
  config.hidden_dim = ck.meta_size("hidden_dim");
  config.context_dim = ck.meta_size("context_dim");
  config.latent_dim = ck.meta_size("latent_dim");
  config.window = ck.meta_size("window");
  config.anneal_steps = ck.meta_size("anneal_steps");
  VlvModel model(direction, ck.meta_size("vocab_size"), std::stoull(ck.meta("vocab_digest")), config);
  load_params(ck, model.params_);
  return model;
}

ElboStep elbo_step(const VlvModel& model, const text::EncodedParagraph& paragraph, std::size_t n,
                   std::mt19937_64& rng) {
  const Noise noise = model.draw_noise(n + 1, rng);
  Graph g(model.params());
  const ElboTerms all = model.elbo_terms(g, paragraph, noise, n);
  if (n == 0) return {g.scalar(all.reconstruction), g.scalar(all.kl)};
  Graph h(model.params());
  const ElboTerms before = model.elbo_terms(h, paragraph, noise, n - 1);
  return {g.scalar(all.reconstruction) - h.scalar(before.reconstruction),
          g.scalar(all.kl) - h.scalar(before.kl)};
}

namespace {

std::vector<text::EncodedParagraph> reading_order(const VlvModel& model,
                                                  std::span<const text::EncodedParagraph> paragraphs) {
  std::vector<text::EncodedParagraph> out(paragraphs.begin(), paragraphs.end());
  if (model.direction() == Direction::kBackward) {
    for (auto& p : out) std::reverse(p.begin(), p.end());
  }
  return out;
}

}  // namespace

ElboSummary evaluate_elbo(const VlvModel& model, std::span<const text::EncodedParagraph> paragraphs,
                          std::uint64_t seed) {
  const auto view = reading_order(model, paragraphs);
  std::mt19937_64 rng(seed);
  double rec = 0.0, kl = 0.0, tokens = 0.0;
  for (const auto& p : view) {
    if (p.empty()) continue;
    const Noise noise = model.draw_noise(p.size(), rng);
    Graph g(model.params());
    const ElboTerms t = model.elbo_terms(g, p, noise, p.size() - 1);
    rec += g.scalar(t.reconstruction);
    kl += g.scalar(t.kl);
    tokens += static_cast<double>(t.tokens);
  }
  if (tokens == 0.0) throw Error("ELBO evaluation set is empty");
  return {(rec - kl) / tokens, rec / tokens, kl / tokens};
}

VlvReport train_vlv(VlvModel& model, std::span<const text::EncodedParagraph> paragraphs) {
  auto view = reading_order(model, paragraphs);
  std::erase_if(view, [](const text::EncodedParagraph& p) { return p.empty(); });
  if (view.empty()) throw Error("VLV training corpus is empty");
  const VlvConfig& cfg = model.config();
  const TrainConfig& tc = cfg.train;
  std::mt19937_64 order_rng(tc.seed + 1);
  std::mt19937_64 noise_rng(tc.seed + 2);
  std::size_t examples_seen = 0;
  const double batch = static_cast<double>(std::max<std::size_t>(tc.batch_size, 1));

  const ExampleBuilder build = [&](Graph& g, std::size_t i) {
    const auto& p = view[i];
    const double step = std::floor(static_cast<double>(examples_seen++) / batch);
    const double kappa =
        cfg.anneal_steps == 0 ? 1.0 : std::min(1.0, step / static_cast<double>(cfg.anneal_steps));
    const Noise noise = model.draw_noise(p.size(), noise_rng);
    const ElboTerms t = model.elbo_terms(g, p, noise, p.size() - 1);
    const Var loss = g.add(g.scale(t.reconstruction, -1.0), g.scale(t.kl, kappa));
    return ExampleLoss{loss, static_cast<double>(t.tokens)};
  };

  VlvReport report;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const double loss = run_epoch(model.params(), view.size(), build, tc, order_rng);
    report.epoch_loss.push_back(loss);
    if (cfg.track_elbo) {
      const ElboSummary s = evaluate_elbo(model, paragraphs, cfg.elbo_seed);
      report.epoch_elbo.push_back(s.elbo);
      report.epoch_reconstruction.push_back(s.reconstruction);
      report.epoch_kl.push_back(s.kl);
    }
    if (tc.on_epoch) tc.on_epoch(epoch, loss);
  }
  return report;
}

}  // namespace coherence::vlv
