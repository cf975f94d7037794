#include "coherence/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "coherence/error.hpp"

namespace coherence::eval {

using text::SentenceIds;

double binary_accuracy(std::span<const double> original, std::span<const double> permuted) {
  if (original.size() != permuted.size()) throw Error("score lists differ in length");
  if (original.empty()) throw Error("binary accuracy needs at least one pair");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    if (original[i] > permuted[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(original.size());
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

BinaryResult binary_accuracy(const DocumentScorer& scorer, std::span<const ParagraphPair> pairs,
                             std::size_t threads) {
  BinaryResult r;
  r.original_scores.resize(pairs.size());
  r.permuted_scores.resize(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    r.original_scores[i] = scorer(pairs[i].original);
    r.permuted_scores[i] = scorer(pairs[i].permuted);
  });
  r.accuracy = binary_accuracy(r.original_scores, r.permuted_scores);
  return r;
}

namespace {

std::size_t merge_count(std::vector<std::size_t>& v, std::vector<std::size_t>& tmp, std::size_t lo,
                        std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::size_t inv = merge_count(v, tmp, lo, mid) + merge_count(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += mid - i;
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo), tmp.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

void check_permutation(std::span<const std::size_t> p, std::size_t n) {
  if (p.size() != n) throw Error("ordering has " + std::to_string(p.size()) + " entries, expected " + std::to_string(n));
  std::vector<bool> seen(n, false);
  for (std::size_t v : p) {
    if (v >= n || seen[v]) throw Error("ordering is not a permutation of 0.." + std::to_string(n - 1));
    seen[v] = true;
  }
}

}  // namespace

std::size_t count_inversions(std::span<const std::size_t> predicted) {
  check_permutation(predicted, predicted.size());
  std::vector<std::size_t> v(predicted.begin(), predicted.end());
  std::vector<std::size_t> tmp(v.size());
  return merge_count(v, tmp, 0, v.size());
}

double kendall_tau(std::span<const std::size_t> predicted, std::size_t n) {
  if (n < 2) throw Error("Kendall tau needs N >= 2");
  check_permutation(predicted, n);
  const double inv = static_cast<double>(count_inversions(predicted));
  return 1.0 - 2.0 * inv / static_cast<double>(n * (n - 1));
}

double standard_kendall_tau(std::span<const std::size_t> predicted, std::size_t n) {
  if (n < 2) throw Error("Kendall tau needs N >= 2");
  check_permutation(predicted, n);
  const double inv = static_cast<double>(count_inversions(predicted));
  return 1.0 - 4.0 * inv / static_cast<double>(n * (n - 1));
}

OrderingScorer pairwise(std::function<double(std::size_t, std::size_t)> score) {
  return [score = std::move(score)](std::span<const std::size_t> prefix, std::size_t next) {
    return score(prefix.back(), next);
  };
}

OrderingResult reconstruct(const OrderingScorer& scorer, std::size_t n, std::size_t beam_size,
                           std::span<const std::size_t> truth) {
  if (n < 2) throw Error("reconstruction needs N >= 2");
  if (beam_size == 0) throw Error("beam size must be positive");
  std::vector<std::size_t> identity(n);
  for (std::size_t i = 0; i < n; ++i) identity[i] = i;
  if (truth.empty()) truth = identity;
  check_permutation(truth, n);
  if (truth[0] != 0) throw Error("the true order must start with bag sentence 0");

  struct State {
    std::vector<std::size_t> order;
    std::vector<bool> used;
    double score = 0.0;
  };
  std::vector<State> beam(1);
  beam[0].order = {0};
  beam[0].used.assign(n, false);
  beam[0].used[0] = true;
  OrderingResult result;
  result.trace.push_back(beam[0].order);

  for (std::size_t depth = 1; depth < n; ++depth) {
    std::vector<State> next;
    for (const auto& s : beam) {
      for (std::size_t j = 0; j < n; ++j) {
        if (s.used[j]) continue;
        State e = s;
        e.score += scorer(s.order, j);
        e.order.push_back(j);
        e.used[j] = true;
        next.push_back(std::move(e));
      }
    }
    std::stable_sort(next.begin(), next.end(), [](const State& a, const State& b) { return a.score > b.score; });
    if (next.size() > beam_size) next.resize(beam_size);
    beam = std::move(next);
    result.trace.push_back(beam.front().order);
  }

  result.order = beam.front().order;
  result.score = beam.front().score;
  // Rank of each bag index in the true order, then tau of the predicted ranks.
  std::vector<std::size_t> rank(n);
  for (std::size_t k = 0; k < n; ++k) rank[truth[k]] = k;
  std::vector<std::size_t> ranks(n);
  for (std::size_t k = 0; k < n; ++k) ranks[k] = rank[result.order[k]];
  result.tau = kendall_tau(ranks, n);
  result.standard_tau = standard_kendall_tau(ranks, n);
  return result;
}

double cosine_coherence(const text::EmbeddingTable& embeddings, std::span<const std::string> paragraph) {
  if (paragraph.size() < 2) throw Error("cosine coherence needs at least 2 sentences");
  const std::size_t dim = embeddings.dimension();
  std::vector<std::vector<double>> vecs;
  for (const auto& sentence : paragraph) {
    std::vector<double> v(dim, 0.0);
    std::size_t hits = 0;
    for (const auto& tok : text::tokenize(sentence)) {
      if (const auto* e = embeddings.find(tok)) {
        for (std::size_t k = 0; k < dim; ++k) v[k] += (*e)[k];
        ++hits;
      }
    }
    if (hits > 0) {
      for (double& x : v) x /= static_cast<double>(hits);
    }
    vecs.push_back(std::move(v));
  }
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < vecs.size(); ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      dot += vecs[i][k] * vecs[i + 1][k];
      na += vecs[i][k] * vecs[i][k];
      nb += vecs[i + 1][k] * vecs[i + 1][k];
    }
    if (na > 0.0 && nb > 0.0) total += dot / std::sqrt(na * nb);
  }
  return total / static_cast<double>(vecs.size() - 1);
}

std::vector<SentenceIds> generate_turns(const GenerationModels& models, std::vector<SentenceIds> context,
                                        std::size_t turns, const BeamConfig& beam, scorers::Mode rerank) {
  scorers::validate(rerank, {models.forward, models.backward, models.language});
  if (context.empty()) throw Error("generation needs a context");
  std::vector<SentenceIds> out;
  for (std::size_t t = 0; t < turns; ++t) {
    const auto hyps = models.forward->beam_decode(context, beam);
    if (hyps.empty()) throw Error("beam search returned no hypotheses");
    std::size_t best = 0;
    if (rerank != scorers::Mode::kUni) {
      const SentenceIds& last = context.back();
      const double n_last = static_cast<double>(last.length());
      const double lm_last =
          rerank == scorers::Mode::kMmi ? models.language->log_prob({}, last).total : 0.0;
      double best_score = 0.0;
      for (std::size_t h = 0; h < hyps.size(); ++h) {
        const SentenceIds& cand = hyps[h].sentence;
        const double n_cand = static_cast<double>(cand.length());
        const double fwd = models.forward->log_prob(context, cand).total;
        const double bwd = models.backward->log_prob(std::span(&cand, 1), last).total;
        double score = bwd / n_last + fwd / n_cand;
        if (rerank == scorers::Mode::kMmi) {
          score -= lm_last / n_last + models.language->log_prob({}, cand).total / n_cand;
        }
        if (h == 0 || score > best_score) {
          best = h;
          best_score = score;
        }
      }
    }
    out.push_back(hyps[best].sentence);
    context.push_back(hyps[best].sentence);
  }
  return out;
}

}  // namespace coherence::eval
