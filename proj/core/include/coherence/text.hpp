#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace coherence::text {

using TokenId = std::uint32_t;
using Rng = std::mt19937_64;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kBos = 2;
inline constexpr TokenId kEos = 3;
inline constexpr std::size_t kReservedCount = 4;

using Paragraph = std::vector<std::string>;

struct Corpus {
  std::vector<Paragraph> paragraphs;

  std::size_t sentence_count() const;
};

// Reads one sentence per line; blank lines separate paragraphs. Runs of blank
// lines collapse. Invalid UTF-8 raises FormatError naming the byte offset.
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::string_view content);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Lowercases and splits on ASCII whitespace.
std::vector<std::string> tokenize(std::string_view text);

class Vocab {
 public:
  Vocab();
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  TokenId lookup(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  // FNV-1a over the ordered token list; stored in checkpoint metadata.
  std::uint64_t digest() const;

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

Vocab build_vocab(const Corpus& corpus, std::size_t max_size, std::size_t min_count);

// Token ids followed by EOS. BOS is implicit and never stored.
struct SentenceIds {
  std::vector<TokenId> ids;

  std::size_t length() const { return ids.size(); }
  bool operator==(const SentenceIds&) const = default;
};

using EncodedParagraph = std::vector<SentenceIds>;

SentenceIds encode_sentence(const Vocab& vocab, std::string_view text);
std::vector<std::string> decode_sentence(const Vocab& vocab, const SentenceIds& sentence);
std::string to_string(const Vocab& vocab, const SentenceIds& sentence);
std::vector<EncodedParagraph> encode_corpus(const Vocab& vocab, const Corpus& corpus);

// The sentence used to pad cliques at paragraph edges.
SentenceIds boundary_sentence();

enum class CliqueLabel { kCoherent, kIncoherent };

struct Clique {
  std::vector<SentenceIds> sentences;  // 2L+1 entries, center at index L
  CliqueLabel label = CliqueLabel::kCoherent;
  std::size_t half_window = 1;

  const SentenceIds& center() const { return sentences[half_window]; }
};

std::vector<Clique> make_cliques(std::span<const SentenceIds> paragraph, std::size_t half_window);

Clique sample_negative(const Clique& clique, std::span<const SentenceIds> pool, Rng& rng);

using Permutation = std::vector<std::size_t>;

// Non-identity permutation; result[k] is the original index placed at k.
std::pair<Permutation, EncodedParagraph> permute_paragraph(std::span<const SentenceIds> paragraph,
                                                           Rng& rng);

template <typename T>
std::vector<T> apply_permutation(std::span<const T> items, const Permutation& perm) {
  std::vector<T> out;
  out.reserve(perm.size());
  for (std::size_t index : perm) out.push_back(items[index]);
  return out;
}

class EmbeddingTable {
 public:
  std::size_t size() const { return index_.size(); }
  // Zero until the first row is inserted.
  std::size_t dimension() const { return dim_; }
  bool empty() const { return index_.empty(); }

  void insert(const std::string& token, std::vector<double> vector);
  const std::vector<double>* find(std::string_view token) const;
  void scale(double factor);

 private:
  std::size_t dim_ = 0;
  std::vector<std::vector<double>> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

EmbeddingTable load_embeddings(const std::filesystem::path& path);
EmbeddingTable parse_embeddings(std::string_view content);

// One original/permuted pair per block; the two paragraphs are separated by a
// line "----" and blocks by a blank line.
struct PermutationPair {
  Paragraph original;
  Paragraph permuted;
};

std::vector<PermutationPair> load_permutation_pairs(const std::filesystem::path& path);
std::vector<PermutationPair> parse_permutation_pairs(std::string_view content);
void save_permutation_pairs(std::span<const PermutationPair> pairs,
                            const std::filesystem::path& path);

}  // namespace coherence::text
