#include "coherence/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "coherence/error.hpp"

namespace coherence::text {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error("failed reading file: " + path.string());
  return buffer.str();
}

// Returns the offset of the first byte that breaks UTF-8 well-formedness, or
// npos when the input is valid.
std::size_t first_invalid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    std::uint32_t min_code = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      min_code = 0x80;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      min_code = 0x800;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      min_code = 0x10000;
    } else {
      return i;
    }
    if (i + extra >= s.size()) return i;
    std::uint32_t code = c & (0x3F >> extra);
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return i + k;
      code = (code << 6) | (cc & 0x3F);
    }
    if (code < min_code || code > 0x10FFFF || (code >= 0xD800 && code <= 0xDFFF)) return i;
    i += extra + 1;
  }
  return std::string_view::npos;
}

std::vector<std::string_view> split_lines(std::string_view content) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

constexpr std::string_view kReservedTokens[kReservedCount] = {"<pad>", "<unk>", "<bos>", "<eos>"};

}  // namespace

std::size_t Corpus::sentence_count() const {
  std::size_t n = 0;
  for (const auto& p : paragraphs) n += p.size();
  return n;
}

Corpus parse_corpus(std::string_view content) {
  if (auto bad = first_invalid_utf8(content); bad != std::string_view::npos) {
    throw FormatError("malformed UTF-8 at byte offset " + std::to_string(bad));
  }
  Corpus corpus;
  Paragraph current;
  for (std::string_view line : split_lines(content)) {
    if (is_blank(line)) {
      if (!current.empty()) corpus.paragraphs.push_back(std::move(current));
      current.clear();
      continue;
    }
    current.emplace_back(trim(line));
  }
  if (!current.empty()) corpus.paragraphs.push_back(std::move(current));
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  for (std::size_t p = 0; p < corpus.paragraphs.size(); ++p) {
    if (p > 0) out << '\n';
    for (const auto& sentence : corpus.paragraphs[p]) out << sentence << '\n';
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(std::vector<std::string> tokens) {
  for (auto reserved : kReservedTokens) tokens_.emplace_back(reserved);
  for (auto& token : tokens) {
    if (std::find(std::begin(kReservedTokens), std::end(kReservedTokens), token) !=
        std::end(kReservedTokens)) {
      continue;
    }
    tokens_.push_back(std::move(token));
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) throw Error("duplicate vocabulary token: " + tokens_[i]);
  }
}

TokenId Vocab::lookup(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) throw Error("token id out of range: " + std::to_string(id));
  return tokens_[id];
}

std::uint64_t Vocab::digest() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xFF;
    h *= 1099511628211ULL;
  }
  return h;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  for (std::size_t i = kReservedCount; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  std::vector<std::string> tokens;
  for (std::string_view line : split_lines(content)) {
    auto t = trim(line);
    if (!t.empty()) tokens.emplace_back(t);
  }
  return Vocab(std::move(tokens));
}

Vocab build_vocab(const Corpus& corpus, std::size_t max_size, std::size_t min_count) {
  if (max_size < kReservedCount) throw Error("max_size must leave room for reserved tokens");
  std::map<std::string, std::size_t> counts;
  for (const auto& paragraph : corpus.paragraphs) {
    for (const auto& sentence : paragraph) {
      for (auto& token : tokenize(sentence)) ++counts[token];
    }
  }
  const Vocab reserved;
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [token, count] : counts) {
    if (count >= min_count && !reserved.contains(token)) ranked.emplace_back(token, count);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  for (auto& [token, count] : ranked) {
    if (tokens.size() + kReservedCount >= max_size) break;
    tokens.push_back(token);
  }
  return Vocab(std::move(tokens));
}

SentenceIds encode_sentence(const Vocab& vocab, std::string_view text) {
  auto tokens = tokenize(text);
  if (tokens.empty()) throw Error("cannot encode an empty sentence");
  SentenceIds s;
  s.ids.reserve(tokens.size() + 1);
  for (const auto& t : tokens) s.ids.push_back(vocab.lookup(t));
  s.ids.push_back(kEos);
  return s;
}

std::vector<std::string> decode_sentence(const Vocab& vocab, const SentenceIds& sentence) {
  std::vector<std::string> out;
  for (TokenId id : sentence.ids) {
    if (id == kEos) break;
    out.push_back(vocab.token(id));
  }
  return out;
}

std::string to_string(const Vocab& vocab, const SentenceIds& sentence) {
  std::string out;
  for (const auto& t : decode_sentence(vocab, sentence)) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

std::vector<EncodedParagraph> encode_corpus(const Vocab& vocab, const Corpus& corpus) {
  std::vector<EncodedParagraph> out;
  out.reserve(corpus.paragraphs.size());
  for (const auto& paragraph : corpus.paragraphs) {
    EncodedParagraph encoded;
    for (const auto& s : paragraph) encoded.push_back(encode_sentence(vocab, s));
    out.push_back(std::move(encoded));
  }
  return out;
}

SentenceIds boundary_sentence() { return SentenceIds{{kPad}}; }

std::vector<Clique> make_cliques(std::span<const SentenceIds> paragraph, std::size_t half_window) {
  if (half_window < 1) throw Error("clique half window must be >= 1");
  std::vector<Clique> cliques;
  const auto n = static_cast<std::ptrdiff_t>(paragraph.size());
  const auto L = static_cast<std::ptrdiff_t>(half_window);
  for (std::ptrdiff_t center = 0; center < n; ++center) {
    Clique c;
    c.half_window = half_window;
    c.sentences.reserve(2 * half_window + 1);
    for (std::ptrdiff_t k = center - L; k <= center + L; ++k) {
      c.sentences.push_back(k < 0 || k >= n ? boundary_sentence() : paragraph[k]);
    }
    cliques.push_back(std::move(c));
  }
  return cliques;
}

Clique sample_negative(const Clique& clique, std::span<const SentenceIds> pool, Rng& rng) {
  if (pool.empty()) throw Error("negative pool is empty");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  Clique negative = clique;
  negative.sentences[clique.half_window] = pool[pick(rng)];
  negative.label = CliqueLabel::kIncoherent;
  return negative;
}

std::pair<Permutation, EncodedParagraph> permute_paragraph(std::span<const SentenceIds> paragraph,
                                                           Rng& rng) {
  if (paragraph.size() < 2) throw Error("permutation needs at least 2 sentences");
  Permutation perm(paragraph.size());
  std::iota(perm.begin(), perm.end(), 0);
  const Permutation identity = perm;
  do {
    std::shuffle(perm.begin(), perm.end(), rng);
  } while (perm == identity);
  return {perm, apply_permutation(paragraph, perm)};
}

void EmbeddingTable::insert(const std::string& token, std::vector<double> vector) {
  if (vector.empty()) throw Error("embedding vector for '" + token + "' is empty");
  if (dim_ == 0 && index_.empty()) dim_ = vector.size();
  if (vector.size() != dim_) {
    throw Error("embedding for '" + token + "' has dimension " + std::to_string(vector.size()) +
                ", expected " + std::to_string(dim_));
  }
  auto [it, inserted] = index_.emplace(token, rows_.size());
  if (inserted) {
    rows_.push_back(std::move(vector));
  } else {
    rows_[it->second] = std::move(vector);
  }
}

const std::vector<double>* EmbeddingTable::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? nullptr : &rows_[it->second];
}

void EmbeddingTable::scale(double factor) {
  for (auto& row : rows_)
    for (double& v : row) v *= factor;
}

EmbeddingTable parse_embeddings(std::string_view content) {
  EmbeddingTable table;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(content)) {
    ++line_no;
    if (is_blank(line)) continue;
    std::istringstream in{std::string(line)};
    std::string token;
    in >> token;
    std::vector<double> values;
    std::string field;
    while (in >> field) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw FormatError("embedding line " + std::to_string(line_no) + ": bad number '" + field +
                          "'");
      }
      values.push_back(v);
    }
    if (values.empty()) {
      throw FormatError("embedding line " + std::to_string(line_no) + ": no vector values");
    }
    if (!table.empty() && values.size() != table.dimension()) {
      throw FormatError("embedding line " + std::to_string(line_no) + ": dimension " +
                        std::to_string(values.size()) + " does not match " +
                        std::to_string(table.dimension()));
    }
    table.insert(token, std::move(values));
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  return parse_embeddings(read_file(path));
}

std::vector<PermutationPair> parse_permutation_pairs(std::string_view content) {
  std::vector<PermutationPair> pairs;
  PermutationPair current;
  bool in_permuted = false;
  std::size_t line_no = 0;
  auto flush = [&] {
    if (current.original.empty() && current.permuted.empty()) return;
    if (!in_permuted || current.original.empty() || current.permuted.empty()) {
      throw FormatError("permutation pair ending at line " + std::to_string(line_no) +
                        " is incomplete");
    }
    pairs.push_back(std::move(current));
    current = {};
    in_permuted = false;
  };
  for (std::string_view line : split_lines(content)) {
    ++line_no;
    if (is_blank(line)) {
      flush();
      continue;
    }
    if (trim(line) == "----") {
      if (in_permuted) throw FormatError("duplicate separator at line " + std::to_string(line_no));
      in_permuted = true;
      continue;
    }
    (in_permuted ? current.permuted : current.original).emplace_back(trim(line));
  }
  flush();
  return pairs;
}

std::vector<PermutationPair> load_permutation_pairs(const std::filesystem::path& path) {
  return parse_permutation_pairs(read_file(path));
}

void save_permutation_pairs(std::span<const PermutationPair> pairs,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i > 0) out << '\n';
    for (const auto& s : pairs[i].original) out << s << '\n';
    out << "----\n";
    for (const auto& s : pairs[i].permuted) out << s << '\n';
  }
}

}  // namespace coherence::text
