#include "cli/config.hpp"

#include <charconv>
#include <fstream>

#include "coherence/error.hpp"

namespace coherence::cli {

const std::vector<std::pair<std::string, std::string>>& Config::defaults() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"seed", "42"},          {"threads", "1"},
      {"vocab_size", "50000"}, {"min_count", "1"},
      {"embed_dim", "100"},    {"hidden_dim", "100"},
      {"context_dim", "100"},  {"latent_dim", "16"},
      {"window", "3"},         {"anneal_steps", "5000"},
      {"topics", "20"},        {"topic_dim", "100"},
      {"alpha", "0.1"},        {"beta", "0.01"},
      {"sweeps", "200"},       {"half_window", "1"},
      {"negatives", "1"},      {"negative_pool", "corpus"},
      {"word_hidden", "64"},   {"sent_hidden", "64"},
      {"epochs", "30"},        {"batch_size", "16"},
      {"learning_rate", "0.1"}, {"clip", "5"},
      {"init_scale", "0.08"},  {"beam_size", "10"},
      {"nbest", "10"},         {"max_len", "40"},
      {"classes", "24"},
  };
  return table;
}

Config::Config() {
  for (const auto& [k, v] : defaults()) values_.emplace(k, v);
}

void Config::set(std::string_view key, std::string value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("unknown config key '" + std::string(key) + "'");
  it->second = std::move(value);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    try {
      set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    } catch (const Error& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

const std::string& Config::str(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error("unknown config key '" + std::string(key) + "'");
  return it->second;
}

std::uint64_t Config::u64(std::string_view key) const {
  const std::string& v = str(key);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw Error("config key '" + std::string(key) + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t Config::size(std::string_view key) const { return static_cast<std::size_t>(u64(key)); }

double Config::real(std::string_view key) const {
  const std::string& v = str(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error("config key '" + std::string(key) + "' expects a number, got '" + v + "'");
}

TrainConfig Config::train() const {
  TrainConfig t;
  t.epochs = size("epochs");
  t.batch_size = size("batch_size");
  t.learning_rate = real("learning_rate");
  t.clip = real("clip");
  t.init_scale = real("init_scale");
  t.seed = u64("seed");
  return t;
}

BeamConfig Config::beam() const { return {size("beam_size"), size("nbest"), size("max_len")}; }

seq2seq::Seq2SeqConfig Config::seq2seq() const { return {size("embed_dim"), size("hidden_dim"), train()}; }

hmmlda::HmmLdaConfig Config::topics() const {
  hmmlda::HmmLdaConfig c;
  c.topics = size("topics");
  c.alpha = real("alpha");
  c.beta = real("beta");
  c.sweeps = size("sweeps");
  c.seed = u64("seed");
  return c;
}

hmmlda::GmConfig Config::gm() const {
  return {size("embed_dim"), size("hidden_dim"), size("topic_dim"), train()};
}

vlv::VlvConfig Config::vlv() const {
  vlv::VlvConfig c;
  c.embed_dim = size("embed_dim");
  c.hidden_dim = size("hidden_dim");
  c.context_dim = size("context_dim");
  c.latent_dim = size("latent_dim");
  c.window = size("window");
  c.anneal_steps = size("anneal_steps");
  c.train = train();
  return c;
}

discrim::DiscrimConfig Config::discrim() const {
  discrim::DiscrimConfig c;
  c.embed_dim = size("embed_dim");
  c.hidden_dim = size("hidden_dim");
  c.half_window = size("half_window");
  c.negatives_per_positive = size("negatives");
  const std::string& pool = str("negative_pool");
  if (pool == "corpus") {
    c.pool = discrim::NegativePool::kCorpus;
  } else if (pool == "document") {
    c.pool = discrim::NegativePool::kDocument;
  } else {
    throw Error("negative_pool must be 'corpus' or 'document', got '" + pool + "'");
  }
  c.train = train();
  return c;
}

eval::AdversaryConfig Config::adversary() const {
  return {size("embed_dim"), size("word_hidden"), size("sent_hidden"), train()};
}

std::string Config::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

}  // namespace coherence::cli
