#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "coherence/adversary.hpp"
#include "coherence/discrim.hpp"
#include "coherence/hmmlda.hpp"
#include "coherence/model.hpp"
#include "coherence/seq2seq.hpp"
#include "coherence/vlv.hpp"

namespace coherence::cli {

// Flat key=value settings. Every key has a default; a config file overrides
// defaults and command-line flags override the file.
class Config {
 public:
  Config();

  static const std::vector<std::pair<std::string, std::string>>& defaults();

  void set(std::string_view key, std::string value);
  // Lines "key = value"; '#' starts a comment; blank lines are skipped.
  void load_file(const std::filesystem::path& path);

  const std::string& str(std::string_view key) const;
  std::size_t size(std::string_view key) const;
  double real(std::string_view key) const;
  std::uint64_t u64(std::string_view key) const;

  TrainConfig train() const;
  BeamConfig beam() const;
  seq2seq::Seq2SeqConfig seq2seq() const;
  hmmlda::HmmLdaConfig topics() const;
  hmmlda::GmConfig gm() const;
  vlv::VlvConfig vlv() const;
  discrim::DiscrimConfig discrim() const;
  eval::AdversaryConfig adversary() const;

  // Canonical "key=value" lines, sorted by key.
  std::string dump() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace coherence::cli
