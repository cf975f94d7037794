#pragma once

#include <string>
#include <vector>

#include "coherence/gradcheck.hpp"

namespace coherence::cli {

struct SuiteEntry {
  std::string model;
  GradCheckReport report;
};

inline const std::vector<std::string>& gradient_models() {
  static const std::vector<std::string> names = {"lm", "seq2seq", "hmmlda-gm", "vlv", "discrim", "adversary"};
  return names;
}

// Finite-difference checks of every trainable model on fixed tiny instances.
// `model` is one of gradient_models() or "all".
std::vector<SuiteEntry> run_gradient_suite(const std::string& model = "all");

}  // namespace coherence::cli
