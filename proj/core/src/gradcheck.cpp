#include "coherence/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace coherence {
namespace {

double evaluate(const ParamStore& params, const LossBuilder& loss) {
  Graph g(params);
  return g.scalar(loss(g));
}

}  // namespace

GradCheckReport grad_check(ParamStore& params, const LossBuilder& loss, double epsilon,
                           double tolerance, std::size_t samples, std::uint64_t seed) {
  Gradients analytic;
  {
    Graph g(params);
    Var l = loss(g);
    g.backward(l);
    analytic = g.gradients();
  }

  struct Coordinate {
    std::string name;
    std::size_t index;
  };
  std::vector<Coordinate> all;
  for (const auto& [name, p] : params.items()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) all.push_back({name, i});
  }
  std::vector<Coordinate> chosen;
  if (samples == 0 || samples >= all.size()) {
    chosen = all;
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
    for (std::size_t k = 0; k < samples; ++k) chosen.push_back(all[pick(rng)]);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (const auto& c : chosen) {
    double& slot = params.at(c.name).value.data[c.index];
    const double saved = slot;
    slot = saved + epsilon;
    const double up = evaluate(params, loss);
    slot = saved - epsilon;
    const double down = evaluate(params, loss);
    slot = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = analytic.at(c.name).data[c.index];
    const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), kGradCheckFloor);
    ++report.coordinates_checked;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_parameter = c.name;
      report.worst_index = c.index;
    }
  }
  return report;
}

}  // namespace coherence
