#pragma once

#include <cstddef>
#include <functional>
#include <random>

#include "coherence/graph.hpp"
#include "coherence/model.hpp"
#include "coherence/params.hpp"

namespace coherence {

// Loss of one example plus its normalizer (token count, or 1 for
// classification). Gradients are taken of the loss as built.
struct ExampleLoss {
  Var loss;
  double weight = 1.0;
};

using ExampleBuilder = std::function<ExampleLoss(Graph&, std::size_t)>;

// One pass over `count` examples in a shuffled order: gradients are summed
// over each minibatch, divided by the batch size and applied with AdaGrad.
// Returns sum(loss) / sum(weight) over the epoch.
double run_epoch(ParamStore& params, std::size_t count, const ExampleBuilder& build,
                 const TrainConfig& config, std::mt19937_64& rng);

}  // namespace coherence
