#include "coherence/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "coherence/error.hpp"

namespace coherence {

double run_epoch(ParamStore& params, std::size_t count, const ExampleBuilder& build,
                 const TrainConfig& config, std::mt19937_64& rng) {
  if (count == 0) throw Error("training set is empty");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  double loss_sum = 0.0;
  double weight_sum = 0.0;
  Gradients grads;
  for (std::size_t start = 0; start < count; start += batch) {
    const std::size_t end = std::min(count, start + batch);
    grads.clear();
    for (std::size_t k = start; k < end; ++k) {
      Graph g(params);
      ExampleLoss ex = build(g, order[k]);
      loss_sum += g.scalar(ex.loss);
      weight_sum += ex.weight;
      g.backward(ex.loss);
      g.accumulate_gradients(grads, 1.0 / static_cast<double>(end - start));
    }
    adagrad_step(params, grads, config.learning_rate, config.clip);
  }
  return weight_sum > 0 ? loss_sum / weight_sum : 0.0;
}

}  // namespace coherence
