#include <numeric>

#include "capsre/data.hpp"

namespace capsre::data {

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count,
                                                    std::size_t batch_size,
                                                    Rng& rng) {
  if (batch_size == 0) throw ContractViolation("batch_size must be >= 1");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

}  // namespace capsre::data
