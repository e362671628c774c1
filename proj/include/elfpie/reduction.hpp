#pragma once

#include <cstddef>
#include <span>

namespace elfpie {

// Pairwise (cascade) summation in a fixed tree over the index range; the
// association depends only on the length, never on scheduling.
template <typename T>
T pairwise_sum(std::span<const T> values) {
  const std::size_t n = values.size();
  if (n == 0) return T{};
  if (n == 1) return values[0];
  if (n == 2) return values[0] + values[1];
  const std::size_t half = n / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace elfpie
