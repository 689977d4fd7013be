#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>

namespace unravel {

/// Pairwise (cascade) sum. The bracketing depends only on items.size(), so
/// the result is reproducible bit for bit. T needs copy and operator+.
template <typename T>
T pairwise_sum(std::span<const T> items) {
  if (items.empty()) throw std::invalid_argument("pairwise_sum: empty range");
  if (items.size() == 1) return items[0];
  if (items.size() == 2) return items[0] + items[1];
  const std::size_t half = items.size() / 2;
  return pairwise_sum(items.first(half)) + pairwise_sum(items.subspan(half));
}

}  // namespace unravel
