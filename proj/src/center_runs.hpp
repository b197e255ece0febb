#pragma once

#include <cstddef>
#include <vector>

#include "shapeband/grid.hpp"

namespace shapeband::detail {

/// Calls `fn(first_flat, length)` for each contiguous run (along the last
/// axis) of admissible centres of `steps`, in increasing flat order.
template <typename Fn>
void for_each_center_run(const GridDesign& grid, const std::vector<int>& steps, Fn&& fn) {
  const std::size_t d = steps.size();
  std::vector<CenterRange> ranges(d);
  for (std::size_t i = 0; i < d; ++i) {
    ranges[i] = center_range(grid.m(), steps[i]);
    if (ranges[i].empty()) return;
  }
  const std::size_t last = d - 1;
  const auto run_length = static_cast<std::size_t>(ranges[last].hi - ranges[last].lo + 1);
  std::vector<int> k(d);
  for (std::size_t i = 0; i < d; ++i) k[i] = ranges[i].lo;
  while (true) {
    std::size_t base = static_cast<std::size_t>(ranges[last].lo - 1);
    for (std::size_t i = 0; i < last; ++i) base += static_cast<std::size_t>(k[i] - 1) * grid.stride(static_cast<int>(i));
    fn(base, run_length);
    if (last == 0) return;
    std::size_t axis = last;
    while (true) {
      --axis;
      if (++k[axis] <= ranges[axis].hi) break;
      k[axis] = ranges[axis].lo;
      if (axis == 0) return;
    }
  }
}

}  // namespace shapeband::detail
