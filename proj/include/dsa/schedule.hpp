#pragma once

#include <algorithm>
#include <cstdint>

namespace dsa {

/// Linear decay from `start` at iteration 0 to 0 at `decay_steps`, then 0.
inline double linear_epsilon(std::int64_t iter, double start, std::int64_t decay_steps) {
    if (iter <= 0) return start;
    if (decay_steps <= 0 || iter >= decay_steps) return 0.0;
    const double frac = static_cast<double>(iter) / static_cast<double>(decay_steps);
    return std::max(0.0, start * (1.0 - frac));
}

}  // namespace dsa
