#pragma once

#include <vector>

namespace bagged_rl {

struct MeanCi {
  double mean = 0.0, se = 0.0, lo = 0.0, hi = 0.0;
  int n = 0;
};

// Normal-approximation interval mean +/- 1.96 se, se = sd / sqrt(n) with the
// n - 1 sample sd. Throws DegenerateError for fewer than two values.
MeanCi mean_ci(const std::vector<double>& x);

struct PairedTest {
  double mean_diff = 0.0, se = 0.0, t = 0.0, p = 1.0;
  int df = 0;
};

// One-sided paired t-test of mean(x - y) > 0.
PairedTest paired_t_greater(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace bagged_rl
