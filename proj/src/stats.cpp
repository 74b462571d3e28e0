#include "bagged_rl/stats.hpp"

#include "bagged_rl/errors.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>

namespace bagged_rl {

MeanCi mean_ci(const std::vector<double>& x) {
  if (x.size() < 2) throw DegenerateError("a confidence interval needs at least two replications");
  MeanCi r;
  r.n = static_cast<int>(x.size());
  double s = 0.0;
  for (double v : x) s += v;
  r.mean = s / r.n;
  double ss = 0.0;
  for (double v : x) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / (r.n - 1)) / std::sqrt(static_cast<double>(r.n));
  r.lo = r.mean - 1.96 * r.se;
  r.hi = r.mean + 1.96 * r.se;
  return r;
}

PairedTest paired_t_greater(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeError("paired samples differ in length");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  MeanCi m = mean_ci(d);
  PairedTest t;
  t.mean_diff = m.mean;
  t.se = m.se;
  t.df = m.n - 1;
  if (m.se == 0.0) {
    t.t = m.mean > 0 ? INFINITY : (m.mean < 0 ? -INFINITY : 0.0);
    t.p = m.mean > 0 ? 0.0 : (m.mean < 0 ? 1.0 : 0.5);
    return t;
  }
  t.t = m.mean / m.se;
  boost::math::students_t dist(t.df);
  t.p = boost::math::cdf(boost::math::complement(dist, t.t));
  return t;
}

}  // namespace bagged_rl
