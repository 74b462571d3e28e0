#pragma once

#include "bagged_rl/rng.hpp"

#include <Eigen/Dense>

namespace bagged_rl {

// N(mean, covariance) over a weight vector, from Bayesian linear regression
// with noise variance sigma^2 and prior N(0, lambda^{-1} I).
struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  double noise_var = 1.0;
  double ridge = 1.0;
  // Lower Cholesky factor of the precision matrix.
  Eigen::MatrixXd precision_chol;

  int dim() const { return static_cast<int>(mean.size()); }
  // mean + L^{-T} z with z ~ N(0, I).
  Eigen::VectorXd sample(Rng& rng) const;
};

// Sigma = (X'X / sigma2 + lambda I)^{-1}, mu = Sigma X'Y / sigma2.
GaussianPosterior posterior_update(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                                   double sigma2, double lambda);

// Same posterior from accumulated X'X and X'Y.
GaussianPosterior posterior_from_moments(const Eigen::MatrixXd& XtX, const Eigen::VectorXd& XtY,
                                         double sigma2, double lambda);

// P(x' beta_{5:8} > 0) under the posterior of the 8-dim Thompson sampling basis.
double ts_prob(const GaussianPosterior& post, const Eigen::Vector4d& x);

}  // namespace bagged_rl
