#include "bagged_rl/posterior.hpp"

#include "bagged_rl/errors.hpp"

#include <cmath>

namespace bagged_rl {

Eigen::VectorXd GaussianPosterior::sample(Rng& rng) const {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = std_normal(rng);
  return mean + precision_chol.transpose().triangularView<Eigen::Upper>().solve(z);
}

GaussianPosterior posterior_from_moments(const Eigen::MatrixXd& XtX, const Eigen::VectorXd& XtY,
                                         double sigma2, double lambda) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw NumericError("sigma2 must be positive and finite");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw NumericError("lambda must be positive and finite");
  if (XtX.rows() != XtX.cols() || XtX.rows() != XtY.size() || XtX.rows() < 1)
    throw ShapeError("moment shapes do not match");
  if (!XtX.allFinite() || !XtY.allFinite()) throw NumericError("non-finite regression data");
  const Eigen::Index p = XtX.rows();
  Eigen::MatrixXd precision = XtX / sigma2;
  precision.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericError("precision matrix is not positive definite");
  GaussianPosterior post;
  post.noise_var = sigma2;
  post.ridge = lambda;
  post.mean = llt.solve(XtY / sigma2);
  post.covariance = llt.solve(Eigen::MatrixXd::Identity(p, p));
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose()).eval();
  post.precision_chol = llt.matrixL();
  return post;
}

GaussianPosterior posterior_update(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                                   double sigma2, double lambda) {
  if (X.rows() != Y.size()) throw ShapeError("X and Y have different row counts");
  if (!X.allFinite() || !Y.allFinite()) throw NumericError("non-finite regression data");
  Eigen::MatrixXd XtX = X.transpose() * X;
  Eigen::VectorXd XtY = X.transpose() * Y;
  return posterior_from_moments(XtX, XtY, sigma2, lambda);
}

double ts_prob(const GaussianPosterior& post, const Eigen::Vector4d& x) {
  if (post.dim() != 8) throw ShapeError("ts_prob needs the 8-dim basis posterior");
  const double m = x.dot(post.mean.segment<4>(4));
  const double s2 = x.dot(post.covariance.block<4, 4>(4, 4) * x);
  const double s = std::sqrt(std::max(0.0, s2));
  if (s == 0.0) return m > 0.0 ? 1.0 : (m < 0.0 ? 0.0 : 0.5);
  return 0.5 * std::erfc(-(m / s) / std::sqrt(2.0));
}

}  // namespace bagged_rl
