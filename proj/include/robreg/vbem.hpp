#pragma once

// Variational Bayes EM for the reweighted likelihood: q(w) = N(w_N, V_N), q(r_i) tilted weight posteriors.

#include "robreg/core.hpp"
#include "robreg/priors.hpp"
#include "robreg/weight_posterior.hpp"

#include <cmath>
#include <numbers>
#include <optional>

namespace robreg {

struct VariationalPosterior {
	Vector w_mean;        // w_N
	Matrix w_cov;         // V_N
	Vector weight_expect; // E_q[r_i]
	Vector weight_mode;   // per-point MAP of q(r_i)
	Vector weight_shape;  // gamma a_N^i (NaN for other families)
	Vector weight_rate;   // gamma b_N^i (NaN for other families)
};

/// E_q(w)[log l_i] = -[(y_i - w_N^T x_i)^2 + x_i^T V_N x_i] / (2 sigma^2) - log(2 pi sigma^2) / 2
inline double expected_log_lik(double y_i, const Vector &x_i, const VariationalPosterior &post, double sigma2) {
	if (!(sigma2 > 0.0))
		throw InvalidArgument("sigma2 must be positive");
	if (x_i.size() != post.w_mean.size())
		throw InvalidArgument("expected_log_lik: covariate dimension mismatch");
	const double r = y_i - post.w_mean.dot(x_i);
	const double q = x_i.dot(post.w_cov * x_i);
	return -(r * r + q) / (2.0 * sigma2) - 0.5 * std::log(2.0 * std::numbers::pi * sigma2);
}

namespace detail {

// All expected log-likelihoods at once; the quadratic forms come from a Cholesky factor of V_N^{-1} when given.
inline Vector expected_log_liks(const Dataset &data, const VariationalPosterior &post, double sigma2,
                                const Eigen::LLT<Matrix> *precision = nullptr) {
	const Matrix &x = data.x();
	const Vector r = data.y() - x.transpose() * post.w_mean;
	Vector q;
	if (precision) {
		q = precision->matrixL().solve(x).colwise().squaredNorm().transpose();
	} else {
		q = (x.array() * (post.w_cov * x).array()).colwise().sum().transpose();
	}
	const double c0 = -0.5 * std::log(2.0 * std::numbers::pi * sigma2);
	return (-(r.array().square() + q.array()) / (2.0 * sigma2) + c0).matrix();
}

inline void fill_weights(VariationalPosterior &post, const Vector &c, const WeightPrior &prior) {
	const Index n = c.size();
	post.weight_expect.resize(n);
	post.weight_mode.resize(n);
	post.weight_shape.setConstant(n, std::numeric_limits<double>::quiet_NaN());
	post.weight_rate.setConstant(n, std::numeric_limits<double>::quiet_NaN());
	if (prior.is_gamma()) {
		const auto &g = prior.as_gamma();
		for (Index i = 0; i < n; ++i) {
			const double rate = g.rate - c[i];
			if (!(rate > 0.0))
				throw InvalidHyperparameter("weight posterior for point " + std::to_string(i) +
				                            " is improper: b_r - E[log l] = " + std::to_string(rate));
			post.weight_shape[i] = g.shape;
			post.weight_rate[i] = rate;
			post.weight_expect[i] = g.shape / rate;
			post.weight_mode[i] = std::max(0.0, (g.shape - 1.0) / rate);
		}
		return;
	}
	for (Index i = 0; i < n; ++i) {
		try {
			const TiltedWeight t = tilted_quadrature(prior, c[i]);
			post.weight_expect[i] = t.mean;
			post.weight_mode[i] = t.mode;
		} catch (const NumericError &e) {
			throw NumericError(std::string(e.what()) + " at point " + std::to_string(i));
		}
	}
}

} // namespace detail

/// Updates q(r) given q(w).
inline void e_step(const Dataset &data, VariationalPosterior &post, const WeightPrior &prior, double sigma2) {
	if (!(sigma2 > 0.0))
		throw InvalidArgument("sigma2 must be positive");
	detail::fill_weights(post, detail::expected_log_liks(data, post, sigma2), prior);
}

struct GaussianUpdate {
	Vector w_mean;
	Matrix w_cov;
	Eigen::LLT<Matrix> precision; // Cholesky of V_N^{-1}
};

/// Precision of the coefficient prior, computed once per fit.
inline Matrix prior_precision(const CoefficientPrior &prior) {
	const SpdFactor chol(prior.covariance, "prior covariance");
	Matrix p = chol.inverse();
	return 0.5 * (p + p.transpose());
}

inline GaussianUpdate m_step(const Dataset &data, const Vector &weight_expect, const CoefficientPrior &coef_prior,
                             double sigma2, const Matrix &precision0) {
	if (!(sigma2 > 0.0))
		throw InvalidArgument("sigma2 must be positive");
	if (weight_expect.size() != data.n() || (weight_expect.array() < 0.0).any())
		throw InvalidArgument("m_step needs n nonnegative weights");
	if (coef_prior.dim() != data.d())
		throw InvalidArgument("m_step: coefficient prior dimension mismatch");
	const Matrix &x = data.x();
	const Matrix xe = x * weight_expect.asDiagonal();
	Matrix a = xe * x.transpose() / sigma2 + precision0;
	a = 0.5 * (a + a.transpose());
	const SpdFactor fac(a, "posterior precision");
	GaussianUpdate out;
	out.w_mean = fac.solve(xe * data.y() / sigma2 + precision0 * coef_prior.mean);
	out.w_cov = fac.inverse();
	out.w_cov = 0.5 * (out.w_cov + out.w_cov.transpose());
	out.precision = fac.llt();
	return out;
}

inline GaussianUpdate m_step(const Dataset &data, const Vector &weight_expect, const CoefficientPrior &coef_prior,
                             double sigma2) {
	return m_step(data, weight_expect, coef_prior, sigma2, prior_precision(coef_prior));
}

struct VbemOptions {
	double tol = 1e-6;
	int max_iter = 100;
};

struct VbemResult {
	VariationalPosterior posterior;
	int iterations = 0;
	bool converged = false;
};

/// Posterior at the prior: w_N = w0, V_N = Sigma0, weights at the prior mean.
inline VariationalPosterior initial_posterior(const Dataset &data, const WeightPrior &weight_prior,
                                              const CoefficientPrior &coef_prior) {
	VariationalPosterior post;
	post.w_mean = coef_prior.mean;
	post.w_cov = coef_prior.covariance;
	post.weight_expect = Vector::Constant(data.n(), weight_prior.mean());
	post.weight_mode = post.weight_expect;
	post.weight_shape = Vector::Constant(data.n(), std::numeric_limits<double>::quiet_NaN());
	post.weight_rate = post.weight_shape;
	return post;
}

inline VbemResult vbem_fit(const Dataset &data, const WeightPrior &weight_prior, const CoefficientPrior &coef_prior,
                           double sigma2, const VbemOptions &opt = {},
                           const std::optional<VariationalPosterior> &warm = std::nullopt,
                           const Matrix *precision0 = nullptr) {
	if (!(sigma2 > 0.0))
		throw InvalidArgument("sigma2 must be positive");
	if (coef_prior.dim() != data.d())
		throw InvalidArgument("vbem_fit: coefficient prior dimension mismatch");
	if (opt.max_iter < 1 || !(opt.tol > 0.0))
		throw InvalidArgument("vbem_fit needs tol > 0 and max_iter >= 1");

	const Matrix own_precision = precision0 ? Matrix() : prior_precision(coef_prior);
	const Matrix &p0 = precision0 ? *precision0 : own_precision;

	VbemResult res;
	res.posterior = warm ? *warm : initial_posterior(data, weight_prior, coef_prior);
	if (res.posterior.w_mean.size() != data.d() || res.posterior.weight_expect.size() != data.n())
		throw InvalidArgument("vbem_fit: warm start has the wrong shape");

	std::optional<Eigen::LLT<Matrix>> precision;
	for (int it = 1; it <= opt.max_iter; ++it) {
		const Vector c = detail::expected_log_liks(data, res.posterior, sigma2, precision ? &*precision : nullptr);
		detail::fill_weights(res.posterior, c, weight_prior);
		GaussianUpdate g = m_step(data, res.posterior.weight_expect, coef_prior, sigma2, p0);
		const double change = (g.w_mean - res.posterior.w_mean).norm();
		res.posterior.w_mean = std::move(g.w_mean);
		res.posterior.w_cov = std::move(g.w_cov);
		precision = std::move(g.precision);
		res.iterations = it;
		if (change <= opt.tol) {
			res.converged = true;
			break;
		}
	}
	return res;
}

} // namespace robreg
