#pragma once

#include "robreg/core.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

namespace robreg {

// ---------------------------------------------------------------------------
// Gaussian coefficient prior N(w0, Sigma0) and its penalty matrix M = sigma^2 Sigma0^{-1}.

struct CoefficientPrior {
	Vector mean;
	Matrix covariance;

	CoefficientPrior() = default;
	CoefficientPrior(Vector m, Matrix cov) : mean(std::move(m)), covariance(std::move(cov)) {
		const Index d = mean.size();
		if (covariance.rows() != d || covariance.cols() != d)
			throw InvalidArgument("prior covariance must be " + std::to_string(d) + "x" + std::to_string(d));
		if (!covariance.isApprox(covariance.transpose(), 0.0) &&
		    (covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12)
			throw InvalidArgument("prior covariance is not symmetric");
		if (!mean.allFinite() || !covariance.allFinite())
			throw InvalidArgument("prior contains non-finite values");
		Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance, Eigen::EigenvaluesOnly);
		if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff()))
			throw InvalidArgument("prior covariance is not positive semidefinite");
	}

	static CoefficientPrior isotropic(Vector m, double scale) {
		if (!(scale > 0.0))
			throw InvalidArgument("isotropic prior scale must be positive");
		const Index d = m.size();
		return CoefficientPrior(std::move(m), scale * Matrix::Identity(d, d));
	}

	Index dim() const { return mean.size(); }

	/// Returns s when covariance == s*I exactly, otherwise 0.
	double isotropic_scale() const {
		const double s = covariance(0, 0);
		const Matrix iso = s * Matrix::Identity(dim(), dim());
		return covariance == iso ? s : 0.0;
	}

	double log_density(const Vector &w) const {
		const SpdFactor chol(covariance, "prior covariance");
		const Vector diff = w - mean;
		const double quad = diff.dot(chol.solve(diff));
		return -0.5 * (static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi) + chol.log_determinant() + quad);
	}
};

struct PenaltyMatrix {
	Matrix m;

	PenaltyMatrix() = default;
	explicit PenaltyMatrix(Matrix mat) : m(std::move(mat)) {
		if (m.rows() != m.cols())
			throw InvalidArgument("penalty matrix must be square");
		if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
			throw InvalidArgument("penalty matrix is not symmetric");
	}

	static PenaltyMatrix zero(Index d) { return PenaltyMatrix(Matrix::Zero(d, d)); }
	static PenaltyMatrix scaled_identity(Index d, double s) { return PenaltyMatrix(s * Matrix::Identity(d, d)); }

	Index dim() const { return m.rows(); }
};

/// M = sigma^2 Sigma0^{-1}
inline PenaltyMatrix penalty_from_prior(const CoefficientPrior &prior, double sigma2) {
	if (!(sigma2 > 0.0))
		throw InvalidArgument("sigma2 must be positive");
	const SpdFactor chol(prior.covariance, "prior covariance");
	Matrix m = sigma2 * chol.inverse();
	m = 0.5 * (m + m.transpose());
	return PenaltyMatrix(std::move(m));
}

/// Sigma0 = sigma^2 M^{-1}
inline CoefficientPrior prior_from_penalty(const PenaltyMatrix &penalty, const Vector &mean, double sigma2) {
	if (!(sigma2 > 0.0))
		throw InvalidArgument("sigma2 must be positive");
	const SpdFactor chol(penalty.m, "penalty matrix");
	Matrix cov = sigma2 * chol.inverse();
	cov = 0.5 * (cov + cov.transpose());
	return CoefficientPrior(mean, std::move(cov));
}

// ---------------------------------------------------------------------------
// Per-sample weight priors p_r(r).

struct GammaWeights {
	double shape; // a_r
	double rate;  // b_r
};
struct LogNormalWeights {
	double mu;
	double sigma; // standard deviation of log r
};
struct BetaWeights {
	double a;
	double b;
};

class WeightPrior {
public:
	using Family = std::variant<GammaWeights, LogNormalWeights, BetaWeights>;

	WeightPrior() : WeightPrior(GammaWeights{4.0, 10.0}) {}

	WeightPrior(Family f) : family_(f) { // NOLINT: implicit from a family is convenient
		std::visit(
		    [](const auto &p) {
			    using T = std::decay_t<decltype(p)>;
			    if constexpr (std::is_same_v<T, GammaWeights>) {
				    if (!(p.shape > 0.0) || !(p.rate > 0.0))
					    throw InvalidArgument("gamma weight prior needs shape > 0 and rate > 0");
			    } else if constexpr (std::is_same_v<T, LogNormalWeights>) {
				    if (!std::isfinite(p.mu) || !(p.sigma > 0.0))
					    throw InvalidArgument("log-normal weight prior needs finite mu and sigma > 0");
			    } else {
				    if (!(p.a > 0.0) || !(p.b > 0.0))
					    throw InvalidArgument("beta weight prior needs a > 0 and b > 0");
			    }
		    },
		    family_);
	}

	static WeightPrior gamma(double shape, double rate) { return WeightPrior(GammaWeights{shape, rate}); }
	static WeightPrior lognormal(double mu, double sigma) { return WeightPrior(LogNormalWeights{mu, sigma}); }
	static WeightPrior beta(double a, double b) { return WeightPrior(BetaWeights{a, b}); }

	const Family &family() const { return family_; }
	bool is_gamma() const { return std::holds_alternative<GammaWeights>(family_); }
	const GammaWeights &as_gamma() const { return std::get<GammaWeights>(family_); }

	std::string name() const {
		switch (family_.index()) {
		case 0: return "gamma";
		case 1: return "lognormal";
		default: return "beta";
		}
	}

	bool in_support(double r) const {
		if (!(r >= 0.0))
			return false;
		if (std::holds_alternative<BetaWeights>(family_))
			return r <= 1.0;
		return std::isfinite(r);
	}

	double mean() const {
		return std::visit(
		    [](const auto &p) -> double {
			    using T = std::decay_t<decltype(p)>;
			    if constexpr (std::is_same_v<T, GammaWeights>)
				    return p.shape / p.rate;
			    else if constexpr (std::is_same_v<T, LogNormalWeights>)
				    return std::exp(p.mu + 0.5 * p.sigma * p.sigma);
			    else
				    return p.a / (p.a + p.b);
		    },
		    family_);
	}

	/// Normalized log density; -inf (or +inf for singular shapes) at the boundary.
	double log_density(double r) const {
		if (!in_support(r))
			throw InvalidArgument("weight " + std::to_string(r) + " outside the " + name() + " prior support");
		return std::visit(
		    [r](const auto &p) -> double {
			    using T = std::decay_t<decltype(p)>;
			    constexpr double inf = std::numeric_limits<double>::infinity();
			    if constexpr (std::is_same_v<T, GammaWeights>) {
				    const double norm = p.shape * std::log(p.rate) - std::lgamma(p.shape);
				    if (r == 0.0)
					    return p.shape == 1.0 ? norm : (p.shape > 1.0 ? -inf : inf);
				    return norm + (p.shape - 1.0) * std::log(r) - p.rate * r;
			    } else if constexpr (std::is_same_v<T, LogNormalWeights>) {
				    if (r == 0.0)
					    return -inf;
				    const double z = (std::log(r) - p.mu) / p.sigma;
				    return -std::log(r) - std::log(p.sigma) - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * z * z;
			    } else {
				    const double lbeta = std::lgamma(p.a) + std::lgamma(p.b) - std::lgamma(p.a + p.b);
				    const double left = r == 0.0 ? (p.a == 1.0 ? 0.0 : (p.a > 1.0 ? -inf : inf))
				                                 : (p.a - 1.0) * std::log(r);
				    const double right = r == 1.0 ? (p.b == 1.0 ? 0.0 : (p.b > 1.0 ? -inf : inf))
				                                  : (p.b - 1.0) * std::log1p(-r);
				    return left + right - lbeta;
			    }
		    },
		    family_);
	}

private:
	Family family_;
};

// ---------------------------------------------------------------------------
// Chi-square quantile and the weight-hyperparameter rule.

inline double chi_square_cdf(double x, double dof) {
	if (x <= 0.0)
		return 0.0;
	return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

/// Bisection on the chi-square CDF.
inline double chi_square_quantile(double p, double dof = 1.0) {
	if (!(p > 0.0 && p < 1.0) || !(dof > 0.0))
		throw InvalidArgument("chi_square_quantile needs p in (0,1) and dof > 0");
	double lo = 0.0, hi = std::max(1.0, dof);
	while (chi_square_cdf(hi, dof) < p)
		hi *= 2.0;
	for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
		const double mid = 0.5 * (lo + hi);
		(chi_square_cdf(mid, dof) < p ? lo : hi) = mid;
	}
	return 0.5 * (lo + hi);
}

struct HyperparamCheck {
	bool pass;
	double ratio;       // E_{q2}(r) / E_{q1}(r)
	double mean_fit;    // E_{q1}(r): every point fits exactly
	double mean_misfit; // E_{q2}(r): residual at the 95% chi-square level
};

namespace detail {
inline std::pair<double, double> tilt_levels(double sigma2) {
	const double c1 = -0.5 * std::log(2.0 * std::numbers::pi * sigma2);
	const double c2 = -0.5 * chi_square_quantile(0.95, 1.0) + c1;
	return {c1, c2};
}
} // namespace detail

/// Checks E_{q2}(r) >= beta * E_{q1}(r) for a gamma weight prior.
inline HyperparamCheck check_weight_hyperparams(const WeightPrior &prior, double sigma2, double beta = 0.5) {
	if (!prior.is_gamma())
		throw InvalidArgument("the closed-form hyperparameter check applies to gamma weight priors");
	if (!(sigma2 > 0.0))
		throw InvalidArgument("sigma2 must be positive");
	if (!(beta > 0.0 && beta < 1.0))
		throw InvalidArgument("beta must lie in (0, 1)");
	const auto [c1, c2] = detail::tilt_levels(sigma2);
	const auto &g = prior.as_gamma();
	if (g.rate <= std::max(c1, c2))
		throw InvalidHyperparameter("rate " + std::to_string(g.rate) + " does not exceed " +
		                            std::to_string(std::max(c1, c2)) + "; the tilted weight posterior is improper");
	const double e1 = g.shape / (g.rate - c1);
	const double e2 = g.shape / (g.rate - c2);
	return {e2 / e1 >= beta, e2 / e1, e1, e2};
}

/// Smallest gamma rate b_r with E_{q2}(r) = beta * E_{q1}(r) (independent of the shape).
inline double minimal_weight_rate(double sigma2, double beta = 0.5) {
	if (!(sigma2 > 0.0) || !(beta > 0.0 && beta < 1.0))
		throw InvalidArgument("minimal_weight_rate needs sigma2 > 0 and beta in (0,1)");
	const auto [c1, c2] = detail::tilt_levels(sigma2);
	return c1 + beta * (c1 - c2) / (1.0 - beta);
}

// ---------------------------------------------------------------------------
// Least absolute deviations by iteratively reweighted least squares.

struct LadResult {
	Vector w;
	bool converged = false;
	int iterations = 0;
	double objective = 0.0;
	std::vector<double> objective_trace; // sum |r_i| after each iterate, starting from the OLS start
};

inline LadResult lad_fit(const Dataset &data, double tol = 1e-10, int max_iter = 500) {
	if (data.d() > data.n())
		throw InvalidArgument("lad_fit needs d <= n");
	if (!(tol > 0.0) || max_iter < 1)
		throw InvalidArgument("lad_fit needs tol > 0 and max_iter >= 1");

	const Matrix &x = data.x();
	const Vector &y = data.y();
	const double floor = 1e-6 * (1.0 + y.cwiseAbs().maxCoeff());

	LadResult out;
	Vector w = ordinary_least_squares(data);
	double obj = residuals(data, w).cwiseAbs().sum();
	out.objective_trace.push_back(obj);
	Vector best = w;
	double best_obj = obj;

	for (int it = 1; it <= max_iter; ++it) {
		const Vector r = y - x.transpose() * w;
		const Vector weights = r.cwiseAbs().cwiseMax(floor).cwiseInverse();
		const Matrix wx = x * weights.asDiagonal();
		const SpdFactor system(wx * x.transpose(), "weighted LAD system");
		w = system.solve(wx * y);
		const double next = residuals(data, w).cwiseAbs().sum();
		out.objective_trace.push_back(next);
		out.iterations = it;
		if (next < best_obj) {
			best_obj = next;
			best = w;
		}
		if (std::abs(obj - next) <= tol * (1.0 + next)) {
			out.converged = true;
			obj = next;
			break;
		}
		obj = next;
	}
	out.w = best;
	out.objective = best_obj;
	return out;
}

} // namespace robreg
