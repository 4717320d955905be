#pragma once

// Bayesian reweighting with hard thresholding: VBEM on (X, y - b^t) alternated with HT_k of the residuals.

#include "robreg/trip.hpp"
#include "robreg/vbem.hpp"

#include <functional>
#include <numbers>

namespace robreg {

namespace detail {

inline double log_lik(double residual, double sigma2) {
	return -residual * residual / (2.0 * sigma2) - 0.5 * std::log(2.0 * std::numbers::pi * sigma2);
}

inline double weight_term(const WeightPrior &prior, double r, double loglik) {
	if (!prior.in_support(r))
		throw InvalidArgument("weight " + std::to_string(r) + " outside the " + prior.name() + " prior support");
	return prior.log_density(r) + r * loglik;
}

inline void check_objective_args(const Dataset &data, const CoefficientPrior &coef_prior, const Vector &w,
                                 const Vector &r, double sigma2) {
	if (!(sigma2 > 0.0))
		throw InvalidArgument("sigma2 must be positive");
	if (w.size() != data.d() || coef_prior.dim() != data.d())
		throw InvalidArgument("objective: coefficient dimension mismatch");
	if (r.size() != data.n())
		throw InvalidArgument("objective: weight vector must have length n");
}

} // namespace detail

/// U(w, r, S) = log p_w(w) + sum_{i in S} [log p_r(r_i) + r_i log l(y_i | w)]
inline double objective_u(const Dataset &data, const WeightPrior &weight_prior, const CoefficientPrior &coef_prior,
                          double sigma2, const Vector &w, const Vector &r, const IndexSet &s) {
	detail::check_objective_args(data, coef_prior, w, r, sigma2);
	const Vector res = residuals(data, w);
	double total = coef_prior.log_density(w);
	for (Index i : s) {
		if (i < 0 || i >= data.n())
			throw InvalidArgument("objective_u: index outside the sample range");
		total += detail::weight_term(weight_prior, r[i], detail::log_lik(res[i], sigma2));
	}
	return total;
}

/// M(w, r, b) = log p_w(w) + sum_i [log p_r(r_i) + r_i log l(y_i - b_i | w)]
inline double objective_m(const Dataset &data, const WeightPrior &weight_prior, const CoefficientPrior &coef_prior,
                          double sigma2, const Vector &w, const Vector &r, const Vector &b) {
	detail::check_objective_args(data, coef_prior, w, r, sigma2);
	if (b.size() != data.n())
		throw InvalidArgument("objective_m: b must have length n");
	const Vector res = residuals(data, w) - b;
	double total = coef_prior.log_density(w);
	for (Index i = 0; i < data.n(); ++i)
		total += detail::weight_term(weight_prior, r[i], detail::log_lik(res[i], sigma2));
	return total;
}

struct BrhtOptions {
	double tol = -1.0; // negative: 1e-4 * ||y||_2
	int max_iter = 100;
	VbemOptions vbem{1e-6, 50};
	const Truth *truth = nullptr;
	bool track_u = true;
	// called after each outer step with (t, b^t, w_t) where w_t is the VBEM mean on y - b^t
	std::function<void(int, const Vector &, const Vector &)> observer;
};

struct BrhtResult {
	FitReport report;
	VariationalPosterior posterior;
};

inline BrhtResult brht_fit(const Dataset &data, const WeightPrior &weight_prior, const CoefficientPrior &coef_prior,
                           double sigma2, Index k, const BrhtOptions &opt = {}) {
	const Index n = data.n();
	detail::check_k(k, n);
	if (opt.max_iter < 1)
		throw InvalidArgument("max_iter must be at least 1");
	if (!(sigma2 > 0.0))
		throw InvalidArgument("sigma2 must be positive");
	const double tol = detail::resolve_tol(opt.tol, data.y());
	const Matrix precision0 = prior_precision(coef_prior);

	BrhtResult out;
	FitReport &rep = out.report;
	if (opt.truth)
		rep.k_below_truth = k < opt.truth->b_star.count();

	SparseCorruption b{Vector::Zero(n), {}};
	std::optional<VariationalPosterior> warm;
	std::vector<IndexSet> history;

	for (int t = 1; t <= opt.max_iter; ++t) {
		const Dataset shifted = data.with_responses(data.y() - b.values);
		VbemResult vb = vbem_fit(shifted, weight_prior, coef_prior, sigma2, opt.vbem, warm, &precision0);
		const Vector &w = vb.posterior.w_mean;
		if (opt.observer)
			opt.observer(t, b.values, w);

		SparseCorruption next = hard_threshold(data.y() - data.x().transpose() * w, k);
		IterationRecord rec;
		rec.delta = (next.values - b.values).norm();
		if (opt.truth) {
			rec.err_w = (w - opt.truth->w_star).norm();
			rec.err_b = (next.values - opt.truth->b_star.values).norm();
		}
		rec.support = next.support;
		if (opt.track_u) {
			rec.objective = objective_u(data, weight_prior, coef_prior, sigma2, w, vb.posterior.weight_mode,
			                            complement(next.support, n));
			rep.u_trace.push_back(rec.objective);
		}
		history.push_back(next.support);
		rep.trace.push_back(std::move(rec));
		rep.iterations = t;

		b = std::move(next);
		warm = vb.posterior;
		out.posterior = std::move(vb.posterior);
		if (rep.trace.back().delta <= tol) {
			rep.converged = true;
			break;
		}
		if (detail::support_cycle(history)) {
			rep.cycled = true;
			break;
		}
	}
	rep = detail::finish(data, std::move(rep), b, out.posterior.w_mean, false);
	return out;
}

} // namespace robreg
