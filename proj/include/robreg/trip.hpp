#pragma once

// Prior-penalized hard-thresholding regression and its M = 0 special case (CRR).

#include "robreg/core.hpp"
#include "robreg/priors.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace robreg {

struct IterationRecord {
	double delta = 0.0;                                     // ||b^{t+1} - b^t||_2
	double err_w = std::numeric_limits<double>::quiet_NaN(); // ||w^t - w*||_2 when truth is known
	double err_b = std::numeric_limits<double>::quiet_NaN(); // ||b^{t+1} - b*||_2 when truth is known
	double objective = 0.0;                                  // profile objective at b^{t+1}
	IndexSet support;                                        // supp(b^{t+1})
};

struct FitReport {
	Vector w_hat;
	SparseCorruption b_hat;
	IndexSet support_clean;
	int iterations = 0;
	bool converged = false;
	bool cycled = false;
	bool k_below_truth = false; // k < k* when the true count was supplied
	std::vector<IterationRecord> trace;
	std::vector<double> u_trace; // filled by BRHT only
};

struct Truth {
	Vector w_star;
	SparseCorruption b_star;
};

struct TripOptions {
	double tol = -1.0; // negative: 1e-4 * ||y||_2
	int max_iter = 200;
	bool penalized_final = false;
	const Truth *truth = nullptr;
};

namespace detail {

inline double resolve_tol(double tol, const Vector &y) {
	if (tol < 0.0)
		return 1e-4 * y.norm();
	return tol;
}

inline void check_k(Index k, Index n) {
	if (k < 0 || k >= n)
		throw InvalidArgument("corruption count k=" + std::to_string(k) + " must satisfy 0 <= k < n=" + std::to_string(n));
}

// Repeated alternation A,B,A,B,A,B of supports.
inline bool support_cycle(const std::vector<IndexSet> &history) {
	const std::size_t h = history.size();
	if (h < 6)
		return false;
	const auto &a = history[h - 1], &b = history[h - 2];
	if (a == b)
		return false;
	return history[h - 3] == a && history[h - 4] == b && history[h - 5] == a && history[h - 6] == b;
}

inline FitReport finish(const Dataset &data, FitReport rep, const SparseCorruption &b, const Vector &w_penalized,
                        bool penalized_final) {
	rep.b_hat = b;
	rep.support_clean = complement(b.support, data.n());
	if (penalized_final) {
		rep.w_hat = w_penalized;
	} else {
		rep.w_hat = ordinary_least_squares(data.with_responses(data.y() - b.values));
	}
	return rep;
}

} // namespace detail

/// Penalized solve w(b) = (XX^T + M)^{-1}(X(y - b) + M w0) with a cached factorization.
class PenalizedSolver {
public:
	PenalizedSolver(const Dataset &data, const PenaltyMatrix &penalty, const Vector &w0)
	    : data_(data), m_(penalty.m), w0_(w0), system_(make_system(data, penalty, w0)), mw0_(penalty.m * w0) {}

	Vector solve(const Vector &b) const { return system_.solve(data_.x() * (data_.y() - b) + mw0_); }

	/// y - b - X^T w(b)
	Vector residual(const Vector &b, const Vector &w) const { return data_.y() - b - data_.x().transpose() * w; }

	/// min_w ||X^T w - (y - b)||^2 + (w - w0)^T M (w - w0)
	double profile(const Vector &b) const {
		const Vector w = solve(b);
		const Vector diff = w - w0_;
		return residual(b, w).squaredNorm() + diff.dot(m_ * diff);
	}

	const SpdFactor &factor() const { return system_; }

private:
	static SpdFactor make_system(const Dataset &data, const PenaltyMatrix &penalty, const Vector &w0) {
		const Index d = data.d();
		if (penalty.dim() != d || w0.size() != d)
			throw InvalidArgument("penalty matrix and prior mean must have dimension d=" + std::to_string(d));
		return SpdFactor(data.x() * data.x().transpose() + penalty.m, "XX^T + M");
	}

	const Dataset &data_;
	Matrix m_;
	Vector w0_;
	SpdFactor system_;
	Vector mw0_;
};

/// Sum over S of squared residuals plus (w - w0)^T M (w - w0).
inline double trip_objective(const Dataset &data, const PenaltyMatrix &penalty, const Vector &w0, const Vector &w,
                             const IndexSet &s) {
	if (penalty.dim() != data.d() || w0.size() != data.d())
		throw InvalidArgument("trip_objective: dimension mismatch");
	const Vector r = residuals(data, w);
	double total = 0.0;
	for (Index i : s) {
		if (i < 0 || i >= data.n())
			throw InvalidArgument("trip_objective: index outside the sample range");
		total += r[i] * r[i];
	}
	const Vector diff = w - w0;
	return total + diff.dot(penalty.m * diff);
}

/// f(b) = half the profile objective; its gradient is -(y - b - X^T w(b)).
inline double trip_profile_objective(const Dataset &data, const PenaltyMatrix &penalty, const Vector &w0,
                                     const Vector &b) {
	return 0.5 * PenalizedSolver(data, penalty, w0).profile(b);
}

inline Vector trip_profile_gradient(const Dataset &data, const PenaltyMatrix &penalty, const Vector &w0,
                                    const Vector &b) {
	const PenalizedSolver solver(data, penalty, w0);
	return -solver.residual(b, solver.solve(b));
}

/// One application of the iteration map: HT_k(y - X^T w(b)).
inline SparseCorruption trip_step(const Dataset &data, const PenaltyMatrix &penalty, const Vector &w0, const Vector &b,
                                  Index k) {
	const PenalizedSolver solver(data, penalty, w0);
	return hard_threshold(data.y() - data.x().transpose() * solver.solve(b), k);
}

inline FitReport trip_fit(const Dataset &data, const PenaltyMatrix &penalty, const Vector &w0, Index k,
                          const TripOptions &opt = {}) {
	const Index n = data.n();
	detail::check_k(k, n);
	if (opt.max_iter < 1)
		throw InvalidArgument("max_iter must be at least 1");
	const double tol = detail::resolve_tol(opt.tol, data.y());
	const PenalizedSolver solver(data, penalty, w0);

	FitReport rep;
	if (opt.truth)
		rep.k_below_truth = k < opt.truth->b_star.count();

	SparseCorruption b{Vector::Zero(n), {}};
	SparseCorruption best = b;
	double best_obj = std::numeric_limits<double>::infinity();
	Vector w = solver.solve(b.values);
	Vector best_w = w;
	std::vector<IndexSet> history;

	for (int t = 1; t <= opt.max_iter; ++t) {
		SparseCorruption next = hard_threshold(data.y() - data.x().transpose() * w, k);
		IterationRecord rec;
		rec.delta = (next.values - b.values).norm();
		if (opt.truth) {
			rec.err_w = (w - opt.truth->w_star).norm();
			rec.err_b = (next.values - opt.truth->b_star.values).norm();
		}
		const Vector w_next = solver.solve(next.values);
		rec.objective = [&] {
			const Vector diff = w_next - w0;
			return solver.residual(next.values, w_next).squaredNorm() + diff.dot(penalty.m * diff);
		}();
		rec.support = next.support;
		history.push_back(next.support);
		rep.trace.push_back(rec);
		rep.iterations = t;

		b = std::move(next);
		w = w_next;
		if (rec.objective < best_obj) {
			best_obj = rec.objective;
			best = b;
			best_w = w;
		}
		if (rec.delta <= tol) {
			rep.converged = true;
			return detail::finish(data, std::move(rep), b, w, opt.penalized_final);
		}
		if (detail::support_cycle(history)) {
			rep.cycled = true;
			break;
		}
	}
	return detail::finish(data, std::move(rep), best, best_w, opt.penalized_final);
}

/// CRR in its projection form b <- HT_k(P_X b + (I - P_X) y), with P_X applied through a thin QR of X^T.
/// Same stopping, cycling and best-iterate rules as trip_fit.
inline FitReport crr_fit(const Dataset &data, Index k, const TripOptions &opt = {}) {
	const Index n = data.n(), d = data.d();
	detail::check_k(k, n);
	if (opt.max_iter < 1)
		throw InvalidArgument("max_iter must be at least 1");
	if (d > n)
		throw SingularMatrix("XX^T is singular (d > n)", std::numeric_limits<double>::infinity());
	const double tol = detail::resolve_tol(opt.tol, data.y());

	const Eigen::HouseholderQR<Matrix> qr(data.x().transpose());
	const Matrix q = qr.householderQ() * Matrix::Identity(n, d);
	const Vector rdiag = qr.matrixQR().diagonal().cwiseAbs();
	if (!(rdiag.minCoeff() > 1e-8 * rdiag.maxCoeff()))
		throw SingularMatrix("XX^T is singular", rdiag.maxCoeff() / rdiag.minCoeff());
	const auto project = [&](const Vector &v) -> Vector { return q * (q.transpose() * v); };
	const Vector y = data.y();
	const Vector y_perp = y - project(y);

	FitReport rep;
	if (opt.truth)
		rep.k_below_truth = k < opt.truth->b_star.count();

	const auto coefficients = [&](const Vector &b) -> Vector {
		const Vector rhs = q.transpose() * (y - b);
		return qr.matrixQR().topLeftCorner(d, d).triangularView<Eigen::Upper>().solve(rhs);
	};

	SparseCorruption b{Vector::Zero(n), {}};
	SparseCorruption best = b;
	double best_obj = std::numeric_limits<double>::infinity();
	std::vector<IndexSet> history;
	bool converged = false;

	for (int t = 1; t <= opt.max_iter; ++t) {
		SparseCorruption next = hard_threshold(y_perp + project(b.values), k);
		IterationRecord rec;
		rec.delta = (next.values - b.values).norm();
		if (opt.truth) {
			rec.err_w = (coefficients(b.values) - opt.truth->w_star).norm();
			rec.err_b = (next.values - opt.truth->b_star.values).norm();
		}
		const Vector shifted = y - next.values;
		rec.objective = (shifted - project(shifted)).squaredNorm();
		rec.support = next.support;
		history.push_back(next.support);
		rep.trace.push_back(rec);
		rep.iterations = t;

		b = std::move(next);
		if (rec.objective < best_obj) {
			best_obj = rec.objective;
			best = b;
		}
		if (rec.delta <= tol) {
			converged = true;
			break;
		}
		if (detail::support_cycle(history)) {
			rep.cycled = true;
			break;
		}
	}
	rep.converged = converged;
	const SparseCorruption &chosen = converged ? b : best;
	rep.b_hat = chosen;
	rep.support_clean = complement(chosen.support, n);
	rep.w_hat = coefficients(chosen.values);
	return rep;
}

} // namespace robreg
