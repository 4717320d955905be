#pragma once

// Corruption generators with ground truth: oblivious (OAA), adaptive (ADCA) and leverage-point (LPA).

#include "robreg/core.hpp"
#include "robreg/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

namespace robreg {

enum class AttackKind { oaa, aaa, lpa };

inline std::string attack_name(AttackKind kind) {
	switch (kind) {
	case AttackKind::oaa: return "OAA";
	case AttackKind::aaa: return "AAA";
	default: return "LPA";
	}
}

struct AttackParams {
	double alpha = 0.0;
	double delta = 0.0;        // ADCA only
	double magnitude_hi = 0.0; // OAA only
	std::uint64_t seed = 0;
	bool exact_leverage = false; // LPA only
	bool replace = false;        // OAA: responses overwritten by the draw instead of shifted
};

struct CorruptionRecord {
	SparseCorruption b_true;
	AttackKind kind = AttackKind::oaa;
	AttackParams params;
	std::optional<Vector> w_adv; // ADCA's fitted coefficient
	bool converged = true;       // ADCA recursion status
	int iterations = 0;
};

struct AttackResult {
	Dataset data;
	CorruptionRecord record;
};

/// round(alpha * n) with the alpha range checked.
inline Index corruption_count(double alpha, Index n) {
	if (!(alpha >= 0.0 && alpha < 1.0))
		throw InvalidArgument("alpha must lie in [0, 1)");
	const Index k = static_cast<Index>(std::llround(alpha * static_cast<double>(n)));
	if (k >= n)
		throw InvalidArgument("alpha * n rounds to n; at least one clean sample is required");
	return k;
}

namespace detail {
inline AttackResult apply(const Dataset &data, const Vector &y_new, CorruptionRecord rec) {
	const Vector diff = y_new - data.y();
	rec.b_true.values = Vector::Zero(data.n());
	for (Index i : rec.b_true.support)
		rec.b_true.values[i] = diff[i];
	return {data.with_responses(y_new), std::move(rec)};
}
} // namespace detail

/// Uniformly random support of size round(alpha n); y_i += U[0, magnitude_hi], or y_i = U[0, magnitude_hi]
/// with `replace`.
inline AttackResult oaa(const Dataset &data, double alpha, double magnitude_hi, std::uint64_t seed,
                        bool replace = false) {
	const Index n = data.n();
	const Index k = corruption_count(alpha, n);
	if (!(magnitude_hi > 0.0) || !std::isfinite(magnitude_hi))
		throw InvalidArgument("OAA magnitude bound must be positive and finite");
	CounterRng rng = CounterRng::derive(seed, {static_cast<std::uint64_t>(Stream::attack)});

	// partial Fisher-Yates over the index range
	std::vector<Index> idx(static_cast<std::size_t>(n));
	std::iota(idx.begin(), idx.end(), Index{0});
	for (Index j = 0; j < k; ++j) {
		const Index pick = j + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - j)));
		std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(pick)]);
	}
	IndexSet support(idx.begin(), idx.begin() + k);
	std::vector<std::pair<Index, double>> draws;
	for (Index i : support)
		draws.emplace_back(i, rng.uniform(0.0, magnitude_hi));
	std::sort(support.begin(), support.end());

	Vector y = data.y();
	for (const auto &[i, v] : draws)
		y[i] = replace ? v : y[i] + v;
	CorruptionRecord rec;
	rec.kind = AttackKind::oaa;
	rec.params = {alpha, 0.0, magnitude_hi, seed, false, replace};
	rec.b_true.support = std::move(support);
	return detail::apply(data, y, std::move(rec));
}

/// Solves (XX^T - delta I) v = rhs through the eigendecomposition of XX^T.
class ShiftedGramSolver {
public:
	ShiftedGramSolver(const Matrix &x, double delta) {
		Eigen::SelfAdjointEigenSolver<Matrix> eig(x * x.transpose());
		if (eig.info() != Eigen::Success)
			throw NumericError("eigendecomposition of XX^T failed");
		q_ = eig.eigenvectors();
		shifted_ = eig.eigenvalues().array() - delta;
		const double hi = shifted_.cwiseAbs().maxCoeff();
		const double lo = shifted_.cwiseAbs().minCoeff();
		condition_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
		if (!(condition_ <= 1e12))
			throw UnstableDelta("XX^T - delta*I is nearly singular for delta=" + std::to_string(delta) +
			                        "; choose a delta away from the eigenvalues of XX^T",
			                    condition_);
	}

	Vector solve(const Vector &rhs) const {
		return q_ * (q_.transpose() * rhs).cwiseQuotient(shifted_);
	}
	double condition() const { return condition_; }

private:
	Matrix q_;
	Vector shifted_;
	double condition_ = 0.0;
};

struct AdcaOptions {
	double tol = -1.0; // negative: 1e-4 * ||y||_2
	int max_iter = 200;
};

/// One step of the attacker recursion: HT_k(y - X^T (XX^T - delta I)^{-1}(X(y - b) - delta w*)).
inline SparseCorruption adca_step(const Dataset &data, const ShiftedGramSolver &solver, const Vector &w_star,
                                  double delta, const Vector &b, Index k) {
	const Vector w = solver.solve(data.x() * (data.y() - b) - delta * w_star);
	return hard_threshold(data.y() - data.x().transpose() * w, k);
}

inline AttackResult adca(const Dataset &data, const Vector &w_star, double delta, Index k, const AdcaOptions &opt = {}) {
	const Index n = data.n();
	if (w_star.size() != data.d())
		throw InvalidArgument("ADCA: w_star must have length d");
	if (!(delta > 0.0) || !std::isfinite(delta))
		throw InvalidArgument("ADCA: delta must be positive");
	if (k < 0 || k >= n)
		throw InvalidArgument("ADCA: k must satisfy 0 <= k < n");
	if (opt.max_iter < 1)
		throw InvalidArgument("ADCA: max_iter must be at least 1");
	const double tol = opt.tol < 0.0 ? 1e-4 * data.y().norm() : opt.tol;
	const ShiftedGramSolver solver(data.x(), delta);

	CorruptionRecord rec;
	rec.kind = AttackKind::aaa;
	rec.params = {static_cast<double>(k) / static_cast<double>(n), delta, 0.0, 0, false};
	rec.converged = false;

	SparseCorruption b{Vector::Zero(n), {}};
	for (int t = 1; t <= opt.max_iter; ++t) {
		SparseCorruption next = adca_step(data, solver, w_star, delta, b.values, k);
		const double change = (next.values - b.values).norm();
		b = std::move(next);
		rec.iterations = t;
		if (change <= tol) {
			rec.converged = true;
			break;
		}
	}

	const Vector w_hat = ordinary_least_squares(data.with_responses(data.y() - b.values));
	Vector y = data.y();
	for (Index i : b.support)
		y[i] = data.x().col(i).dot(w_hat);
	rec.w_adv = w_hat;
	rec.b_true.support = b.support;
	return detail::apply(data, y, std::move(rec));
}

/// Zeroes the responses of the round(alpha n) samples with the largest ||x_i|| (or leverage).
inline AttackResult lpa(const Dataset &data, double alpha, std::uint64_t seed = 0, bool exact_leverage = false) {
	const Index n = data.n();
	const Index k = corruption_count(alpha, n);
	const Vector score = exact_leverage ? leverage_scores(data) : Vector(data.x().colwise().norm().transpose());
	std::vector<Index> order(static_cast<std::size_t>(n));
	std::iota(order.begin(), order.end(), Index{0});
	std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return score[a] > score[b]; });
	IndexSet support(order.begin(), order.begin() + k);
	std::sort(support.begin(), support.end());

	Vector y = data.y();
	for (Index i : support)
		y[i] = 0.0;
	CorruptionRecord rec;
	rec.kind = AttackKind::lpa;
	rec.params = {alpha, 0.0, 0.0, seed, exact_leverage};
	rec.b_true.support = std::move(support);
	return detail::apply(data, y, std::move(rec));
}

} // namespace robreg
