#pragma once

// Theory-side instruments: subset eigenvalue constants, the contraction margin,
// the approximate breakdown fraction and the Assumption-1 residual ratio trace.

#include "robreg/brht.hpp"
#include "robreg/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>

namespace robreg {

struct SubsetEigenBounds {
	double lambda_min;  // lambda_m: smallest lambda_min(X_S X_S^T) over |S| = m
	double lambda_max;  // Lambda_m: largest lambda_max(X_S X_S^T) over |S| = m
	bool approximate;   // sampled subsets only
	std::uint64_t subsets;
};

inline constexpr Index exact_subset_limit = 25;

namespace detail {

inline std::pair<double, double> gram_extremes(const Matrix &x, const std::vector<Index> &subset) {
	const Matrix xs = gather_columns(x, subset);
	const Matrix g = xs * xs.transpose();
	if (x.rows() == 1)
		return {g(0, 0), g(0, 0)};
	Eigen::SelfAdjointEigenSolver<Matrix> eig(g, Eigen::EigenvaluesOnly);
	return {eig.eigenvalues()[0], eig.eigenvalues()[x.rows() - 1]};
}

inline void check_level(Index m, Index n) {
	if (m < 1 || m > n)
		throw InvalidArgument("subset level m=" + std::to_string(m) + " must lie in [1, n=" + std::to_string(n) + "]");
}

} // namespace detail

/// Exhaustive enumeration of all size-m subsets; refuses n > 25.
inline SubsetEigenBounds ssc_sss(const Dataset &data, Index m) {
	const Index n = data.n();
	detail::check_level(m, n);
	if (n > exact_subset_limit)
		throw InvalidArgument("exact SSC/SSS enumeration needs n <= " + std::to_string(exact_subset_limit) +
		                      "; use the sampling mode for larger n");
	SubsetEigenBounds out{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), false, 0};
	std::vector<Index> subset(static_cast<std::size_t>(m));
	std::iota(subset.begin(), subset.end(), Index{0});
	while (true) {
		const auto [lo, hi] = detail::gram_extremes(data.x(), subset);
		out.lambda_min = std::min(out.lambda_min, lo);
		out.lambda_max = std::max(out.lambda_max, hi);
		++out.subsets;
		// next combination in lexicographic order
		Index j = m - 1;
		while (j >= 0 && subset[static_cast<std::size_t>(j)] == n - m + j)
			--j;
		if (j < 0)
			break;
		++subset[static_cast<std::size_t>(j)];
		for (Index l = j + 1; l < m; ++l)
			subset[static_cast<std::size_t>(l)] = subset[static_cast<std::size_t>(l - 1)] + 1;
	}
	return out;
}

/// Bounds from random subsets: lambda_min is an upper bound on lambda_m, lambda_max a lower bound on Lambda_m.
inline SubsetEigenBounds ssc_sss_sampled(const Dataset &data, Index m, std::uint64_t samples = 100000,
                                         std::uint64_t seed = 0) {
	const Index n = data.n();
	detail::check_level(m, n);
	if (samples < 1)
		throw InvalidArgument("sampling mode needs at least one subset");
	CounterRng rng = CounterRng::derive(seed, {static_cast<std::uint64_t>(Stream::sampling)});
	SubsetEigenBounds out{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), true, 0};
	std::vector<Index> idx(static_cast<std::size_t>(n));
	std::iota(idx.begin(), idx.end(), Index{0});
	std::vector<Index> subset(static_cast<std::size_t>(m));
	for (std::uint64_t s = 0; s < samples; ++s) {
		for (Index j = 0; j < m; ++j) {
			const Index pick = j + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - j)));
			std::swap(idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(pick)]);
			subset[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j)];
		}
		const auto [lo, hi] = detail::gram_extremes(data.x(), subset);
		out.lambda_min = std::min(out.lambda_min, lo);
		out.lambda_max = std::max(out.lambda_max, hi);
		++out.subsets;
	}
	return out;
}

/// 2 Lambda_{k+k*} / lambda_min(XX^T + M); below 1 certifies the contraction condition.
inline double convergence_margin(const Dataset &data, const PenaltyMatrix &penalty, Index k, Index k_star,
                                 bool sampled = false, std::uint64_t samples = 100000, std::uint64_t seed = 0) {
	if (penalty.dim() != data.d())
		throw InvalidArgument("convergence_margin: penalty dimension mismatch");
	if (k < 0 || k_star < 0)
		throw InvalidArgument("convergence_margin: k and k* must be nonnegative");
	const Index level = std::min(k + k_star, data.n());
	if (level < 1)
		return 0.0;
	const double big = sampled ? ssc_sss_sampled(data, level, samples, seed).lambda_max : ssc_sss(data, level).lambda_max;
	Matrix a = data.x() * data.x().transpose() + penalty.m;
	Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
	const double small = eig.eigenvalues()[0];
	if (!(small > 0.0))
		throw SingularMatrix("XX^T + M is singular", std::numeric_limits<double>::infinity());
	return 2.0 * big / small;
}

/// Fraction 0.3023 - sqrt(0.0887 - 0.0040 xi) for xi in [0, 22.175].
inline double breakdown_bound(double xi) {
	constexpr double xi_max = 22.175;
	if (!(xi >= 0.0 && xi <= xi_max))
		throw InvalidArgument("breakdown_bound: xi must lie in [0, 22.175]");
	// 0.0887 - 0.0040 * 22.175 rounds to a tiny nonzero value; the radicand vanishes at the endpoint
	const double radicand = xi == xi_max ? 0.0 : std::max(0.0, 0.0887 - 0.0040 * xi);
	return 0.3023 - std::sqrt(radicand);
}

struct Assumption1Truth {
	Vector w_star;
	Vector noise;            // epsilon
	SparseCorruption b_star; // corruption actually applied
};

struct Assumption1Trace {
	std::vector<int> t;
	std::vector<double> u1, u2, ratio;
	double gamma_max = 0.0;
	double ratio_mean = 0.0;
};

/// Runs BRHT with prior N(w0, l sigma^2 M^{-1}) and compares, at each outer step, the VBEM
/// coefficient w_1t with the penalized solution w_2t on the same (X, y - b^t).
inline Assumption1Trace assumption1_trace(const Dataset &data, const Assumption1Truth &truth, const PenaltyMatrix &penalty,
                                          const Vector &w0, double l, const WeightPrior &weight_prior, double sigma2,
                                          Index k, BrhtOptions opt = {}) {
	if (truth.w_star.size() != data.d() || truth.noise.size() != data.n() || truth.b_star.size() != data.n())
		throw InvalidArgument("assumption1_trace needs w*, epsilon and b* matching the dataset");
	if (!(l > 0.0))
		throw InvalidArgument("assumption1_trace: l must be positive");
	const CoefficientPrior prior = prior_from_penalty(PenaltyMatrix(penalty.m / l), w0, sigma2);

	Assumption1Trace out;
	const Matrix &x = data.x();
	opt.track_u = false;
	opt.observer = [&](int t, const Vector &b, const Vector &w1) {
		const SparseCorruption bt = hard_threshold(b, static_cast<Index>((b.array() != 0.0).count()));
		const IndexSet idx = set_union(bt.support, truth.b_star.support);
		if (idx.empty())
			return;
		const Vector w2 = penalized_least_squares(data.with_responses(data.y() - b), penalty.m, w0);
		const Matrix xi = gather_columns(x, idx);
		const Vector eps = gather(truth.noise, idx);
		const double u1 = (eps + xi.transpose() * (truth.w_star - w1)).norm();
		const double u2 = (eps + xi.transpose() * (truth.w_star - w2)).norm();
		out.t.push_back(t);
		out.u1.push_back(u1);
		out.u2.push_back(u2);
		out.ratio.push_back(u2 > 0.0 ? u1 / u2 : (u1 > 0.0 ? std::numeric_limits<double>::infinity() : 1.0));
	};
	brht_fit(data, weight_prior, prior, sigma2, k, opt);
	if (!out.ratio.empty()) {
		out.gamma_max = *std::max_element(out.ratio.begin(), out.ratio.end());
		out.ratio_mean = std::accumulate(out.ratio.begin(), out.ratio.end(), 0.0) / static_cast<double>(out.ratio.size());
	}
	return out;
}

} // namespace robreg
