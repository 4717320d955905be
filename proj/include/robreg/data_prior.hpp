#pragma once

// Prior built from the data: LAD mean and an isotropic scale picked by k-fold cross-validation of TRIP.

#include "robreg/priors.hpp"
#include "robreg/rng.hpp"
#include "robreg/trip.hpp"

#include <cstdint>

namespace robreg {

struct DataPriorOptions {
	double sigma2 = 1.0;
	double corruption = 0.0; // assumed fraction; sets k for TRIP and the trim fraction of the CV score
	TripOptions trip = penalized_trip();

	static TripOptions penalized_trip() {
		TripOptions t;
		t.penalized_final = true; // an OLS refit would make every scale score alike
		return t;
	}
};

struct DataPriorResult {
	CoefficientPrior prior;
	double scale = 0.0;
	std::vector<double> scores; // mean trimmed held-out squared residual per grid entry
};

/// Mean of the smallest (1 - trim) share of squared residuals.
inline double trimmed_mean_square(const Vector &r, double trim) {
	std::vector<double> sq(static_cast<std::size_t>(r.size()));
	for (Index i = 0; i < r.size(); ++i)
		sq[static_cast<std::size_t>(i)] = r[i] * r[i];
	std::sort(sq.begin(), sq.end());
	const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround((1.0 - trim) * static_cast<double>(sq.size()))));
	return std::accumulate(sq.begin(), sq.begin() + static_cast<std::ptrdiff_t>(std::min(keep, sq.size())), 0.0) /
	       static_cast<double>(std::min(keep, sq.size()));
}

/// Fold label per sample from a seeded permutation.
inline std::vector<int> fold_labels(Index n, int folds, std::uint64_t seed) {
	CounterRng rng = CounterRng::derive(seed, {static_cast<std::uint64_t>(Stream::folds)});
	std::vector<Index> perm(static_cast<std::size_t>(n));
	std::iota(perm.begin(), perm.end(), Index{0});
	for (Index j = n - 1; j > 0; --j)
		std::swap(perm[static_cast<std::size_t>(j)], perm[rng.below(static_cast<std::uint64_t>(j + 1))]);
	std::vector<int> label(static_cast<std::size_t>(n));
	for (Index j = 0; j < n; ++j)
		label[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])] = static_cast<int>(j % folds);
	return label;
}

inline DataPriorResult data_driven_prior(const Dataset &data, const std::vector<double> &s_grid, int folds,
                                         std::uint64_t seed, const DataPriorOptions &opt = {}) {
	if (s_grid.empty())
		throw InvalidArgument("data_driven_prior needs a nonempty scale grid");
	if (folds < 2)
		throw InvalidArgument("data_driven_prior needs at least two folds");
	for (double s : s_grid)
		if (!(s > 0.0))
			throw InvalidArgument("prior scales must be positive");
	if (!(opt.corruption >= 0.0 && opt.corruption < 1.0))
		throw InvalidArgument("assumed corruption fraction must lie in [0, 1)");

	const Index n = data.n(), d = data.d();
	const Vector mean = lad_fit(data).w;
	DataPriorResult out;
	if (s_grid.size() == 1) {
		out.scale = s_grid.front();
		out.prior = CoefficientPrior::isotropic(mean, out.scale);
		return out;
	}
	if (n < folds)
		throw InvalidArgument("more folds than samples");

	const std::vector<int> label = fold_labels(n, folds, seed);
	std::vector<Dataset> train(static_cast<std::size_t>(folds)), test(static_cast<std::size_t>(folds));
	for (int f = 0; f < folds; ++f) {
		IndexSet in, out_idx;
		for (Index i = 0; i < n; ++i)
			(label[static_cast<std::size_t>(i)] == f ? out_idx : in).push_back(i);
		train[static_cast<std::size_t>(f)] = Dataset(gather_columns(data.x(), in), gather(data.y(), in));
		test[static_cast<std::size_t>(f)] = Dataset(gather_columns(data.x(), out_idx), gather(data.y(), out_idx));
	}

	double best = std::numeric_limits<double>::infinity();
	for (double s : s_grid) {
		double total = 0.0;
		for (int f = 0; f < folds; ++f) {
			const Dataset &tr = train[static_cast<std::size_t>(f)];
			const Index k = std::min<Index>(tr.n() - 1, static_cast<Index>(std::llround(opt.corruption * static_cast<double>(tr.n()))));
			const PenaltyMatrix m = PenaltyMatrix::scaled_identity(d, opt.sigma2 / s);
			const FitReport fit = trip_fit(tr, m, mean, k, opt.trip);
			total += trimmed_mean_square(residuals(test[static_cast<std::size_t>(f)], fit.w_hat), opt.corruption);
		}
		const double score = total / folds;
		out.scores.push_back(score);
		if (score < best) {
			best = score;
			out.scale = s;
		}
	}
	out.prior = CoefficientPrior::isotropic(mean, out.scale);
	return out;
}

} // namespace robreg
