#pragma once

// Periodic power telemetry: Chebyshev fits per period, prior-guided TRIP recovery,
// representative-point trend with KNN smoothing, jump detection and a synthetic generator.

#include "robreg/priors.hpp"
#include "robreg/rng.hpp"
#include "robreg/trip.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace robreg {

struct PeriodicSeries {
	std::vector<double> t;
	std::vector<double> p;
	double period = 1.0;
	int n_periods = 0;

	std::size_t size() const { return t.size(); }

	/// 0-based period index of time t.
	int period_of(double time) const { return static_cast<int>(std::floor(time / period)); }

	void validate() const {
		if (t.size() != p.size())
			throw InvalidArgument("series has mismatched t and p lengths");
		if (!(period > 0.0) || n_periods < 1)
			throw InvalidArgument("series needs period > 0 and at least one period");
		for (std::size_t j = 0; j < t.size(); ++j) {
			if (!std::isfinite(t[j]) || !std::isfinite(p[j]))
				throw InvalidArgument("series contains non-finite values");
			if (j > 0 && !(t[j] > t[j - 1]))
				throw InvalidArgument("series timestamps must be strictly increasing");
			const int i = period_of(t[j]);
			if (i < 0 || i >= n_periods)
				throw InvalidArgument("timestamp " + std::to_string(t[j]) + " falls outside the configured periods");
		}
	}

	/// Sample index ranges [begin, end) per period.
	std::vector<std::pair<std::size_t, std::size_t>> period_ranges() const {
		std::vector<std::pair<std::size_t, std::size_t>> out(static_cast<std::size_t>(n_periods), {0, 0});
		std::size_t j = 0;
		for (int i = 0; i < n_periods; ++i) {
			const std::size_t begin = j;
			while (j < t.size() && period_of(t[j]) == i)
				++j;
			out[static_cast<std::size_t>(i)] = {begin, j};
		}
		return out;
	}
};

/// Maps [lo, hi] affinely onto [-1, 1].
inline double chebyshev_map(double time, double lo, double hi) { return (2.0 * time - lo - hi) / (hi - lo); }

/// Column j holds T_0..T_degree at the mapped times[j], by the three-term recurrence.
inline Matrix chebyshev_design(const std::vector<double> &times, int degree, double lo, double hi) {
	if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
		throw InvalidArgument("Chebyshev domain must satisfy lo < hi");
	if (degree < 0)
		throw InvalidArgument("Chebyshev degree must be nonnegative");
	Matrix x(degree + 1, static_cast<Index>(times.size()));
	for (std::size_t j = 0; j < times.size(); ++j) {
		const double s = chebyshev_map(times[j], lo, hi);
		const Index c = static_cast<Index>(j);
		x(0, c) = 1.0;
		if (degree >= 1)
			x(1, c) = s;
		for (int n = 1; n < degree; ++n)
			x(n + 1, c) = 2.0 * s * x(n, c) - x(n - 1, c);
	}
	return x;
}

struct ChebyshevModel {
	int degree = 9;
	Vector coefficients;
	double lo = 0.0, hi = 1.0;

	double evaluate(double time) const {
		return chebyshev_design({time}, degree, lo, hi).col(0).dot(coefficients);
	}
	std::vector<double> evaluate(const std::vector<double> &times) const {
		const Vector v = chebyshev_design(times, degree, lo, hi).transpose() * coefficients;
		return {v.data(), v.data() + v.size()};
	}
};

struct StandardFit {
	ChebyshevModel model;
	double residual_rms = 0.0;
};

/// OLS Chebyshev fit of one period (1-based index); `keep`, when given, masks points removed by the caller.
inline StandardFit fit_standard_period(const PeriodicSeries &series, int period_index, int degree = 9,
                                       const std::vector<bool> *keep = nullptr) {
	series.validate();
	if (period_index < 1 || period_index > series.n_periods)
		throw InvalidArgument("standard period index out of range");
	if (keep && keep->size() != series.size())
		throw InvalidArgument("cleaning mask must have one entry per sample");
	const auto [begin, end] = series.period_ranges()[static_cast<std::size_t>(period_index - 1)];
	const double shift = (period_index - 1) * series.period;
	std::vector<double> times;
	std::vector<double> values;
	for (std::size_t j = begin; j < end; ++j) {
		if (keep && !(*keep)[j])
			continue;
		times.push_back(series.t[j] - shift);
		values.push_back(series.p[j]);
	}
	if (static_cast<int>(times.size()) < degree + 1)
		throw InvalidArgument("standard period has fewer than degree + 1 usable points");
	const Dataset data(chebyshev_design(times, degree, 0.0, series.period),
	                   Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size())));
	StandardFit out;
	out.model = {degree, ordinary_least_squares(data), 0.0, series.period};
	out.residual_rms = std::sqrt(residuals(data, out.model.coefficients).squaredNorm() / static_cast<double>(data.n()));
	return out;
}

struct RecoveryResult {
	PeriodicSeries recovered;
	std::vector<ChebyshevModel> models; // per period; empty coefficients when that period failed
	std::vector<FitReport> reports;
	std::vector<std::string> failures;   // empty string when the period succeeded
};

/// Per-period TRIP with the standard coefficients as prior mean and M = s diag{0, 1, ..., 1}.
inline RecoveryResult recover_series(const PeriodicSeries &series, const ChebyshevModel &standard, double s, double alpha,
                                     double tol = -1.0, int max_iter = 200) {
	series.validate();
	if (!(s >= 0.0))
		throw InvalidArgument("penalty weight s must be nonnegative");
	if (!(alpha >= 0.0 && alpha < 1.0))
		throw InvalidArgument("alpha must lie in [0, 1)");
	if (standard.coefficients.size() != standard.degree + 1)
		throw InvalidArgument("standard model coefficients do not match its degree");
	const int degree = standard.degree;
	Matrix m = Matrix::Zero(degree + 1, degree + 1);
	for (int j = 1; j <= degree; ++j)
		m(j, j) = s;
	const PenaltyMatrix penalty(m);

	RecoveryResult out;
	out.recovered = series;
	const auto ranges = series.period_ranges();
	out.models.resize(ranges.size());
	out.reports.resize(ranges.size());
	out.failures.resize(ranges.size());
	for (std::size_t i = 0; i < ranges.size(); ++i) {
		const auto [begin, end] = ranges[i];
		const double shift = static_cast<double>(i) * series.period;
		try {
			const Index n_i = static_cast<Index>(end - begin);
			if (n_i < degree + 1)
				throw InvalidArgument("period has fewer than degree + 1 points");
			std::vector<double> times(series.t.begin() + static_cast<std::ptrdiff_t>(begin),
			                          series.t.begin() + static_cast<std::ptrdiff_t>(end));
			for (double &v : times)
				v -= shift;
			const Matrix x = chebyshev_design(times, degree, 0.0, series.period);
			const Dataset data(x, Eigen::Map<const Vector>(series.p.data() + begin, n_i));
			const Index k = std::min<Index>(n_i - 1, static_cast<Index>(std::llround(alpha * static_cast<double>(n_i))));
			TripOptions opt;
			opt.tol = tol;
			opt.max_iter = max_iter;
			FitReport fit = trip_fit(data, penalty, standard.coefficients, k, opt);
			const Vector fitted = x.transpose() * fit.w_hat;
			for (Index j = 0; j < n_i; ++j)
				out.recovered.p[begin + static_cast<std::size_t>(j)] = fitted[j];
			out.models[i] = {degree, fit.w_hat, 0.0, series.period};
			out.reports[i] = std::move(fit);
		} catch (const std::exception &e) {
			out.failures[i] = e.what();
		}
	}
	return out;
}

struct Trend {
	std::vector<double> t;
	std::vector<double> raw;
	std::vector<double> smoothed;
};

/// Mean of each value's k nearest neighbours by index distance (ties to the smaller index).
inline std::vector<double> knn_smooth(const std::vector<double> &v, int k) {
	const int n = static_cast<int>(v.size());
	if (k < 1 || k > n)
		throw InvalidArgument("KNN k must lie in [1, number of points]");
	std::vector<double> out(v.size());
	for (int i = 0; i < n; ++i) {
		int lo = i, hi = i; // inclusive window
		while (hi - lo + 1 < k) {
			const bool left = lo > 0, right = hi < n - 1;
			// equal distances: the left (smaller index) neighbour wins
			if (left && (!right || i - (lo - 1) <= (hi + 1) - i))
				--lo;
			else
				++hi;
		}
		double sum = 0.0;
		for (int j = lo; j <= hi; ++j)
			sum += v[static_cast<std::size_t>(j)];
		out[static_cast<std::size_t>(i)] = sum / k;
	}
	return out;
}

/// One representative point ((i-1)T + t_c, p_i(t_c)) per period, then KNN smoothing.
inline Trend extract_trend(const PeriodicSeries &recovered, const std::vector<ChebyshevModel> &models, double t_c,
                           int knn_k = 5) {
	if (!(t_c >= 0.0 && t_c <= recovered.period))
		throw InvalidArgument("t_c must lie within the period");
	if (models.size() != static_cast<std::size_t>(recovered.n_periods))
		throw InvalidArgument("need one model per period");
	if (knn_k < 1 || knn_k >= recovered.n_periods)
		throw InvalidArgument("knn_k must satisfy 1 <= knn_k < number of periods");
	Trend out;
	for (int i = 0; i < recovered.n_periods; ++i) {
		const ChebyshevModel &m = models[static_cast<std::size_t>(i)];
		if (m.coefficients.size() == 0)
			continue; // failed period
		out.t.push_back(i * recovered.period + t_c);
		out.raw.push_back(m.evaluate(t_c));
	}
	if (out.raw.size() <= static_cast<std::size_t>(knn_k))
		throw InvalidArgument("too few recovered periods for the KNN window");
	out.smoothed = knn_smooth(out.raw, knn_k);
	return out;
}

/// Flags successive differences far from their median (robust z > threshold), clusters
/// contiguous flagged runs and returns, per run, the 0-based index of the first point after the run's centre step.
inline std::vector<int> detect_jumps(const std::vector<double> &values, double threshold = 5.0) {
	if (values.size() < 3)
		return {};
	std::vector<double> diff(values.size() - 1);
	for (std::size_t i = 0; i + 1 < values.size(); ++i)
		diff[i] = values[i + 1] - values[i];
	auto median = [](std::vector<double> v) {
		const std::size_t h = v.size() / 2;
		std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
		double m = v[h];
		if (v.size() % 2 == 0)
			m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h)));
		return m;
	};
	const double med = median(diff);
	std::vector<double> dev(diff.size());
	for (std::size_t i = 0; i < diff.size(); ++i)
		dev[i] = std::abs(diff[i] - med);
	const double scale = std::max(1.4826 * median(dev), 1e-12 * (1.0 + std::abs(med)));

	std::vector<int> jumps;
	std::size_t i = 0;
	while (i < diff.size()) {
		if (dev[i] <= threshold * scale) {
			++i;
			continue;
		}
		const std::size_t start = i;
		while (i < diff.size() && dev[i] > threshold * scale)
			++i;
		const std::size_t centre = start + (i - 1 - start) / 2;
		jumps.push_back(static_cast<int>(centre + 1));
	}
	return jumps;
}

struct SynthSsaConfig {
	int n_periods = 50;
	int points_per_period = 400;
	double period = 1.0;
	double degradation_rate = 0.001; // mean power lost per period, through the amplitude
	std::vector<std::pair<int, double>> jumps{{18, -0.4}, {35, -0.5}}; // (1-based period, offset)
	double outlier_fraction = 0.3;
	std::string outlier_pattern = "overwrite";
	double noise_sigma = 0.05;
	std::uint64_t seed = 0;
};

struct SynthSsa {
	PeriodicSeries series;
	std::vector<double> p_true;
	std::vector<bool> is_outlier;
	ChebyshevModel shape;
};

/// Degree-9 base waveform around 28 power units.
inline ChebyshevModel ssa_base_shape(double period = 1.0) {
	Vector c(10);
	c << 28.0, 0.9, -0.6, 0.45, -0.3, 0.2, -0.12, 0.08, -0.05, 0.03;
	return {9, c, 0.0, period};
}

/// Synthetic telemetry: base shape with a linearly shrinking amplitude, step jumps, white noise and
/// contiguous overwrite blocks whose values are copied from a phase-shifted window.
inline SynthSsa synth_ssa(const SynthSsaConfig &cfg) {
	if (cfg.n_periods < 1 || cfg.points_per_period < 1 || !(cfg.period > 0.0))
		throw InvalidArgument("synthetic series needs positive period count, period size and period length");
	if (!(cfg.outlier_fraction >= 0.0 && cfg.outlier_fraction < 1.0))
		throw InvalidArgument("outlier_fraction must lie in [0, 1)");
	if (!(cfg.noise_sigma >= 0.0))
		throw InvalidArgument("noise_sigma must be nonnegative");
	if (cfg.outlier_pattern != "overwrite")
		throw InvalidArgument("unknown outlier pattern '" + cfg.outlier_pattern + "'");
	for (const auto &[period, offset] : cfg.jumps)
		if (period < 1 || period > cfg.n_periods || !std::isfinite(offset))
			throw InvalidArgument("jump period out of range");

	CounterRng rng = CounterRng::derive(cfg.seed, {static_cast<std::uint64_t>(Stream::synth)});
	const int ppp = cfg.points_per_period;
	const std::size_t total = static_cast<std::size_t>(cfg.n_periods) * static_cast<std::size_t>(ppp);

	SynthSsa out;
	out.shape = ssa_base_shape(cfg.period);
	out.series.period = cfg.period;
	out.series.n_periods = cfg.n_periods;
	out.series.t.resize(total);
	out.p_true.resize(total);
	std::vector<double> in_period(static_cast<std::size_t>(ppp));
	for (int j = 0; j < ppp; ++j)
		in_period[static_cast<std::size_t>(j)] = (j + 0.5) * cfg.period / ppp;
	const std::vector<double> wave = out.shape.evaluate(in_period);
	const double level = out.shape.coefficients[0];
	for (int i = 0; i < cfg.n_periods; ++i) {
		const double amplitude = 1.0 - cfg.degradation_rate * i / level;
		double offset = 0.0;
		for (const auto &[period, jump] : cfg.jumps)
			if (i + 1 >= period)
				offset += jump;
		for (int j = 0; j < ppp; ++j) {
			const std::size_t g = static_cast<std::size_t>(i) * ppp + static_cast<std::size_t>(j);
			out.series.t[g] = i * cfg.period + in_period[static_cast<std::size_t>(j)];
			out.p_true[g] = amplitude * wave[static_cast<std::size_t>(j)] + offset;
		}
	}
	std::vector<double> observed(total);
	for (std::size_t g = 0; g < total; ++g)
		observed[g] = out.p_true[g] + (cfg.noise_sigma > 0.0 ? cfg.noise_sigma * rng.normal() : 0.0);

	// outlier budget spread as evenly as possible over the periods
	const auto budget = static_cast<std::size_t>(std::llround(cfg.outlier_fraction * static_cast<double>(total)));
	out.is_outlier.assign(total, false);
	out.series.p = observed;
	const std::size_t base = budget / static_cast<std::size_t>(cfg.n_periods);
	const std::size_t extra = budget % static_cast<std::size_t>(cfg.n_periods);
	for (int i = 0; i < cfg.n_periods; ++i) {
		const std::size_t count = std::min<std::size_t>(base + (static_cast<std::size_t>(i) < extra ? 1 : 0),
		                                                static_cast<std::size_t>(ppp));
		if (count == 0)
			continue;
		const int blocks = std::min<int>(1 + static_cast<int>(rng.below(3)), static_cast<int>(count));
		// block lengths as equal as possible, gaps from sorted uniform cut points
		std::vector<std::size_t> len(static_cast<std::size_t>(blocks), count / blocks);
		for (std::size_t b = 0; b < count % blocks; ++b)
			++len[b];
		const std::size_t free = static_cast<std::size_t>(ppp) - count;
		std::vector<std::size_t> cuts(static_cast<std::size_t>(blocks));
		for (auto &c : cuts)
			c = static_cast<std::size_t>(rng.below(free + 1));
		std::sort(cuts.begin(), cuts.end());
		std::size_t pos = 0, used_gap = 0;
		for (int b = 0; b < blocks; ++b) {
			pos += cuts[static_cast<std::size_t>(b)] - used_gap;
			used_gap = cuts[static_cast<std::size_t>(b)];
			// copy source: an earlier window shifted by a quarter to three quarters of a period
			const auto lag = static_cast<std::size_t>(ppp / 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(ppp / 2 + 1))));
			for (std::size_t j = 0; j < len[static_cast<std::size_t>(b)]; ++j, ++pos) {
				const std::size_t g = static_cast<std::size_t>(i) * ppp + pos;
				const std::size_t src = g >= lag ? g - lag : g + lag;
				out.series.p[g] = observed[std::min(src, total - 1)];
				out.is_outlier[g] = true;
			}
		}
	}
	return out;
}

} // namespace robreg
