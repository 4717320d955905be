#pragma once

// Moments and mode of the tilted weight posterior q(r) ∝ p_r(r) exp(c r).
// Gamma priors have closed forms. Log-normal weights are integrated in u = log r with
// adaptive Gauss-Kronrod split at the peak; Beta weights use tanh-sinh on [0, 1], which
// copes with the endpoint singularities of a < 1 or b < 1.

#include "robreg/priors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <functional>
#include <limits>

namespace robreg {

struct TiltedWeight {
	double mean;
	double mode;
};

namespace detail {

// Upper end of log r for the family: 1 - 1e-12 log-normal quantile, 0 for Beta, +inf for Gamma.
inline double log_weight_ceiling(const WeightPrior &prior) {
	constexpr double z = 7.034483825301131; // standard normal 1 - 1e-12 quantile
	if (const auto *p = std::get_if<LogNormalWeights>(&prior.family()))
		return p->mu + z * p->sigma;
	if (std::holds_alternative<BetaWeights>(prior.family()))
		return 0.0;
	return std::numeric_limits<double>::infinity();
}

inline double log_weight_center(const WeightPrior &prior, double c) {
	if (const auto *p = std::get_if<LogNormalWeights>(&prior.family()))
		return p->mu;
	if (const auto *p = std::get_if<BetaWeights>(&prior.family()))
		return std::log(p->a / (p->a + p->b));
	const auto &g = prior.as_gamma();
	return std::log(g.shape / (g.rate - std::min(c, 0.0)));
}

struct Window {
	double lo, hi, peak, peak_value;
	bool peak_at_left; // supremum approached as u -> -inf
};

// below this log r the weight underflows, so the grid stops there
inline constexpr double log_weight_floor = -700.0;

// Brackets the region where f is within `drop` of its maximum.
inline Window bracket(const std::function<double(double)> &f, double center, double ceiling, double drop = 60.0) {
	constexpr int grid = 400;
	double half = 4.0;
	for (int attempt = 0; attempt < 40; ++attempt, half *= 2.0) {
		const double lo = std::max(center - half, log_weight_floor);
		const double hi = std::min(center + half, ceiling);
		const double step = (hi - lo) / grid;
		int arg = 0;
		double best = -std::numeric_limits<double>::infinity();
		std::vector<double> vals(grid + 1);
		for (int j = 0; j <= grid; ++j) {
			vals[j] = f(lo + step * j);
			if (vals[j] > best) {
				best = vals[j];
				arg = j;
			}
		}
		if (!std::isfinite(best))
			continue;
		const bool at_floor = lo <= log_weight_floor;
		const bool left_ok = at_floor || vals[0] < best - drop;
		const bool right_ok = hi >= ceiling || vals[grid] < best - drop;
		if (!(left_ok && right_ok) && attempt + 1 < 40)
			continue;

		// golden-section refinement around the grid maximum
		double a = lo + step * std::max(arg - 1, 0), b = lo + step * std::min(arg + 1, grid);
		const double g = 0.5 * (std::sqrt(5.0) - 1.0);
		double x1 = b - g * (b - a), x2 = a + g * (b - a);
		double f1 = f(x1), f2 = f(x2);
		for (int it = 0; it < 100 && b - a > 1e-13 * std::max(1.0, std::abs(a)); ++it) {
			if (f1 < f2) {
				a = x1;
				x1 = x2;
				f1 = f2;
				x2 = a + g * (b - a);
				f2 = f(x2);
			} else {
				b = x2;
				x2 = x1;
				f2 = f1;
				x1 = b - g * (b - a);
				f1 = f(x1);
			}
		}
		double peak = 0.5 * (a + b);
		double peak_value = f(peak);
		if (vals[arg] > peak_value) {
			peak = lo + step * arg;
			peak_value = vals[arg];
		}
		// tighten the integration limits to where f exceeds peak - drop
		int jl = 0, jr = grid;
		while (jl < arg && vals[jl + 1] < peak_value - drop)
			++jl;
		while (jr > arg && vals[jr - 1] < peak_value - drop)
			--jr;
		return {lo + step * jl, lo + step * jr, peak, peak_value, at_floor && arg == 0};
	}
	throw NumericError("weight posterior: could not bracket the density peak");
}

inline double integrate(const std::function<double(double)> &f, double a, double b, double rel_tol) {
	if (!(b > a))
		return 0.0;
	double err = 0.0;
	const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, rel_tol, &err);
	if (!std::isfinite(v) || err > 1e3 * rel_tol * std::abs(v) + 1e-300)
		throw NumericError("weight posterior quadrature did not converge");
	return v;
}

// Beta(a, b) tilted by e^{cr}: log density g(r) = (a-1) log r + (b-1) log(1-r) + c r.
inline TiltedWeight beta_tilted(const BetaWeights &p, double c, double rel_tol) {
	const auto g = [&](double r) { return (p.a - 1.0) * std::log(r) + (p.b - 1.0) * std::log1p(-r) + c * r; };

	// mode: the endpoints or a root of c r^2 - (c - a - b + 2) r - (a - 1) = 0 in (0, 1)
	std::vector<double> roots;
	const double qa = c, qb = -(c - p.a - p.b + 2.0), qc = -(p.a - 1.0);
	if (qa == 0.0) {
		if (qb != 0.0)
			roots.push_back(-qc / qb);
	} else if (const double disc = qb * qb - 4.0 * qa * qc; disc >= 0.0) {
		const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
		if (q != 0.0)
			roots.push_back(q / qa);
		roots.push_back(q != 0.0 ? qc / q : -qb / (2.0 * qa));
	}
	// a boundary value is +inf when its exponent is negative, finite when it is zero
	const double at0 = p.a < 1.0 ? std::numeric_limits<double>::infinity()
	                             : p.a == 1.0 ? 0.0 : -std::numeric_limits<double>::infinity();
	const double at1 = p.b < 1.0 ? std::numeric_limits<double>::infinity()
	                             : p.b == 1.0 ? c : -std::numeric_limits<double>::infinity();
	double mode = at0 >= at1 ? 0.0 : 1.0, best = std::max(at0, at1);
	if (std::isinf(at0) && std::isinf(at1) && at0 > 0.0)
		mode = p.a <= p.b ? 0.0 : 1.0; // both singular: the steeper singularity wins
	for (double r : roots)
		if (r > 0.0 && r < 1.0 && g(r) > best) {
			best = g(r);
			mode = r;
		}

	// normalise by the largest value on a probe set that reaches far into both ends
	double shift = -std::numeric_limits<double>::infinity();
	for (int k = 1; k <= 300; ++k) {
		const double e = std::pow(10.0, -k);
		shift = std::max({shift, g(e), g(1.0 - e > 0.0 && 1.0 - e < 1.0 ? 1.0 - e : 0.5)});
	}
	for (double r : roots)
		if (r > 0.0 && r < 1.0)
			shift = std::max(shift, g(r));
	shift = std::max(shift, g(0.5));

	boost::math::quadrature::tanh_sinh<double> ts;
	double err0 = 0.0, err1 = 0.0;
	const double z = ts.integrate([&](double r) { return std::exp(g(r) - shift); }, 0.0, 1.0, rel_tol, &err0);
	const double m = ts.integrate([&](double r) { return r * std::exp(g(r) - shift); }, 0.0, 1.0, rel_tol, &err1);
	if (!(z > 0.0) || !std::isfinite(z) || !std::isfinite(m))
		throw NumericError("beta weight posterior normalizer is not finite");
	if (err0 > 1e3 * rel_tol * z || err1 > 1e3 * rel_tol * std::max(m, 1e-300))
		throw NumericError("beta weight posterior quadrature did not converge");
	return {m / z, mode};
}

} // namespace detail

/// Closed form for Gamma(a, b): the tilted posterior is Gamma(a, b - c).
inline TiltedWeight tilted_gamma(const GammaWeights &g, double c) {
	const double rate = g.rate - c;
	if (!(rate > 0.0))
		throw InvalidHyperparameter("gamma weight posterior rate b_r - E[log l] = " + std::to_string(rate) +
		                            " is not positive");
	return {g.shape / rate, std::max(0.0, (g.shape - 1.0) / rate)};
}

/// Numerical mean and mode of q(r) ∝ p_r(r) exp(c r) for any family.
inline TiltedWeight tilted_quadrature(const WeightPrior &prior, double c, double rel_tol = 1e-10) {
	if (const auto *g = std::get_if<GammaWeights>(&prior.family()); g && !(g->rate - c > 0.0))
		throw InvalidHyperparameter("gamma weight posterior is improper for this tilt");
	if (const auto *b = std::get_if<BetaWeights>(&prior.family()))
		return detail::beta_tilted(*b, c, rel_tol);
	const double ceiling = detail::log_weight_ceiling(prior);
	const double center = std::min(detail::log_weight_center(prior, c), ceiling - 1e-3);

	// log density of u = log r, including the Jacobian e^u
	const auto log_u_density = [&](double u) {
		const double r = std::exp(u);
		if (r == 0.0 || !prior.in_support(r))
			return -std::numeric_limits<double>::infinity();
		return prior.log_density(r) + c * r + u;
	};
	const auto win = detail::bracket(log_u_density, center, ceiling);
	const auto mass = [&](double u) { return std::exp(log_u_density(u) - win.peak_value); };
	const auto first = [&](double u) { return std::exp(log_u_density(u) - win.peak_value + u - win.peak); };

	const double z = detail::integrate(mass, win.lo, win.peak, rel_tol) + detail::integrate(mass, win.peak, win.hi, rel_tol);
	const double m = detail::integrate(first, win.lo, win.peak, rel_tol) + detail::integrate(first, win.peak, win.hi, rel_tol);
	if (!(z > 0.0))
		throw NumericError("weight posterior normalizer vanished");

	// mode of the density in r (no Jacobian)
	const auto log_r_density = [&](double u) { return log_u_density(u) - u; };
	const auto mode_win = detail::bracket(log_r_density, center, ceiling);
	const double mode = mode_win.peak_at_left ? 0.0 : std::exp(mode_win.peak);
	return {std::exp(win.peak) * m / z, mode};
}

/// Dispatches to the closed form when available.
inline TiltedWeight tilted_weight(const WeightPrior &prior, double c) {
	if (prior.is_gamma())
		return tilted_gamma(prior.as_gamma(), c);
	return tilted_quadrature(prior, c);
}

} // namespace robreg
