#pragma once

// Counter-based deterministic random numbers (SplitMix64 in counter mode).
// Every draw is a pure function of (key, counter), so independent streams are
// obtained by deriving keys from (seed, stream tags) and never interfere.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>

namespace robreg {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
	z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
	z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
	return z ^ (z >> 31);
}

enum class Stream : std::uint64_t {
	instance = 0x1001,
	attack = 0x2002,
	estimator = 0x3003,
	synth = 0x4004,
	sampling = 0x5005,
	folds = 0x6006,
};

class CounterRng {
public:
	using result_type = std::uint64_t;

	explicit CounterRng(std::uint64_t key) : key_(mix64(key ^ 0x6a09e667f3bcc909ULL)) {}

	/// Key derived from a seed and a path of stream tags, e.g. (seed, Stream::attack, alpha_idx, rep).
	static CounterRng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
		std::uint64_t key = mix64(seed + 0x9e3779b97f4a7c15ULL);
		for (std::uint64_t t : tags)
			key = mix64(key ^ mix64(t + 0x9e3779b97f4a7c15ULL));
		return CounterRng(key);
	}

	static constexpr result_type min() { return 0; }
	static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

	result_type operator()() { return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

	/// Uniform on [0, 1) with 53 random bits.
	double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

	double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

	/// Uniform integer in [0, bound) by rejection.
	std::uint64_t below(std::uint64_t bound) {
		const std::uint64_t limit = max() - max() % bound;
		std::uint64_t r;
		do {
			r = (*this)();
		} while (r >= limit);
		return r % bound;
	}

	/// Standard normal via Box-Muller; the second variate is cached.
	double normal() {
		if (has_spare_) {
			has_spare_ = false;
			return spare_;
		}
		double u1;
		do {
			u1 = uniform();
		} while (u1 <= 0.0);
		const double u2 = uniform();
		const double radius = std::sqrt(-2.0 * std::log(u1));
		const double angle = 2.0 * std::numbers::pi * u2;
		spare_ = radius * std::sin(angle);
		has_spare_ = true;
		return radius * std::cos(angle);
	}

	std::uint64_t counter() const { return counter_; }

private:
	std::uint64_t key_;
	std::uint64_t counter_ = 0;
	double spare_ = 0.0;
	bool has_spare_ = false;
};

} // namespace robreg
