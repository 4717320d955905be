#pragma once

// Synthetic instances, attack x estimator sweeps with ordered collection, and run manifests.

#include "robreg/attacks.hpp"
#include "robreg/brht.hpp"
#include "robreg/io.hpp"
#include "robreg/priors.hpp"
#include "robreg/rng.hpp"
#include "robreg/trip.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <thread>

#ifndef ROBREG_VERSION
#define ROBREG_VERSION "0.0.0-unknown"
#endif

namespace robreg {

inline constexpr const char *version_string = ROBREG_VERSION;

struct Instance {
	Dataset data;
	Vector w_star;
	Vector w0;
	Vector noise;
};

/// w* uniform on the sphere, x_i ~ N(0, I), y = X^T w* + eps with eps ~ N(0, sigma^2), w0 = w* + nu u.
inline Instance gen_instance(Index n, Index d, double sigma, double nu, std::uint64_t seed, std::uint64_t rep = 0) {
	if (n < 1 || d < 1)
		throw InvalidArgument("gen_instance needs n, d >= 1");
	if (!(sigma >= 0.0) || !(nu >= 0.0))
		throw InvalidArgument("gen_instance needs sigma, nu >= 0");
	CounterRng rng = CounterRng::derive(seed, {static_cast<std::uint64_t>(Stream::instance), rep});
	Instance out;
	out.w_star.resize(d);
	do {
		for (Index j = 0; j < d; ++j)
			out.w_star[j] = rng.normal();
	} while (out.w_star.norm() == 0.0);
	out.w_star /= out.w_star.norm();
	Matrix x(d, n);
	for (Index i = 0; i < n; ++i)
		for (Index j = 0; j < d; ++j)
			x(j, i) = rng.normal();
	out.noise.resize(n);
	for (Index i = 0; i < n; ++i)
		out.noise[i] = sigma * rng.normal();
	Vector u(d);
	for (Index j = 0; j < d; ++j)
		u[j] = rng.normal();
	out.w0 = out.w_star + nu * u;
	Vector y = x.transpose() * out.w_star + out.noise;
	out.data = Dataset(std::move(x), std::move(y));
	return out;
}

// --- configuration --------------------------------------------------------

struct AttackConfig {
	std::string kind = "oaa"; // oaa | adca | lpa
	double magnitude_hi = 10.0;
	double delta_factor = 0.2; // delta = delta_factor * n unless delta is set
	double delta = 0.0;
	bool exact_leverage = false;
	bool replace = false; // oaa: overwrite responses instead of shifting them
};

struct EstimatorConfig {
	std::string name;                 // ols | lad | crr | trip | brht
	double prior_precision_factor = 0; // prior covariance 1/(factor n) I around w0
	WeightPrior weight_prior = WeightPrior::gamma(4.0, 10.0);
	std::string label; // column label; defaults to name
};

struct ExperimentConfig {
	Index n = 2000, d = 100;
	std::vector<double> alpha_grid{0.1, 0.2, 0.3, 0.4};
	AttackConfig attack;
	std::vector<EstimatorConfig> estimators;
	double sigma = 1.0;
	double nu = 0.5;
	int replications = 10;
	std::uint64_t seed = 1;
	double k_factor = 1.2;
	double k_cap = 0.6;
	double tol = -1.0;
	int max_iter = 200;
	int brht_max_iter = 100;
	int workers = 1;

	void validate() const {
		if (n < 2 || d < 1)
			throw InvalidArgument("config needs n >= 2 and d >= 1");
		if (alpha_grid.empty() || estimators.empty())
			throw InvalidArgument("config needs a nonempty alpha grid and estimator list");
		if (replications < 1)
			throw InvalidArgument("config needs replications >= 1");
		for (double a : alpha_grid)
			if (!(a >= 0.0 && a < 1.0))
				throw InvalidArgument("alpha values must lie in [0, 1)");
		if (attack.kind != "oaa" && attack.kind != "adca" && attack.kind != "lpa")
			throw InvalidArgument("unknown attack kind '" + attack.kind + "'");
		for (const auto &e : estimators) {
			if (e.name != "ols" && e.name != "lad" && e.name != "crr" && e.name != "trip" && e.name != "brht")
				throw InvalidArgument("unknown estimator '" + e.name + "'");
			if ((e.name == "trip" || e.name == "brht") && !(e.prior_precision_factor > 0.0))
				throw InvalidArgument(e.name + " needs prior_precision_factor > 0");
		}
		if (!(sigma > 0.0) || !(nu >= 0.0))
			throw InvalidArgument("config needs sigma > 0 and nu >= 0");
		if (!(k_factor > 0.0) || !(k_cap > 0.0 && k_cap < 1.0))
			throw InvalidArgument("config needs k_factor > 0 and k_cap in (0, 1)");
		if (workers < 1)
			throw InvalidArgument("workers must be at least 1");
	}
};

inline Json to_json(const ExperimentConfig &c) {
	Json j;
	j["n"] = c.n;
	j["d"] = c.d;
	j["alpha_grid"] = c.alpha_grid;
	j["attack"] = {{"kind", c.attack.kind},
	               {"magnitude_hi", c.attack.magnitude_hi},
	               {"delta_factor", c.attack.delta_factor},
	               {"delta", c.attack.delta},
	               {"exact_leverage", c.attack.exact_leverage},
	               {"replace", c.attack.replace}};
	Json est = Json::array();
	for (const auto &e : c.estimators) {
		Json o{{"name", e.name}, {"label", e.label.empty() ? e.name : e.label}};
		if (e.name == "trip" || e.name == "brht")
			o["prior_precision_factor"] = e.prior_precision_factor;
		if (e.name == "brht")
			o["weight_prior"] = to_json(e.weight_prior);
		est.push_back(std::move(o));
	}
	j["estimators"] = std::move(est);
	j["sigma"] = c.sigma;
	j["nu"] = c.nu;
	j["replications"] = c.replications;
	j["seed"] = c.seed;
	j["k_factor"] = c.k_factor;
	j["k_cap"] = c.k_cap;
	j["tol"] = c.tol;
	j["max_iter"] = c.max_iter;
	j["brht_max_iter"] = c.brht_max_iter;
	j["workers"] = c.workers;
	return j;
}

inline ExperimentConfig experiment_config_from_json(const Json &j) {
	ExperimentConfig c;
	try {
		c.n = j.value("n", c.n);
		c.d = j.value("d", c.d);
		if (j.contains("alpha_grid"))
			c.alpha_grid = j.at("alpha_grid").get<std::vector<double>>();
		if (j.contains("attack")) {
			const Json &a = j.at("attack");
			c.attack.kind = a.value("kind", c.attack.kind);
			c.attack.magnitude_hi = a.value("magnitude_hi", c.attack.magnitude_hi);
			c.attack.delta_factor = a.value("delta_factor", c.attack.delta_factor);
			c.attack.delta = a.value("delta", c.attack.delta);
			c.attack.exact_leverage = a.value("exact_leverage", c.attack.exact_leverage);
			c.attack.replace = a.value("replace", c.attack.replace);
		}
		for (const auto &e : j.at("estimators")) {
			EstimatorConfig ec;
			ec.name = e.at("name").get<std::string>();
			ec.label = e.value("label", ec.name);
			ec.prior_precision_factor = e.value("prior_precision_factor", 0.0);
			if (e.contains("weight_prior"))
				ec.weight_prior = weight_prior_from_json(e.at("weight_prior"));
			c.estimators.push_back(std::move(ec));
		}
		c.sigma = j.value("sigma", c.sigma);
		c.nu = j.value("nu", c.nu);
		c.replications = j.value("replications", c.replications);
		c.seed = j.value("seed", c.seed);
		c.k_factor = j.value("k_factor", c.k_factor);
		c.k_cap = j.value("k_cap", c.k_cap);
		c.tol = j.value("tol", c.tol);
		c.max_iter = j.value("max_iter", c.max_iter);
		c.brht_max_iter = j.value("brht_max_iter", c.brht_max_iter);
		c.workers = j.value("workers", c.workers);
	} catch (const Json::exception &e) {
		throw InvalidArgument(std::string("malformed experiment config: ") + e.what());
	}
	c.validate();
	return c;
}

/// Estimator k: round(k_factor * round(alpha n)), capped at floor(k_cap n).
inline Index estimator_k(double alpha, Index n, double k_factor = 1.2, double k_cap = 0.6) {
	const double k_star = static_cast<double>(corruption_count(alpha, n));
	const Index k = static_cast<Index>(std::llround(k_factor * k_star));
	return std::min<Index>({k, static_cast<Index>(std::floor(k_cap * static_cast<double>(n))), n - 1});
}

// --- single cells -----------------------------------------------------------

struct AttackedInstance {
	Instance instance;
	CorruptionRecord record;
	Dataset data; // corrupted
};

inline AttackedInstance make_attacked(const ExperimentConfig &cfg, std::size_t alpha_idx, int rep) {
	const double alpha = cfg.alpha_grid[alpha_idx];
	AttackedInstance out{gen_instance(cfg.n, cfg.d, cfg.sigma, cfg.nu, cfg.seed, static_cast<std::uint64_t>(rep)), {}, {}};
	const std::uint64_t attack_seed =
	    CounterRng::derive(cfg.seed, {static_cast<std::uint64_t>(Stream::attack), alpha_idx, static_cast<std::uint64_t>(rep)})();
	AttackResult res;
	if (cfg.attack.kind == "oaa") {
		res = oaa(out.instance.data, alpha, cfg.attack.magnitude_hi, attack_seed, cfg.attack.replace);
	} else if (cfg.attack.kind == "lpa") {
		res = lpa(out.instance.data, alpha, attack_seed, cfg.attack.exact_leverage);
	} else {
		const double delta = cfg.attack.delta > 0.0 ? cfg.attack.delta : cfg.attack.delta_factor * static_cast<double>(cfg.n);
		AdcaOptions opt;
		opt.max_iter = cfg.max_iter;
		res = adca(out.instance.data, out.instance.w_star, delta, corruption_count(alpha, cfg.n), opt);
		res.record.params.seed = attack_seed;
	}
	out.data = std::move(res.data);
	out.record = std::move(res.record);
	return out;
}

struct EstimateOutcome {
	Vector w;
	std::optional<FitReport> report; // absent for OLS and LAD
};

inline EstimateOutcome run_estimator(const EstimatorConfig &e, const Dataset &data, const Vector &w0, double sigma2,
                                     Index k, double tol, int max_iter, int brht_max_iter, const Truth *truth = nullptr) {
	if (e.name == "ols")
		return {ordinary_least_squares(data), std::nullopt};
	if (e.name == "lad")
		return {lad_fit(data).w, std::nullopt};
	if (e.name == "crr") {
		TripOptions opt;
		opt.tol = tol;
		opt.max_iter = max_iter;
		opt.truth = truth;
		FitReport r = crr_fit(data, k, opt);
		return {r.w_hat, std::move(r)};
	}
	const double scale = 1.0 / (e.prior_precision_factor * static_cast<double>(data.n()));
	const CoefficientPrior prior = CoefficientPrior::isotropic(w0, scale);
	if (e.name == "trip") {
		TripOptions opt;
		opt.tol = tol;
		opt.max_iter = max_iter;
		opt.truth = truth;
		FitReport r = trip_fit(data, penalty_from_prior(prior, sigma2), w0, k, opt);
		return {r.w_hat, std::move(r)};
	}
	if (e.name == "brht") {
		BrhtOptions opt;
		opt.tol = tol;
		opt.max_iter = brht_max_iter;
		opt.truth = truth;
		FitReport r = brht_fit(data, e.weight_prior, prior, sigma2, k, opt).report;
		return {r.w_hat, std::move(r)};
	}
	throw InvalidArgument("unknown estimator '" + e.name + "'");
}

struct SweepRow {
	double alpha = 0.0;
	std::string estimator;
	int rep = 0;
	double error = std::numeric_limits<double>::quiet_NaN();
	double precision = std::numeric_limits<double>::quiet_NaN();
	double recall = std::numeric_limits<double>::quiet_NaN();
	int iterations = 0;
	bool converged = false;
	std::string status = "ok";
	double seconds = 0.0; // kept out of the CSV
};

/// |detected ∩ true| / |detected| and / |true|; an empty denominator counts as 1.
inline std::pair<double, double> support_precision_recall(const IndexSet &detected, const IndexSet &truth) {
	const double hit = static_cast<double>(set_intersection(detected, truth).size());
	const double p = detected.empty() ? 1.0 : hit / static_cast<double>(detected.size());
	const double r = truth.empty() ? 1.0 : hit / static_cast<double>(truth.size());
	return {p, r};
}

struct SweepResult {
	ExperimentConfig config;
	std::vector<SweepRow> rows; // ordered by (alpha, rep, estimator)
	double wall_seconds = 0.0;
};

inline std::vector<SweepRow> run_cell(const ExperimentConfig &cfg, std::size_t alpha_idx, int rep) {
	std::vector<SweepRow> rows;
	const double alpha = cfg.alpha_grid[alpha_idx];
	std::optional<AttackedInstance> inst;
	std::string attack_error;
	try {
		inst = make_attacked(cfg, alpha_idx, rep);
	} catch (const std::exception &e) {
		attack_error = std::string("attack failed: ") + e.what();
	}
	for (const auto &e : cfg.estimators) {
		SweepRow row;
		row.alpha = alpha;
		row.estimator = e.label.empty() ? e.name : e.label;
		row.rep = rep;
		if (!inst) {
			row.status = attack_error;
			rows.push_back(std::move(row));
			continue;
		}
		const auto start = std::chrono::steady_clock::now();
		try {
			const Index k = estimator_k(alpha, cfg.n, cfg.k_factor, cfg.k_cap);
			const EstimateOutcome out = run_estimator(e, inst->data, inst->instance.w0, cfg.sigma * cfg.sigma, k, cfg.tol,
			                                          cfg.max_iter, cfg.brht_max_iter);
			row.error = (out.w - inst->instance.w_star).norm();
			if (out.report) {
				std::tie(row.precision, row.recall) =
				    support_precision_recall(out.report->b_hat.support, inst->record.b_true.support);
				row.iterations = out.report->iterations;
				row.converged = out.report->converged;
			} else {
				row.converged = true;
			}
		} catch (const std::exception &ex) {
			row.status = std::string("fit failed: ") + ex.what();
		}
		row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
		rows.push_back(std::move(row));
	}
	return rows;
}

/// Cells run on `workers` threads; rows are collected in (alpha, rep, estimator) order regardless of scheduling.
inline SweepResult run_sweep(const ExperimentConfig &cfg) {
	cfg.validate();
	const auto start = std::chrono::steady_clock::now();
	const std::size_t n_alpha = cfg.alpha_grid.size();
	const std::size_t cells = n_alpha * static_cast<std::size_t>(cfg.replications);
	std::vector<std::vector<SweepRow>> slots(cells);
	std::atomic<std::size_t> next{0};
	auto worker = [&] {
		for (std::size_t c = next++; c < cells; c = next++)
			slots[c] = run_cell(cfg, c / static_cast<std::size_t>(cfg.replications),
			                    static_cast<int>(c % static_cast<std::size_t>(cfg.replications)));
	};
	const int threads = std::min<int>(cfg.workers, static_cast<int>(cells));
	if (threads <= 1) {
		worker();
	} else {
		std::vector<std::thread> pool;
		for (int t = 0; t < threads; ++t)
			pool.emplace_back(worker);
		for (auto &t : pool)
			t.join();
	}
	SweepResult out;
	out.config = cfg;
	for (auto &s : slots)
		for (auto &r : s)
			out.rows.push_back(std::move(r));
	out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
	return out;
}

struct SummaryRow {
	double alpha;
	std::string estimator;
	double mean, std, median;
	int ok;
};

inline std::vector<SummaryRow> summarize(const SweepResult &res) {
	std::vector<SummaryRow> out;
	for (double alpha : res.config.alpha_grid) {
		for (const auto &e : res.config.estimators) {
			const std::string label = e.label.empty() ? e.name : e.label;
			std::vector<double> errs;
			for (const auto &r : res.rows)
				if (r.alpha == alpha && r.estimator == label && r.status == "ok")
					errs.push_back(r.error);
			SummaryRow s{alpha, label, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
			             std::numeric_limits<double>::quiet_NaN(), static_cast<int>(errs.size())};
			if (!errs.empty()) {
				const double m = std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(errs.size());
				double v = 0.0;
				for (double x : errs)
					v += (x - m) * (x - m);
				s.mean = m;
				s.std = errs.size() > 1 ? std::sqrt(v / static_cast<double>(errs.size() - 1)) : 0.0;
				std::sort(errs.begin(), errs.end());
				const std::size_t h = errs.size() / 2;
				s.median = errs.size() % 2 ? errs[h] : 0.5 * (errs[h - 1] + errs[h]);
			}
			out.push_back(std::move(s));
		}
	}
	return out;
}

inline std::string csv_field(const std::string &s) {
	if (s.find_first_of(",\"\n") == std::string::npos)
		return s;
	std::string q = "\"";
	for (char c : s) {
		if (c == '"')
			q += '"';
		q += c == '\n' ? ' ' : c;
	}
	return q + "\"";
}

inline std::string results_csv(const SweepResult &res) {
	std::string s = "alpha,estimator,rep,error,precision,recall,iterations,converged,status\n";
	for (const auto &r : res.rows)
		s += format_double(r.alpha) + "," + csv_field(r.estimator) + "," + std::to_string(r.rep) + "," +
		     format_double(r.error) + "," + format_double(r.precision) + "," + format_double(r.recall) + "," +
		     std::to_string(r.iterations) + "," + (r.converged ? "1" : "0") + "," + csv_field(r.status) + "\n";
	return s;
}

inline std::string summary_csv(const SweepResult &res) {
	std::string s = "alpha,estimator,mean_error,std_error,median_error,ok_runs\n";
	for (const auto &r : summarize(res))
		s += format_double(r.alpha) + "," + csv_field(r.estimator) + "," + format_double(r.mean) + "," +
		     format_double(r.std) + "," + format_double(r.median) + "," + std::to_string(r.ok) + "\n";
	return s;
}

/// Full config, version and timings; `config` alone reproduces the CSVs.
inline Json sweep_manifest(const SweepResult &res) {
	Json j;
	j["version"] = version_string;
	j["config"] = to_json(res.config);
	j["seed"] = res.config.seed;
	j["streams"] = {{"instance", "derive(seed, instance, rep)"}, {"attack", "derive(seed, attack, alpha_index, rep)"}};
	j["wall_seconds"] = res.wall_seconds;
	Json cells = Json::array();
	for (const auto &r : res.rows)
		cells.push_back({{"alpha", r.alpha}, {"estimator", r.estimator}, {"rep", r.rep}, {"seconds", r.seconds}});
	j["cell_seconds"] = std::move(cells);
	return j;
}

inline void write_sweep(const SweepResult &res, const std::string &dir) {
	std::filesystem::create_directories(dir);
	write_text(dir + "/results.csv", results_csv(res));
	write_text(dir + "/summary.csv", summary_csv(res));
	write_text(dir + "/manifest.json", json_text(sweep_manifest(res)));
}

// --- convergence traces -----------------------------------------------------

struct TraceRow {
	int t;
	double err_w, err_b, u;
};

/// One fit with truth attached; U is filled for BRHT only.
inline std::vector<TraceRow> convergence_trace(const AttackedInstance &inst, const EstimatorConfig &e, double sigma2,
                                               Index k, double tol = -1.0, int max_iter = 200) {
	const Truth truth{inst.instance.w_star, inst.record.b_true};
	const EstimateOutcome out = run_estimator(e, inst.data, inst.instance.w0, sigma2, k, tol, max_iter, max_iter, &truth);
	if (!out.report)
		throw InvalidArgument("convergence traces need an iterative estimator (crr, trip or brht)");
	std::vector<TraceRow> rows;
	const auto &r = *out.report;
	for (std::size_t t = 0; t < r.trace.size(); ++t)
		rows.push_back({static_cast<int>(t + 1), r.trace[t].err_w, r.trace[t].err_b,
		                t < r.u_trace.size() ? r.u_trace[t] : std::numeric_limits<double>::quiet_NaN()});
	return rows;
}

inline std::string convergence_csv(const std::vector<TraceRow> &rows) {
	std::string s = "t,err_w,err_b,u\n";
	for (const auto &r : rows)
		s += std::to_string(r.t) + "," + format_double(r.err_w) + "," + format_double(r.err_b) + "," + format_double(r.u) +
		     "\n";
	return s;
}

} // namespace robreg
