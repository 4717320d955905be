// robreg command line: fit, attack, sweep, diag, ssa, gen.
// Exit codes: 0 ok, 2 invalid input or configuration, 3 numerical failure.

#include "robreg/data_prior.hpp"
#include "robreg/diagnostics.hpp"
#include "robreg/harness.hpp"
#include "robreg/io.hpp"
#include "robreg/ssa.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

using namespace robreg;

namespace {

void emit(const std::string &path, const std::string &text) {
	if (path.empty() || path == "-")
		std::cout << text;
	else
		write_text(path, text);
}

Json truth_file(const std::string &path) {
	const Json j = read_json(path);
	if (!j.contains("w_star"))
		throw InvalidArgument("truth file '" + path + "' has no w_star");
	return j;
}

Truth truth_from_json(const Json &j, Index n) {
	Truth t;
	t.w_star = vector_from_json(j.at("w_star"), "w_star");
	t.b_star.values = Vector::Zero(n);
	if (j.contains("support")) {
		t.b_star.support = index_set_from_json(j.at("support"));
		const Vector vals = j.contains("b_true") ? vector_from_json(j.at("b_true"), "b_true") : Vector();
		if (vals.size() != 0 && vals.size() != static_cast<Index>(t.b_star.support.size()))
			throw InvalidArgument("truth: b_true and support lengths differ");
		for (std::size_t j2 = 0; j2 < t.b_star.support.size(); ++j2) {
			const Index i = t.b_star.support[j2];
			if (i < 0 || i >= n)
				throw InvalidArgument("truth: support index out of range");
			if (vals.size() != 0)
				t.b_star.values[i] = vals[static_cast<Index>(j2)];
		}
	}
	return t;
}

// --- fit --------------------------------------------------------------------

struct FitArgs {
	std::string data, estimator = "trip", prior, weight_prior, truth, out, trace, posterior;
	long k = -1;
	double sigma2 = 1.0, tol = -1.0;
	int max_iter = 0;
	bool penalized_final = false;
};

int run_fit(const FitArgs &a) {
	const Dataset data = read_dataset_csv(a.data);
	std::optional<Truth> truth;
	if (!a.truth.empty())
		truth = truth_from_json(truth_file(a.truth), data.n());

	Json out;
	out["estimator"] = a.estimator;
	if (a.estimator == "ols" || a.estimator == "lad") {
		const Vector w = a.estimator == "ols" ? ordinary_least_squares(data) : lad_fit(data).w;
		out["w_hat"] = to_json(w);
		if (truth)
			out["error"] = (w - truth->w_star).norm();
		emit(a.out, json_text(out));
		return 0;
	}
	if (a.k < 0)
		throw InvalidArgument("--k is required for " + a.estimator);
	const Index k = a.k;

	FitReport rep;
	if (a.estimator == "crr") {
		TripOptions opt;
		opt.tol = a.tol;
		opt.max_iter = a.max_iter > 0 ? a.max_iter : 200;
		opt.truth = truth ? &*truth : nullptr;
		rep = crr_fit(data, k, opt);
	} else {
		if (a.prior.empty())
			throw InvalidArgument("--prior is required for " + a.estimator);
		const CoefficientPrior prior = coefficient_prior_from_json(read_json(a.prior));
		if (prior.dim() != data.d())
			throw InvalidArgument("prior dimension does not match the data");
		if (a.estimator == "trip") {
			TripOptions opt;
			opt.tol = a.tol;
			opt.max_iter = a.max_iter > 0 ? a.max_iter : 200;
			opt.penalized_final = a.penalized_final;
			opt.truth = truth ? &*truth : nullptr;
			rep = trip_fit(data, penalty_from_prior(prior, a.sigma2), prior.mean, k, opt);
		} else if (a.estimator == "brht") {
			const WeightPrior wp =
			    a.weight_prior.empty() ? WeightPrior::gamma(4.0, 10.0) : weight_prior_from_json(read_json(a.weight_prior));
			BrhtOptions opt;
			opt.tol = a.tol;
			opt.max_iter = a.max_iter > 0 ? a.max_iter : 100;
			opt.truth = truth ? &*truth : nullptr;
			BrhtResult res = brht_fit(data, wp, prior, a.sigma2, k, opt);
			rep = std::move(res.report);
			if (!a.posterior.empty())
				write_text(a.posterior, json_text(to_json(res.posterior)));
		} else {
			throw InvalidArgument("unknown estimator '" + a.estimator + "'");
		}
	}
	out.update(to_json(rep));
	if (truth)
		out["error"] = (rep.w_hat - truth->w_star).norm();
	if (!a.trace.empty())
		write_text(a.trace, trace_csv(rep));
	emit(a.out, json_text(out));
	return 0;
}

// --- attack -------------------------------------------------------------------

struct AttackArgs {
	std::string data, kind = "oaa", truth, out_data, out_record;
	double alpha = 0.1, delta = -1.0, magnitude_hi = 10.0;
	std::uint64_t seed = 0;
	int max_iter = 200;
	bool exact_leverage = false, replace = false;
};

int run_attack(const AttackArgs &a) {
	const Dataset data = read_dataset_csv(a.data);
	std::optional<Json> truth;
	if (!a.truth.empty())
		truth = truth_file(a.truth);
	AttackResult res;
	if (a.kind == "oaa") {
		res = oaa(data, a.alpha, a.magnitude_hi, a.seed, a.replace);
	} else if (a.kind == "lpa") {
		res = lpa(data, a.alpha, a.seed, a.exact_leverage);
	} else if (a.kind == "adca") {
		if (!truth)
			throw InvalidArgument("adca needs --truth with w_star");
		const double delta = a.delta > 0.0 ? a.delta : 0.2 * static_cast<double>(data.n());
		AdcaOptions opt;
		opt.max_iter = a.max_iter;
		res = adca(data, vector_from_json(truth->at("w_star"), "w_star"), delta, corruption_count(a.alpha, data.n()), opt);
		res.record.params.seed = a.seed;
	} else {
		throw InvalidArgument("unknown attack kind '" + a.kind + "'");
	}
	Json rec = to_json(res.record);
	if (truth)
		rec["w_star"] = truth->at("w_star");
	emit(a.out_data, dataset_csv(res.data));
	if (!a.out_record.empty())
		write_text(a.out_record, json_text(rec));
	return 0;
}

// --- gen ------------------------------------------------------------------------

struct GenArgs {
	long n = 2000, d = 100;
	double sigma = 1.0, nu = 0.5, prior_factor = 0.0;
	std::uint64_t seed = 0, rep = 0;
	std::string out = ".";
};

int run_gen(const GenArgs &a) {
	const Instance inst = gen_instance(a.n, a.d, a.sigma, a.nu, a.seed, a.rep);
	std::filesystem::create_directories(a.out);
	write_text(a.out + "/data.csv", dataset_csv(inst.data));
	write_text(a.out + "/truth.json", json_text({{"w_star", to_json(inst.w_star)}, {"w0", to_json(inst.w0)}}));
	if (a.prior_factor > 0.0) {
		const CoefficientPrior p = CoefficientPrior::isotropic(inst.w0, 1.0 / (a.prior_factor * static_cast<double>(a.n)));
		write_text(a.out + "/prior.json", json_text(to_json(p)));
	}
	return 0;
}

// --- sweep ------------------------------------------------------------------------

int run_sweep_cmd(const std::string &config, const std::string &out, int workers) {
	ExperimentConfig cfg = experiment_config_from_json(read_json(config));
	if (workers > 0)
		cfg.workers = workers;
	const SweepResult res = run_sweep(cfg);
	write_sweep(res, out);
	std::cout << summary_csv(res);
	return 0;
}

// --- diag ---------------------------------------------------------------------------

struct DiagArgs {
	std::string op, data, out;
	long m = 1, k = 0, k_star = 0, n = 2000, d = 100;
	double penalty_scale = 0.0, alpha = 0.3, l = 1.0, delta_factor = 0.2, sigma2 = 1.0, nu = 0.5;
	std::vector<double> xi;
	int grid = 0;
	bool sampled = false;
	std::uint64_t samples = 100000, seed = 0;
	std::string kind = "adca";
};

int run_diag(const DiagArgs &a) {
	if (a.op == "breakdown") {
		std::vector<double> xs = a.xi;
		if (a.grid > 1)
			for (int j = 0; j < a.grid; ++j)
				xs.push_back(std::min(22.175, 22.175 * j / (a.grid - 1)));
		if (xs.empty())
			throw InvalidArgument("breakdown needs --xi or --grid");
		std::string s = "xi,bound\n";
		for (double x : xs)
			s += format_double(x) + "," + format_double(breakdown_bound(x)) + "\n";
		emit(a.out, s);
		return 0;
	}
	if (a.op == "ssc" || a.op == "margin") {
		const Dataset data = read_dataset_csv(a.data);
		if (a.op == "ssc") {
			const SubsetEigenBounds b = a.sampled ? ssc_sss_sampled(data, a.m, a.samples, a.seed) : ssc_sss(data, a.m);
			emit(a.out, "m,lambda_min,lambda_max,approximate,subsets\n" + std::to_string(a.m) + "," +
			                format_double(b.lambda_min) + "," + format_double(b.lambda_max) + "," +
			                (b.approximate ? "1" : "0") + "," + std::to_string(b.subsets) + "\n");
		} else {
			const PenaltyMatrix pen = PenaltyMatrix::scaled_identity(data.d(), a.penalty_scale);
			const double margin = convergence_margin(data, pen, a.k, a.k_star, a.sampled, a.samples, a.seed);
			emit(a.out, "k,k_star,penalty_scale,margin,certified\n" + std::to_string(a.k) + "," + std::to_string(a.k_star) +
			                "," + format_double(a.penalty_scale) + "," + format_double(margin) + "," +
			                (margin < 1.0 ? "1" : "0") + "\n");
		}
		return 0;
	}
	if (a.op == "assumption1") {
		if (!(a.penalty_scale > 0.0))
			throw InvalidArgument("assumption1 needs --penalty-scale > 0");
		const Instance inst = gen_instance(a.n, a.d, std::sqrt(a.sigma2), a.nu, a.seed);
		const Index k_star = corruption_count(a.alpha, a.n);
		AttackResult att;
		if (a.kind == "adca")
			att = adca(inst.data, inst.w_star, a.delta_factor * static_cast<double>(a.n), k_star);
		else if (a.kind == "oaa")
			att = oaa(inst.data, a.alpha, 10.0, a.seed);
		else
			throw InvalidArgument("assumption1 supports --kind adca or oaa");
		const Assumption1Truth truth{inst.w_star, inst.noise, att.record.b_true};
		const Index k = a.k > 0 ? a.k : estimator_k(a.alpha, a.n);
		const Assumption1Trace tr =
		    assumption1_trace(att.data, truth, PenaltyMatrix::scaled_identity(a.d, a.penalty_scale), inst.w0, a.l,
		                      WeightPrior::gamma(4.0, 10.0), a.sigma2, k);
		emit(a.out, assumption1_csv(tr));
		std::cerr << "mean ratio " << format_double(tr.ratio_mean) << ", max " << format_double(tr.gamma_max) << "\n";
		return 0;
	}
	throw InvalidArgument("unknown diag op '" + a.op + "'");
}

// --- ssa ----------------------------------------------------------------------------

struct SsaArgs {
	bool synth = false, recover = false, trend = false;
	std::string series, models, clean, out = ".";
	std::vector<std::string> jumps;
	int n_periods = 50, ppp = 400, standard_period = 1, knn_k = 5, degree = 9;
	double period = 1.0, outlier_fraction = 0.3, noise = 0.05, s = 100.0, alpha = 0.36, tc = 0.5, threshold = 5.0;
	std::uint64_t seed = 0;
};

Json models_json(const RecoveryResult &r, const std::vector<int> &failed) {
	Json models = Json::array();
	for (const auto &m : r.models)
		models.push_back(m.coefficients.size() ? to_json(m.coefficients) : Json());
	return {{"degree", r.models.empty() ? 0 : r.models.front().degree},
	        {"period", r.recovered.period},
	        {"n_periods", r.recovered.n_periods},
	        {"coefficients", std::move(models)},
	        {"failed_periods", failed}};
}

int run_ssa(const SsaArgs &a) {
	const int modes = int(a.synth) + int(a.recover) + int(a.trend);
	if (modes != 1)
		throw InvalidArgument("choose exactly one of --synth, --recover, --trend");
	std::filesystem::create_directories(a.out);
	if (a.synth) {
		SynthSsaConfig cfg;
		cfg.n_periods = a.n_periods;
		cfg.points_per_period = a.ppp;
		cfg.period = a.period;
		cfg.outlier_fraction = a.outlier_fraction;
		cfg.noise_sigma = a.noise;
		cfg.seed = a.seed;
		if (a.jumps.empty()) {
			std::erase_if(cfg.jumps, [&](const auto &j) { return j.first > cfg.n_periods; });
		} else {
			cfg.jumps.clear();
			for (const std::string &spec : a.jumps) {
				const auto colon = spec.find(':');
				if (colon == std::string::npos)
					throw InvalidArgument("--jump expects PERIOD:OFFSET, got '" + spec + "'");
				cfg.jumps.emplace_back(static_cast<int>(parse_double(spec.substr(0, colon))), parse_double(spec.substr(colon + 1)));
			}
		}
		const SynthSsa syn = synth_ssa(cfg);
		write_text(a.out + "/series.csv", series_csv(syn.series.t, syn.series.p));
		write_text(a.out + "/truth.csv", truth_csv(syn));
		return 0;
	}
	if (a.recover) {
		const PeriodicSeries series = read_series_csv(a.series, a.period, a.n_periods);
		std::vector<bool> keep;
		if (!a.clean.empty())
			keep = read_clean_mask(a.clean, series);
		const StandardFit standard =
		    fit_standard_period(series, a.standard_period, a.degree, keep.empty() ? nullptr : &keep);
		const RecoveryResult rec = recover_series(series, standard.model, a.s, a.alpha);
		std::vector<int> failed;
		for (std::size_t i = 0; i < rec.failures.size(); ++i)
			if (!rec.failures[i].empty()) {
				failed.push_back(static_cast<int>(i) + 1);
				std::cerr << "period " << i + 1 << " skipped: " << rec.failures[i] << "\n";
			}
		write_text(a.out + "/recovered.csv", series_csv(rec.recovered.t, rec.recovered.p));
		write_text(a.out + "/models.json", json_text(models_json(rec, failed)));
		return 0;
	}
	const Json mj = read_json(a.models);
	std::vector<ChebyshevModel> models;
	PeriodicSeries shell;
	try {
		shell.period = mj.at("period").get<double>();
		shell.n_periods = mj.at("n_periods").get<int>();
		const int degree = mj.at("degree").get<int>();
		for (const auto &c : mj.at("coefficients"))
			models.push_back({degree, c.is_null() ? Vector() : vector_from_json(c, "coefficients"), 0.0, shell.period});
	} catch (const Json::exception &e) {
		throw InvalidArgument(std::string("malformed models file: ") + e.what());
	}
	const Trend tr = extract_trend(shell, models, a.tc, a.knn_k);
	std::string s = "t,raw,smoothed\n";
	for (std::size_t i = 0; i < tr.t.size(); ++i)
		s += format_double(tr.t[i]) + "," + format_double(tr.raw[i]) + "," + format_double(tr.smoothed[i]) + "\n";
	write_text(a.out + "/trend.csv", s);
	std::string js = "period_index,t\n";
	for (int idx : detect_jumps(tr.raw, a.threshold)) {
		// the jump lands between points idx-1 and idx; report the period that starts after it
		const int period_index = static_cast<int>(std::llround((tr.t[static_cast<std::size_t>(idx)] - a.tc) / shell.period)) + 1;
		js += std::to_string(period_index) + "," + format_double(tr.t[static_cast<std::size_t>(idx)]) + "\n";
	}
	write_text(a.out + "/jumps.csv", js);
	return 0;
}

} // namespace

int main(int argc, char **argv) {
	CLI::App app{"robust regression with prior-guided hard thresholding"};
	app.set_version_flag("--version", std::string(version_string));
	app.require_subcommand(1);

	FitArgs fa;
	auto *fit = app.add_subcommand("fit", "fit one estimator to a dataset CSV (y, x1..xd)");
	fit->add_option("--data", fa.data, "dataset CSV")->required();
	fit->add_option("--estimator", fa.estimator)->check(CLI::IsMember({"ols", "lad", "crr", "trip", "brht"}));
	fit->add_option("--prior", fa.prior, "coefficient prior JSON {mean, covariance_scale|covariance}");
	fit->add_option("--weight-prior", fa.weight_prior, "weight prior JSON (brht)");
	fit->add_option("--k", fa.k, "corruption count");
	fit->add_option("--sigma2", fa.sigma2);
	fit->add_option("--tol", fa.tol, "stopping tolerance on ||b change|| (default 1e-4 ||y||)");
	fit->add_option("--max-iter", fa.max_iter);
	fit->add_flag("--penalized-final", fa.penalized_final, "trip: return the penalized coefficient instead of the OLS refit");
	fit->add_option("--truth", fa.truth, "JSON with w_star and optionally support/b_true");
	fit->add_option("--trace", fa.trace, "per-iteration CSV");
	fit->add_option("--posterior", fa.posterior, "brht: final posterior JSON");
	fit->add_option("--out", fa.out, "report JSON (default stdout)");

	AttackArgs aa;
	auto *attack = app.add_subcommand("attack", "corrupt a dataset");
	attack->add_option("--data", aa.data)->required();
	attack->add_option("--kind", aa.kind)->check(CLI::IsMember({"oaa", "adca", "lpa"}));
	attack->add_option("--alpha", aa.alpha);
	attack->add_option("--delta", aa.delta, "adca reward weight (default 0.2 n)");
	attack->add_option("--magnitude-hi", aa.magnitude_hi);
	attack->add_option("--seed", aa.seed);
	attack->add_option("--max-iter", aa.max_iter);
	attack->add_flag("--exact-leverage", aa.exact_leverage);
	attack->add_flag("--replace", aa.replace, "oaa: overwrite corrupted responses with the uniform draw");
	attack->add_option("--truth", aa.truth, "JSON with w_star");
	attack->add_option("--out", aa.out_data, "corrupted dataset CSV (default stdout)");
	attack->add_option("--record", aa.out_record, "corruption record JSON");

	GenArgs ga;
	auto *gen = app.add_subcommand("gen", "synthetic instance");
	gen->add_option("--n", ga.n);
	gen->add_option("--d", ga.d);
	gen->add_option("--sigma", ga.sigma);
	gen->add_option("--nu", ga.nu);
	gen->add_option("--seed", ga.seed);
	gen->add_option("--rep", ga.rep);
	gen->add_option("--prior-factor", ga.prior_factor, "also write prior.json with covariance 1/(factor n) I");
	gen->add_option("--out", ga.out);

	std::string sweep_config, sweep_out = "sweep_out";
	int sweep_workers = 0;
	auto *sweep = app.add_subcommand("sweep", "attack x estimator grid");
	sweep->add_option("--config", sweep_config)->required();
	sweep->add_option("--out", sweep_out);
	sweep->add_option("--workers", sweep_workers, "overrides the config; results do not depend on it");

	DiagArgs da;
	auto *diag = app.add_subcommand("diag", "theory diagnostics");
	diag->add_option("--op", da.op)->required()->check(CLI::IsMember({"ssc", "margin", "breakdown", "assumption1"}));
	diag->add_option("--data", da.data);
	diag->add_option("--m", da.m);
	diag->add_option("--k", da.k);
	diag->add_option("--k-star", da.k_star);
	diag->add_option("--penalty-scale", da.penalty_scale, "M = scale * I");
	diag->add_flag("--sampled", da.sampled);
	diag->add_option("--samples", da.samples);
	diag->add_option("--seed", da.seed);
	diag->add_option("--xi", da.xi);
	diag->add_option("--grid", da.grid);
	diag->add_option("--n", da.n);
	diag->add_option("--d", da.d);
	diag->add_option("--alpha", da.alpha);
	diag->add_option("--l", da.l);
	diag->add_option("--kind", da.kind);
	diag->add_option("--delta-factor", da.delta_factor);
	diag->add_option("--sigma2", da.sigma2);
	diag->add_option("--nu", da.nu);
	diag->add_option("--out", da.out);

	SsaArgs sa;
	auto *ssa = app.add_subcommand("ssa", "periodic telemetry recovery");
	ssa->add_flag("--synth", sa.synth);
	ssa->add_flag("--recover", sa.recover);
	ssa->add_flag("--trend", sa.trend);
	ssa->add_option("--series", sa.series, "CSV with t,p");
	ssa->add_option("--models", sa.models, "models.json from --recover");
	ssa->add_option("--out", sa.out, "output directory");
	ssa->add_option("--n-periods", sa.n_periods);
	ssa->add_option("--ppp", sa.ppp, "points per period (synth)");
	ssa->add_option("--period", sa.period);
	ssa->add_option("--outlier-fraction", sa.outlier_fraction);
	ssa->add_option("--noise", sa.noise);
	ssa->add_option("--jump", sa.jumps, "PERIOD:OFFSET step, repeatable (default 18:-0.4 and 35:-0.5 where they fit)");
	ssa->add_option("--seed", sa.seed);
	ssa->add_option("--standard-period", sa.standard_period);
	ssa->add_option("--clean", sa.clean, "truth CSV whose is_outlier column cleans the standard period");
	ssa->add_option("--degree", sa.degree);
	ssa->add_option("--s", sa.s);
	ssa->add_option("--alpha", sa.alpha);
	ssa->add_option("--tc", sa.tc);
	ssa->add_option("--knn-k", sa.knn_k);
	ssa->add_option("--threshold", sa.threshold);

	try {
		app.parse(argc, argv);
	} catch (const CLI::Success &e) {
		return app.exit(e);
	} catch (const CLI::ParseError &e) {
		app.exit(e);
		return 2;
	}

	try {
		if (*fit)
			return run_fit(fa);
		if (*attack)
			return run_attack(aa);
		if (*gen)
			return run_gen(ga);
		if (*sweep)
			return run_sweep_cmd(sweep_config, sweep_out, sweep_workers);
		if (*diag)
			return run_diag(da);
		if (*ssa)
			return run_ssa(sa);
	} catch (const InvalidArgument &e) {
		std::cerr << "error: " << e.what() << "\n";
		return 2;
	} catch (const NumericError &e) {
		std::cerr << "numeric failure: " << e.what() << "\n";
		return 3;
	} catch (const Json::exception &e) {
		std::cerr << "error: " << e.what() << "\n";
		return 2;
	} catch (const std::exception &e) {
		std::cerr << "failure: " << e.what() << "\n";
		return 3;
	}
	return 0;
}
