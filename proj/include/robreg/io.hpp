#pragma once

// CSV and JSON persistence. Doubles are written in shortest round-trip form so reruns are byte-identical.

#include "robreg/attacks.hpp"
#include "robreg/brht.hpp"
#include "robreg/diagnostics.hpp"
#include "robreg/priors.hpp"
#include "robreg/ssa.hpp"
#include "robreg/trip.hpp"
#include "robreg/vbem.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace robreg {

using Json = nlohmann::ordered_json;

inline std::string format_double(double v) {
	if (std::isnan(v))
		return "nan";
	if (std::isinf(v))
		return v > 0 ? "inf" : "-inf";
	char buf[32];
	const auto res = std::to_chars(buf, buf + sizeof(buf), v);
	return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
	while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
		s.remove_prefix(1);
	while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
		s.remove_suffix(1);
	if (!s.empty() && s.front() == '+')
		s.remove_prefix(1);
	double v = 0.0;
	const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
	if (res.ec != std::errc() || res.ptr != s.data() + s.size())
		throw InvalidArgument("cannot parse '" + std::string(s) + "' as a number");
	return v;
}

inline std::vector<std::string> split_csv_line(const std::string &line) {
	std::vector<std::string> out;
	std::string cell;
	std::istringstream in(line);
	while (std::getline(in, cell, ','))
		out.push_back(cell);
	if (!line.empty() && line.back() == ',')
		out.emplace_back();
	for (auto &c : out) {
		while (!c.empty() && (c.back() == '\r' || c.back() == ' '))
			c.pop_back();
		while (!c.empty() && c.front() == ' ')
			c.erase(c.begin());
	}
	return out;
}

struct CsvTable {
	std::vector<std::string> header;
	std::vector<std::vector<double>> rows;

	std::size_t column(const std::string &name) const {
		for (std::size_t j = 0; j < header.size(); ++j)
			if (header[j] == name)
				return j;
		throw InvalidArgument("CSV has no column '" + name + "'");
	}
};

inline CsvTable read_csv(const std::string &path) {
	std::ifstream in(path);
	if (!in)
		throw InvalidArgument("cannot open '" + path + "'");
	CsvTable t;
	std::string line;
	if (!std::getline(in, line))
		throw InvalidArgument("'" + path + "' is empty");
	t.header = split_csv_line(line);
	std::size_t lineno = 1;
	while (std::getline(in, line)) {
		++lineno;
		if (line.empty() || line == "\r")
			continue;
		const auto cells = split_csv_line(line);
		if (cells.size() != t.header.size())
			throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
			                      " fields");
		std::vector<double> row;
		row.reserve(cells.size());
		for (const auto &c : cells) {
			if (c == "true")
				row.push_back(1.0);
			else if (c == "false")
				row.push_back(0.0);
			else
				row.push_back(parse_double(c));
		}
		t.rows.push_back(std::move(row));
	}
	return t;
}

inline void write_text(const std::string &path, const std::string &text) {
	std::ofstream out(path, std::ios::binary);
	if (!out)
		throw InvalidArgument("cannot write '" + path + "'");
	out << text;
}

/// Header y,x1..xd; one row per sample, transposed into the d x n layout.
inline Dataset read_dataset_csv(const std::string &path) {
	const CsvTable t = read_csv(path);
	if (t.header.empty() || t.header[0] != "y")
		throw InvalidArgument("dataset CSV must start with a 'y' column");
	const Index d = static_cast<Index>(t.header.size()) - 1;
	for (Index j = 1; j <= d; ++j)
		if (t.header[static_cast<std::size_t>(j)] != "x" + std::to_string(j))
			throw InvalidArgument("dataset CSV columns must be y,x1..xd");
	const Index n = static_cast<Index>(t.rows.size());
	Matrix x(d, n);
	Vector y(n);
	for (Index i = 0; i < n; ++i) {
		const auto &row = t.rows[static_cast<std::size_t>(i)];
		y[i] = row[0];
		for (Index j = 0; j < d; ++j)
			x(j, i) = row[static_cast<std::size_t>(j + 1)];
	}
	return Dataset(std::move(x), std::move(y));
}

inline std::string dataset_csv(const Dataset &data) {
	std::string s = "y";
	for (Index j = 1; j <= data.d(); ++j)
		s += ",x" + std::to_string(j);
	s += '\n';
	for (Index i = 0; i < data.n(); ++i) {
		s += format_double(data.y()[i]);
		for (Index j = 0; j < data.d(); ++j)
			s += "," + format_double(data.x()(j, i));
		s += '\n';
	}
	return s;
}

// --- vectors and matrices -------------------------------------------------

inline Json to_json(const Vector &v) {
	Json a = Json::array();
	for (Index i = 0; i < v.size(); ++i)
		a.push_back(v[i]);
	return a;
}

inline Json to_json(const Matrix &m) {
	Json a = Json::array();
	for (Index i = 0; i < m.rows(); ++i)
		a.push_back(to_json(Vector(m.row(i).transpose())));
	return a;
}

inline Vector vector_from_json(const Json &j, const char *what) {
	if (!j.is_array())
		throw InvalidArgument(std::string(what) + " must be a JSON array");
	Vector v(static_cast<Index>(j.size()));
	for (std::size_t i = 0; i < j.size(); ++i) {
		if (!j[i].is_number())
			throw InvalidArgument(std::string(what) + " must contain numbers");
		v[static_cast<Index>(i)] = j[i].get<double>();
	}
	return v;
}

inline Matrix matrix_from_json(const Json &j, const char *what) {
	if (!j.is_array() || j.empty())
		throw InvalidArgument(std::string(what) + " must be a nonempty array of rows");
	const Index rows = static_cast<Index>(j.size());
	const Index cols = static_cast<Index>(j[0].size());
	Matrix m(rows, cols);
	for (Index i = 0; i < rows; ++i) {
		const Vector r = vector_from_json(j[static_cast<std::size_t>(i)], what);
		if (r.size() != cols)
			throw InvalidArgument(std::string(what) + " rows have different lengths");
		m.row(i) = r.transpose();
	}
	return m;
}

inline Json to_json(const IndexSet &s) {
	Json a = Json::array();
	for (Index i : s)
		a.push_back(i);
	return a;
}

inline IndexSet index_set_from_json(const Json &j) {
	IndexSet s;
	for (const auto &v : j)
		s.push_back(v.get<Index>());
	std::sort(s.begin(), s.end());
	return s;
}

// --- priors ---------------------------------------------------------------

inline Json to_json(const WeightPrior &p) {
	return std::visit(
	    [](const auto &f) -> Json {
		    using T = std::decay_t<decltype(f)>;
		    if constexpr (std::is_same_v<T, GammaWeights>)
			    return {{"family", "gamma"}, {"shape", f.shape}, {"rate", f.rate}};
		    else if constexpr (std::is_same_v<T, LogNormalWeights>)
			    return {{"family", "lognormal"}, {"mu", f.mu}, {"sigma", f.sigma}};
		    else
			    return {{"family", "beta"}, {"a", f.a}, {"b", f.b}};
	    },
	    p.family());
}

inline WeightPrior weight_prior_from_json(const Json &j) {
	const std::string fam = j.value("family", "gamma");
	if (fam == "gamma")
		return WeightPrior::gamma(j.value("shape", 4.0), j.value("rate", 10.0));
	if (fam == "lognormal")
		return WeightPrior::lognormal(j.at("mu").get<double>(), j.at("sigma").get<double>());
	if (fam == "beta")
		return WeightPrior::beta(j.at("a").get<double>(), j.at("b").get<double>());
	throw InvalidArgument("unknown weight prior family '" + fam + "'");
}

inline Json to_json(const CoefficientPrior &p) {
	Json j;
	j["mean"] = to_json(p.mean);
	if (const double s = p.isotropic_scale(); s > 0.0)
		j["covariance_scale"] = s;
	else
		j["covariance"] = to_json(p.covariance);
	return j;
}

inline CoefficientPrior coefficient_prior_from_json(const Json &j) {
	try {
		const Vector mean = vector_from_json(j.at("mean"), "prior mean");
		if (j.contains("covariance_scale"))
			return CoefficientPrior::isotropic(mean, j.at("covariance_scale").get<double>());
		if (j.contains("covariance"))
			return CoefficientPrior(mean, matrix_from_json(j.at("covariance"), "prior covariance"));
	} catch (const Json::exception &e) {
		throw InvalidArgument(std::string("malformed prior JSON: ") + e.what());
	}
	throw InvalidArgument("prior JSON needs 'covariance_scale' or 'covariance'");
}

// --- fit results ----------------------------------------------------------

inline Json to_json(const FitReport &r) {
	Json j;
	j["w_hat"] = to_json(r.w_hat);
	j["support_corrupt"] = to_json(r.b_hat.support);
	j["iterations"] = r.iterations;
	j["converged"] = r.converged;
	if (r.cycled)
		j["cycled"] = true;
	if (r.k_below_truth)
		j["k_below_truth"] = true;
	Json trace = Json::array();
	for (const auto &t : r.trace) {
		Json e{{"delta", t.delta}};
		if (!std::isnan(t.err_w))
			e["err_w"] = t.err_w;
		if (!std::isnan(t.err_b))
			e["err_b"] = t.err_b;
		trace.push_back(std::move(e));
	}
	j["trace"] = std::move(trace);
	if (!r.u_trace.empty()) {
		Json u = Json::array();
		for (double v : r.u_trace)
			u.push_back(v);
		j["u_trace"] = std::move(u);
	}
	return j;
}

inline Json to_json(const VariationalPosterior &p) {
	return {{"w_mean", to_json(p.w_mean)}, {"w_cov", to_json(p.w_cov)}, {"weights", to_json(p.weight_expect)}};
}

inline std::string attack_key(AttackKind k) {
	switch (k) {
	case AttackKind::oaa: return "oaa";
	case AttackKind::aaa: return "adca";
	default: return "lpa";
	}
}

inline Json to_json(const CorruptionRecord &r) {
	Json j;
	j["attack_kind"] = attack_name(r.kind);
	j["support"] = to_json(r.b_true.support);
	j["b_true"] = to_json(gather(r.b_true.values, r.b_true.support));
	Json p{{"alpha", r.params.alpha}, {"seed", r.params.seed}};
	if (r.kind == AttackKind::oaa) {
		p["magnitude_hi"] = r.params.magnitude_hi;
		p["replace"] = r.params.replace;
	}
	if (r.kind == AttackKind::aaa) {
		p["delta"] = r.params.delta;
		p["converged"] = r.converged;
		p["iterations"] = r.iterations;
	}
	if (r.kind == AttackKind::lpa)
		p["exact_leverage"] = r.params.exact_leverage;
	j["params"] = std::move(p);
	if (r.w_adv)
		j["w_adv"] = to_json(*r.w_adv);
	return j;
}

inline std::string json_text(const Json &j) { return j.dump(2) + "\n"; }

inline Json read_json(const std::string &path) {
	std::ifstream in(path);
	if (!in)
		throw InvalidArgument("cannot open '" + path + "'");
	try {
		return Json::parse(in);
	} catch (const Json::exception &e) {
		throw InvalidArgument("'" + path + "' is not valid JSON: " + e.what());
	}
}

// --- traces and series ----------------------------------------------------

inline std::string trace_csv(const FitReport &r) {
	std::string s = "t,delta,err_w,err_b,objective,support_size\n";
	for (std::size_t t = 0; t < r.trace.size(); ++t) {
		const auto &e = r.trace[t];
		s += std::to_string(t + 1) + "," + format_double(e.delta) + "," + format_double(e.err_w) + "," +
		     format_double(e.err_b) + "," + format_double(e.objective) + "," + std::to_string(e.support.size()) + "\n";
	}
	return s;
}

inline std::string assumption1_csv(const Assumption1Trace &tr) {
	std::string s = "t,u1,u2,ratio\n";
	for (std::size_t i = 0; i < tr.t.size(); ++i)
		s += std::to_string(tr.t[i]) + "," + format_double(tr.u1[i]) + "," + format_double(tr.u2[i]) + "," +
		     format_double(tr.ratio[i]) + "\n";
	return s;
}

inline std::string series_csv(const std::vector<double> &t, const std::vector<double> &p) {
	std::string s = "t,p\n";
	for (std::size_t i = 0; i < t.size(); ++i)
		s += format_double(t[i]) + "," + format_double(p[i]) + "\n";
	return s;
}

inline std::string truth_csv(const SynthSsa &syn) {
	std::string s = "t,p_true,is_outlier\n";
	for (std::size_t i = 0; i < syn.p_true.size(); ++i)
		s += format_double(syn.series.t[i]) + "," + format_double(syn.p_true[i]) + "," +
		     (syn.is_outlier[i] ? "1" : "0") + "\n";
	return s;
}

inline PeriodicSeries read_series_csv(const std::string &path, double period, int n_periods) {
	const CsvTable tab = read_csv(path);
	const std::size_t ct = tab.column("t"), cp = tab.column("p");
	PeriodicSeries s;
	s.period = period;
	for (const auto &row : tab.rows) {
		s.t.push_back(row[ct]);
		s.p.push_back(row[cp]);
	}
	s.n_periods = n_periods > 0 ? n_periods : (s.t.empty() ? 0 : s.period_of(s.t.back()) + 1);
	s.validate();
	return s;
}

/// Keep-mask from a truth sidecar: false where is_outlier is set. Rows must align with `series`.
inline std::vector<bool> read_clean_mask(const std::string &path, const PeriodicSeries &series) {
	const CsvTable tab = read_csv(path);
	const std::size_t ct = tab.column("t"), co = tab.column("is_outlier");
	if (tab.rows.size() != series.size())
		throw InvalidArgument("'" + path + "' does not have one row per series sample");
	std::vector<bool> keep(series.size());
	for (std::size_t g = 0; g < keep.size(); ++g) {
		if (tab.rows[g][ct] != series.t[g])
			throw InvalidArgument("'" + path + "' timestamps do not match the series");
		keep[g] = tab.rows[g][co] == 0.0;
	}
	return keep;
}

} // namespace robreg
