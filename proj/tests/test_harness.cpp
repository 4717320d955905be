#include "robreg/harness.hpp"

#include <gtest/gtest.h>

using namespace robreg;

namespace {

ExperimentConfig small_config() {
	ExperimentConfig c;
	c.n = 120;
	c.d = 4;
	c.alpha_grid = {0.1, 0.3};
	c.replications = 3;
	c.seed = 7;
	c.estimators = {{"ols", 0, WeightPrior::gamma(4.0, 10.0), ""},
	                {"crr", 0, WeightPrior::gamma(4.0, 10.0), ""},
	                {"trip", 0.05, WeightPrior::gamma(4.0, 10.0), ""},
	                {"brht", 0.01, WeightPrior::gamma(4.0, 10.0), "brht_g"}};
	return c;
}

} // namespace

TEST(Instance, ShapesAndDeterminism) {
	const Instance a = gen_instance(50, 6, 0.7, 0.3, 3, 2);
	EXPECT_EQ(a.data.n(), 50);
	EXPECT_EQ(a.data.d(), 6);
	EXPECT_NEAR(a.w_star.norm(), 1.0, 1e-14);
	EXPECT_LT((a.data.y() - a.data.x().transpose() * a.w_star - a.noise).norm(), 1e-12);
	const Instance b = gen_instance(50, 6, 0.7, 0.3, 3, 2);
	EXPECT_EQ(a.data.y(), b.data.y());
	EXPECT_EQ(a.w0, b.w0);
	EXPECT_NE(gen_instance(50, 6, 0.7, 0.3, 3, 3).data.y(), a.data.y());
	EXPECT_EQ(gen_instance(50, 6, 0.7, 0.0, 3, 2).w0, gen_instance(50, 6, 0.7, 0.0, 3, 2).w_star);
	EXPECT_TRUE(gen_instance(20, 2, 0.0, 0.0, 1).noise.isZero());
	EXPECT_THROW(gen_instance(0, 2, 1.0, 0.0, 1), InvalidArgument);
}

TEST(Instance, NoiseMoments) {
	const Instance a = gen_instance(20000, 1, 2.0, 0.0, 11);
	EXPECT_NEAR(a.noise.mean(), 0.0, 0.05);
	EXPECT_NEAR(std::sqrt(a.noise.squaredNorm() / 20000.0), 2.0, 0.05);
}

TEST(EstimatorK, RoundingAndCap) {
	EXPECT_EQ(estimator_k(0.3, 2000), 720);
	EXPECT_EQ(estimator_k(0.1, 25), 4); // round(2.5) = 3, then round(3.6)
	EXPECT_EQ(estimator_k(0.55, 100), 60);
	EXPECT_EQ(estimator_k(0.0, 100), 0);
}

TEST(PrecisionRecall, Conventions) {
	auto [p, r] = support_precision_recall({1, 2, 3, 4}, {2, 4, 6});
	EXPECT_DOUBLE_EQ(p, 0.5);
	EXPECT_DOUBLE_EQ(r, 2.0 / 3.0);
	std::tie(p, r) = support_precision_recall({}, {1});
	EXPECT_EQ(p, 1.0);
	EXPECT_EQ(r, 0.0);
	std::tie(p, r) = support_precision_recall({3}, {});
	EXPECT_EQ(p, 0.0);
	EXPECT_EQ(r, 1.0);
}

TEST(Sweep, DeterministicAcrossWorkerCounts) {
	ExperimentConfig c = small_config();
	const SweepResult one = run_sweep(c);
	c.workers = 3;
	const SweepResult three = run_sweep(c);
	EXPECT_EQ(results_csv(one), results_csv(three));
	EXPECT_EQ(summary_csv(one), summary_csv(three));
	ASSERT_EQ(one.rows.size(), 2u * 3u * 4u);
	EXPECT_EQ(one.rows[0].estimator, "ols");
	EXPECT_EQ(one.rows[3].estimator, "brht_g");
	EXPECT_EQ(one.rows[4].rep, 1);
	for (const auto &r : one.rows)
		EXPECT_EQ(r.status, "ok");
}

TEST(Sweep, AdcaAndLpaAttacksRun) {
	ExperimentConfig c = small_config();
	c.replications = 1;
	c.attack.kind = "adca";
	EXPECT_NO_THROW(run_sweep(c));
	c.attack.kind = "lpa";
	const SweepResult r = run_sweep(c);
	for (const auto &row : r.rows)
		EXPECT_TRUE(std::isfinite(row.error));
}

TEST(Sweep, FailingFitIsRecorded) {
	ExperimentConfig c = small_config();
	c.replications = 1;
	c.alpha_grid = {0.1};
	c.sigma = 1e-3;
	// rate 1e-3 cannot absorb the expected log-likelihood of a near-exact fit
	c.estimators = {{"brht", 0.01, WeightPrior::gamma(4.0, 1e-3), ""}, {"ols", 0, WeightPrior::gamma(4.0, 10.0), ""}};
	const SweepResult r = run_sweep(c);
	ASSERT_EQ(r.rows.size(), 2u);
	EXPECT_NE(r.rows[0].status, "ok");
	EXPECT_TRUE(std::isnan(r.rows[0].error));
	EXPECT_EQ(r.rows[1].status, "ok");
	const auto s = summarize(r);
	EXPECT_EQ(s[0].ok, 0);
	EXPECT_TRUE(std::isnan(s[0].mean));
}

TEST(Summary, StatisticsOracle) {
	SweepResult r;
	r.config = small_config();
	r.config.alpha_grid = {0.2};
	r.config.estimators = {{"ols", 0, WeightPrior::gamma(4.0, 10.0), ""}};
	for (double e : {4.0, 1.0, 3.0, 2.0}) {
		SweepRow row;
		row.alpha = 0.2;
		row.estimator = "ols";
		row.error = e;
		r.rows.push_back(row);
	}
	const auto s = summarize(r);
	ASSERT_EQ(s.size(), 1u);
	EXPECT_DOUBLE_EQ(s[0].mean, 2.5);
	EXPECT_DOUBLE_EQ(s[0].median, 2.5);
	EXPECT_DOUBLE_EQ(s[0].std, std::sqrt(5.0 / 3.0));
	EXPECT_EQ(s[0].ok, 4);
}

TEST(Config, JsonRoundTripAndValidation) {
	ExperimentConfig c = small_config();
	c.estimators[3].weight_prior = WeightPrior::lognormal(-1.0, 0.5);
	c.attack.kind = "lpa";
	c.attack.exact_leverage = true;
	const Json j = to_json(c);
	const ExperimentConfig back = experiment_config_from_json(j);
	EXPECT_EQ(to_json(back).dump(), j.dump());
	ExperimentConfig bad = c;
	bad.estimators[2].prior_precision_factor = 0.0;
	EXPECT_THROW(bad.validate(), InvalidArgument);
	bad = c;
	bad.attack.kind = "nope";
	EXPECT_THROW(bad.validate(), InvalidArgument);
	bad = c;
	bad.alpha_grid = {1.0};
	EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Trace, ConvergenceRows) {
	ExperimentConfig c = small_config();
	const AttackedInstance inst = make_attacked(c, 1, 0);
	const auto rows = convergence_trace(inst, c.estimators[3], 1.0, estimator_k(0.3, c.n));
	ASSERT_FALSE(rows.empty());
	EXPECT_EQ(rows.front().t, 1);
	EXPECT_FALSE(std::isnan(rows.front().u));
	EXPECT_TRUE(std::isnan(convergence_trace(inst, c.estimators[2], 1.0, 43).front().u));
	EXPECT_THROW(convergence_trace(inst, c.estimators[0], 1.0, 43), InvalidArgument);
	const std::string csv = convergence_csv(rows);
	EXPECT_EQ(csv.substr(0, 15), "t,err_w,err_b,u");
}
