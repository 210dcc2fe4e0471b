#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tailhedge/risk.hpp"
#include "tailhedge/rng.hpp"

using namespace tailhedge;

TEST_CASE("empirical_var order statistic", "[risk]") {
  const std::vector<double> pnl{-1.0, -2.0, -3.0, -4.0};  // losses 1..4
  CHECK(empirical_var(pnl, 0.75) == 3.0);
  CHECK(empirical_var(pnl, 1e-9) == 1.0);
  CHECK(empirical_var(std::vector<double>(10, -7.0), 0.3) == 7.0);
  CHECK(empirical_var(std::vector<double>(10, -7.0), 0.99) == 7.0);
  CHECK_THROWS_AS(empirical_var(pnl, 1.0), InvalidInput);
  CHECK_THROWS_AS(empirical_var({}, 0.5), InvalidInput);
}

TEST_CASE("empirical_cvar matches direct evaluation", "[risk]") {
  const std::vector<double> pnl{-1.0, -2.0, -3.0, -4.0};
  CHECK(empirical_cvar(pnl, 0.75) == 4.0);
  // alpha -> 0 limit: the mean loss
  CHECK_THAT(empirical_cvar(pnl, 1e-12), Catch::Matchers::WithinAbs(2.5, 1e-9));
  // dominance over VaR on random samples
  Rng rng(Rng::derive_key(21, 0));
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> sample(37);
    for (auto& x : sample) x = rng.normal();
    for (double alpha : {0.1, 0.5, 0.9, 0.975}) {
      CHECK(empirical_cvar(sample, alpha) >= empirical_var(sample, alpha));
    }
  }
}

TEST_CASE("var and cvar are monotone in the level", "[risk]") {
  Rng rng(Rng::derive_key(21, 1));
  std::vector<double> sample(101);
  for (auto& x : sample) x = rng.normal() * 3.0;
  double prev_var = -1e300, prev_cvar = -1e300;
  for (double alpha = 0.05; alpha < 1.0; alpha += 0.05) {
    const double v = empirical_var(sample, alpha);
    const double c = empirical_cvar(sample, alpha);
    CHECK(v >= prev_var);
    CHECK(c >= prev_cvar);
    prev_var = v;
    prev_cvar = c;
  }
}

TEST_CASE("empirical_cvar equals the Rockafellar-Uryasev grid minimum", "[risk]") {
  Rng rng(Rng::derive_key(21, 2));
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 5 + rng.uniform_below(45);
    std::vector<double> pnl(n);
    for (auto& x : pnl) x = rng.normal() * 2.0 + 0.3;
    std::vector<double> losses(n);
    for (std::size_t i = 0; i < n; ++i) losses[i] = -pnl[i];
    const double alpha = rng.uniform(0.5, 0.99);

    double lo = *std::min_element(losses.begin(), losses.end()) - 1.0;
    double hi = *std::max_element(losses.begin(), losses.end()) + 1.0;
    const int grid = 20000;
    double best = 1e300;
    for (int g = 0; g <= grid; ++g) {
      const double x = lo + (hi - lo) * g / grid;
      double hinge = 0.0;
      for (double l : losses) hinge += std::max(l - x, 0.0);
      best = std::min(best, x + hinge / ((1.0 - alpha) * static_cast<double>(n)));
    }
    const double resolution = (hi - lo) / grid;
    CHECK_THAT(empirical_cvar(pnl, alpha), Catch::Matchers::WithinAbs(best, resolution));
  }
}

TEST_CASE("median shortfall is VaR at the midpoint level", "[risk]") {
  Rng rng(Rng::derive_key(21, 3));
  std::vector<double> sample(400);
  for (auto& x : sample) x = rng.normal();
  CHECK(median_shortfall(sample, 0.975) == empirical_var(sample, 0.98750));
  CHECK(median_shortfall(sample, 0.95) == empirical_var(sample, 0.975));
  CHECK(median_shortfall(std::vector<double>(5, 2.0), 0.9) == -2.0);
}

TEST_CASE("bootstrap_ci behavior", "[risk]") {
  auto mean_stat = [](const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  };

  // degenerate sample gives a degenerate interval
  const auto degenerate = bootstrap_ci(std::vector<double>(50, 3.25), mean_stat, 0.95, 200, 1);
  CHECK(degenerate.lo == 3.25);
  CHECK(degenerate.hi == 3.25);

  // deterministic under seed
  Rng rng(Rng::derive_key(21, 4));
  std::vector<double> sample(4000);
  for (auto& x : sample) x = rng.normal() * 1.7 + 0.4;
  const auto a = bootstrap_ci(sample, mean_stat, 0.95, 500, 7);
  const auto b = bootstrap_ci(sample, mean_stat, 0.95, 500, 7);
  CHECK(a.lo == b.lo);
  CHECK(a.hi == b.hi);

  // brackets the point estimate
  double m = mean_stat(sample);
  CHECK(a.lo <= m);
  CHECK(a.hi >= m);

  // width agrees with the CLT for the mean of a large normal sample
  double ss = 0.0;
  for (double x : sample) ss += (x - m) * (x - m);
  const double clt_width = 2.0 * 1.96 * std::sqrt(ss / (sample.size() - 1.0) / sample.size());
  const auto ci = bootstrap_ci(sample, mean_stat, 0.95, 1000, 11);
  CHECK_THAT(ci.hi - ci.lo, Catch::Matchers::WithinRel(clt_width, 0.15));
}

TEST_CASE("paired t-test", "[risk]") {
  // hand-computed: d = {1,2,3} gives t = 3.4641, p from t(2) ~ 0.0371
  CHECK_THAT(paired_t_test({1.0, 2.0, 3.0}, {0.0, 0.0, 0.0}),
             Catch::Matchers::WithinAbs(0.0371, 2e-4));

  // dominant difference
  Rng rng(Rng::derive_key(21, 5));
  std::vector<double> base(5000), better(5000);
  for (std::size_t i = 0; i < base.size(); ++i) {
    base[i] = rng.normal();
    better[i] = base[i] + 0.5 + 0.01 * rng.normal();
  }
  CHECK(paired_t_test(better, base) < 1e-10);

  // exactly antisymmetric differences: t = 0, p = 1/2
  std::vector<double> x(2000), y(2000);
  for (std::size_t i = 0; i < x.size(); i += 2) {
    const double v = rng.normal();
    x[i] = rng.normal();
    x[i + 1] = rng.normal();
    y[i] = x[i] + v;
    y[i + 1] = x[i + 1] - v;
  }
  CHECK_THAT(paired_t_test(x, y), Catch::Matchers::WithinAbs(0.5, 1e-12));

  CHECK_THROWS_AS(paired_t_test({1.0}, {2.0}), InvalidInput);
  CHECK_THROWS_AS(paired_t_test({1.0, 2.0}, {1.0}), InvalidInput);
  CHECK_THROWS_AS(paired_t_test({1.0, 2.0}, {0.0, 1.0}), InvalidInput);  // zero variance
}

TEST_CASE("build_report assembles a comparison table", "[risk]") {
  Rng rng(Rng::derive_key(21, 6));
  std::vector<double> ours(3000), bench(3000);
  for (std::size_t i = 0; i < ours.size(); ++i) {
    bench[i] = rng.normal();
    ours[i] = 0.8 * bench[i] + 0.05;
  }
  const auto report =
      build_report({{"agent", ours}, {"baseline", bench}}, "agent", {0.95, 0.975}, 3);
  REQUIRE(report.strategies.size() == 2);
  const auto& agent = report.strategies[0];
  const auto& baseline = report.strategies[1];
  CHECK(std::isnan(agent.p_value));
  CHECK(baseline.p_value < 0.01);
  for (const auto& s : report.strategies) {
    REQUIRE(s.var.size() == 2);
    for (std::size_t li = 0; li < 2; ++li) {
      CHECK(s.cvar[li].value >= s.var[li].value);
      CHECK(s.var[li].ci.lo <= s.var[li].value);
      CHECK(s.var[li].ci.hi >= s.var[li].value);
      CHECK(s.cvar[li].ci.lo <= s.cvar[li].value);
      CHECK(s.cvar[li].ci.hi >= s.cvar[li].value);
      CHECK(s.ms[li].ci.lo <= s.ms[li].value);
      CHECK(s.ms[li].ci.hi >= s.ms[li].value);
    }
  }

  // identical strategies produce identical rows
  const auto twin = build_report({{"a", bench}, {"b", bench}}, "a", {0.95, 0.975}, 3);
  CHECK(twin.strategies[0].mean == twin.strategies[1].mean);
  CHECK(twin.strategies[0].var[1].value == twin.strategies[1].var[1].value);

  // single-strategy report carries no p-values
  const auto solo = build_report({{"only", bench}}, "only", {0.95, 0.975}, 3);
  CHECK(std::isnan(solo.strategies[0].p_value));

  const std::string csv = report.to_csv();
  CHECK(csv.find("0.9750-CVaR") != std::string::npos);
  CHECK(csv.find("agent") != std::string::npos);
  const std::string text = report.to_text();
  CHECK(text.find("Mean") != std::string::npos);
}
