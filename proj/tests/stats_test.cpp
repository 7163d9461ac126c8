#include <cmath>

#include "doctest.h"
#include "fedleak/stats.hpp"

using namespace fedleak;
using namespace fedleak::stats;

namespace {

// Oracle: 0.5 + Simpson quadrature of the t-density over [0, x]. Anchoring
// at the median sidesteps the heavy left tail at low degrees of freedom.
double t_cdf_quadrature(double x, double v) {
  auto pdf = [v](double t) {
    double c = std::exp(std::lgamma((v + 1) / 2) - std::lgamma(v / 2)) / std::sqrt(v * M_PI);
    return c * std::pow(1 + t * t / v, -(v + 1) / 2);
  };
  int n = 200000;  // even
  double h = x / n;
  double sum = pdf(0.0) + pdf(x);
  for (int i = 1; i < n; ++i) sum += pdf(i * h) * (i % 2 ? 4.0 : 2.0);
  return 0.5 + sum * h / 3.0;
}

// Oracle: quadrature of the beta density on [0, x].
double ibeta_quadrature(double x, double a, double b) {
  auto pdf = [a, b](double t) {
    return std::exp((a - 1) * std::log(t) + (b - 1) * std::log1p(-t) - log_beta(a, b));
  };
  int n = 400000;
  double eps = 1e-12;  // integrand may be singular at the endpoints
  double lo = eps, hi = x - eps;
  double h = (hi - lo) / n;
  double sum = pdf(lo) + pdf(hi);
  for (int i = 1; i < n; ++i) sum += pdf(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

}  // namespace

TEST_CASE("t_cdf matches quadrature oracle") {
  for (auto [x, v] : {std::pair{1.0, 5.0}, {-2.5, 10.0}, {0.0, 3.0}, {2.0, 1.0}, {-0.7, 29.0}})
    CHECK(t_cdf(x, v) == doctest::Approx(t_cdf_quadrature(x, v)).epsilon(1e-7));
}

TEST_CASE("t_cdf matches pinned reference values") {
  CHECK(t_cdf(1.0, 5) == doctest::Approx(0.8183912661754387).epsilon(1e-12));
  CHECK(t_cdf(-2.5, 10) == doctest::Approx(0.015723422118304388).epsilon(1e-12));
  CHECK(t_cdf(0.3, 1) == doctest::Approx(0.5927735790777423).epsilon(1e-12));
  CHECK(t_cdf(4.2, 29) == doctest::Approx(0.9998840765818049).epsilon(1e-12));
  CHECK(t_cdf(0.0, 7) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("regularized incomplete beta matches quadrature and references") {
  CHECK(regularized_incomplete_beta(0.3, 2, 5) ==
        doctest::Approx(0.5798250000000003).epsilon(1e-12));
  CHECK(regularized_incomplete_beta(0.77, 0.5, 9.5) ==
        doctest::Approx(0.9999998246000754).epsilon(1e-10));
  CHECK(regularized_incomplete_beta(0.3, 2, 5) ==
        doctest::Approx(ibeta_quadrature(0.3, 2, 5)).epsilon(1e-8));
  CHECK(regularized_incomplete_beta(0.0, 2, 3) == 0.0);
  CHECK(regularized_incomplete_beta(1.0, 2, 3) == 1.0);
}

TEST_CASE("paired t-test matches reference") {
  auto r = paired_t_test({1.0, 2.0, 3.0}, {0.0, 0.0, 0.0}, 0.05);
  CHECK(r.statistic == doctest::Approx(3.464101615137755).epsilon(1e-12));
  CHECK(r.df == doctest::Approx(2.0));
  CHECK(r.p_value == doctest::Approx(0.07417990022744853).epsilon(1e-10));
  CHECK_FALSE(r.reject);
  CHECK(paired_t_test({1, 2, 3}, {0, 0, 0}, 0.08).reject);
}

TEST_CASE("welch t-test matches reference") {
  std::vector<double> a{1.1, 2.3, 0.7, 1.9, 1.4}, b{2.8, 3.1, 2.2, 3.6};
  auto r = welch_t_test(a, b, 0.05);
  CHECK(r.statistic == doctest::Approx(-3.546345977722108).epsilon(1e-12));
  CHECK(r.df == doctest::Approx(6.7893700394460765).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.009875031539050972).epsilon(1e-10));
  CHECK(r.reject);
}

TEST_CASE("degenerate t-tests") {
  std::vector<double> same{1.5, 2.5, 3.5};
  auto eq = paired_t_test(same, same, 0.05);
  CHECK(eq.statistic == 0.0);
  CHECK(eq.p_value == 1.0);
  CHECK_FALSE(eq.reject);

  auto shifted = paired_t_test({1, 2, 3}, {0, 1, 2}, 0.05);  // constant nonzero diff
  CHECK(shifted.p_value == 0.0);
  CHECK(shifted.reject);

  auto wsame = welch_t_test({2, 2, 2}, {2, 2, 2}, 0.05);
  CHECK(wsame.p_value == 1.0);
  CHECK_FALSE(wsame.reject);
}

TEST_CASE("t_test dispatcher and validation") {
  std::vector<double> x{1, 2, 3}, y{4, 5, 6};
  CHECK(t_test(x, y, TTestVariant::paired, 0.05).df == doctest::Approx(2.0));
  CHECK(t_test(x, y, TTestVariant::welch, 0.05).df > 2.0);
  CHECK(variant_from_string("paired") == TTestVariant::paired);
  CHECK(variant_from_string("welch") == TTestVariant::welch);
  CHECK_THROWS_AS(variant_from_string("student"), Error);
  CHECK(std::string(variant_name(TTestVariant::welch)) == "welch");
  CHECK_THROWS_AS(paired_t_test({1.0}, {2.0}, 0.05), Error);       // n < 2
  CHECK_THROWS_AS(paired_t_test({1, 2}, {1, 2, 3}, 0.05), Error);  // unequal length
}

TEST_CASE("mean, variance, median") {
  CHECK(mean({1, 2, 3, 4}) == doctest::Approx(2.5));
  CHECK(sample_variance({2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(32.0 / 7.0));
  CHECK(median({3, 1, 2}) == doctest::Approx(2.0));
  CHECK(median({4, 1, 2, 3}) == doctest::Approx(2.5));
}
