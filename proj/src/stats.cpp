#include "fedleak/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fedleak::stats {

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_cf(double x, double a, double b) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-15;
  constexpr double kTiny = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  require(a > 0.0 && b > 0.0, ErrorKind::invalid_input, "beta parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(x, a, b) / a;
  return 1.0 - front * beta_cf(1.0 - x, b, a) / b;
}

double t_cdf(double x, double v) {
  require(v > 0.0, ErrorKind::invalid_input, "degrees of freedom must be positive");
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  double tail = regularized_incomplete_beta(v / (x * x + v), v / 2.0, 0.5) / 2.0;
  return x >= 0.0 ? 1.0 - tail : tail;
}

TTestVariant variant_from_string(const std::string& s) {
  if (s == "paired") return TTestVariant::paired;
  if (s == "welch") return TTestVariant::welch;
  fail(ErrorKind::configuration, "unknown t-test variant: " + s);
}

const char* variant_name(TTestVariant v) {
  return v == TTestVariant::paired ? "paired" : "welch";
}

double mean(const std::vector<double>& v) {
  require(!v.empty(), ErrorKind::invalid_input, "mean of empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
  require(v.size() >= 2, ErrorKind::invalid_input, "variance needs at least two samples");
  double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

double median(std::vector<double> v) {
  require(!v.empty(), ErrorKind::invalid_input, "median of empty sample");
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

double two_sided_p(double t, double df) { return 2.0 * (1.0 - t_cdf(std::fabs(t), df)); }

}  // namespace

TTestResult paired_t_test(const std::vector<double>& x, const std::vector<double>& y,
                          double significance) {
  require(x.size() == y.size(), ErrorKind::invalid_input, "paired samples differ in length");
  require(x.size() >= 2, ErrorKind::invalid_input, "paired test needs at least two pairs");
  require(significance > 0.0 && significance < 1.0, ErrorKind::invalid_input,
          "significance must be in (0, 1)");
  std::vector<double> d(x.size());
  for (size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  double md = mean(d);
  double sd = std::sqrt(sample_variance(d));
  TTestResult r;
  r.df = static_cast<double>(d.size() - 1);
  if (sd == 0.0) {
    if (md == 0.0) {
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.statistic = md > 0 ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
  } else {
    r.statistic = md / (sd / std::sqrt(static_cast<double>(d.size())));
    r.p_value = two_sided_p(r.statistic, r.df);
  }
  r.reject = r.p_value < significance;
  return r;
}

TTestResult welch_t_test(const std::vector<double>& x, const std::vector<double>& y,
                         double significance) {
  require(x.size() >= 2 && y.size() >= 2, ErrorKind::invalid_input,
          "welch test needs at least two samples per group");
  require(significance > 0.0 && significance < 1.0, ErrorKind::invalid_input,
          "significance must be in (0, 1)");
  double mx = mean(x), my = mean(y);
  double vx = sample_variance(x) / static_cast<double>(x.size());
  double vy = sample_variance(y) / static_cast<double>(y.size());
  TTestResult r;
  if (vx + vy == 0.0) {
    r.df = static_cast<double>(x.size() + y.size() - 2);
    if (mx == my) {
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.statistic = mx > my ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
  } else {
    r.statistic = (mx - my) / std::sqrt(vx + vy);
    r.df = (vx + vy) * (vx + vy) /
           (vx * vx / static_cast<double>(x.size() - 1) + vy * vy / static_cast<double>(y.size() - 1));
    r.p_value = two_sided_p(r.statistic, r.df);
  }
  r.reject = r.p_value < significance;
  return r;
}

TTestResult t_test(const std::vector<double>& x, const std::vector<double>& y,
                   TTestVariant variant, double significance) {
  return variant == TTestVariant::paired ? paired_t_test(x, y, significance)
                                         : welch_t_test(x, y, significance);
}

}  // namespace fedleak::stats
