#pragma once

#include <string>
#include <vector>

#include "fedleak/common.hpp"

namespace fedleak::stats {

double log_beta(double a, double b);
// I_x(a, b) via the modified Lentz continued fraction.
double regularized_incomplete_beta(double x, double a, double b);
// CDF of Student's t with v degrees of freedom.
double t_cdf(double x, double v);

enum class TTestVariant { paired, welch };

TTestVariant variant_from_string(const std::string& s);
const char* variant_name(TTestVariant v);

struct TTestResult {
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  bool reject = false;  // two-sided p < significance
};

// Paired two-sided t-test on equal-length samples. All-zero differences give
// (t=0, p=1); zero spread with nonzero mean rejects with p=0.
TTestResult paired_t_test(const std::vector<double>& x, const std::vector<double>& y,
                          double significance);

// Welch's unequal-variance two-sample test with Welch-Satterthwaite df.
TTestResult welch_t_test(const std::vector<double>& x, const std::vector<double>& y,
                         double significance);

TTestResult t_test(const std::vector<double>& x, const std::vector<double>& y,
                   TTestVariant variant, double significance);

double mean(const std::vector<double>& v);
double sample_variance(const std::vector<double>& v);
double median(std::vector<double> v);

}  // namespace fedleak::stats
