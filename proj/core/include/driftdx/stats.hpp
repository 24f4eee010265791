#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace driftdx::stats {

double mean(const std::vector<double>& v);
double variance(const std::vector<double>& v);  // population (divides by n)

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// Two-sided p-value for Pearson correlation r on n samples (t-test, n-2 dof).
double pearson_corr_pvalue(double r, std::size_t n);

double pearson_corr(const std::vector<double>& x, const std::vector<double>& y);

// Standard normal CDF and quantile.
double norm_cdf(double z);
double norm_quantile(double p);

// Clopper-Pearson interval for k successes out of n at level 1-alpha.
std::pair<double, double> clopper_pearson(std::size_t k, std::size_t n, double alpha);

double quantile(std::vector<double> v, double q);  // linear interpolation
double median(std::vector<double> v);

}  // namespace driftdx::stats
