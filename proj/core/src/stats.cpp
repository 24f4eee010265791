#include "driftdx/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "driftdx/common.hpp"

namespace driftdx::stats {

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    Kahan k;
    for (double x : v) k.add(x);
    return k.value() / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double m = mean(v);
    Kahan k;
    for (double x : v) k.add((x - m) * (x - m));
    return k.value() / static_cast<double>(v.size());
}

namespace {

// Lentz continued fraction for the incomplete beta, as in Numerical Recipes.
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kFpMin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                   a * std::log(x) + b * std::log1p(-x);
    double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return bt * betacf(a, b, x) / a;
    }
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double pearson_corr_pvalue(double r, std::size_t n) {
    if (n < 3) return 1.0;
    double df = static_cast<double>(n - 2);
    r = std::clamp(r, -1.0, 1.0);
    double denom = 1.0 - r * r;
    if (denom <= 0.0) return 0.0;
    double t = r * std::sqrt(df / denom);
    // two-sided: P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    double x = df / (df + t * t);
    return incomplete_beta(df / 2.0, 0.5, x);
}

double pearson_corr(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.empty())
        throw RunError("pearson_corr: size mismatch");
    double mx = mean(x), my = mean(y);
    Kahan sxy, sxx, syy;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy.add((x[i] - mx) * (y[i] - my));
        sxx.add((x[i] - mx) * (x[i] - mx));
        syy.add((y[i] - my) * (y[i] - my));
    }
    double d = std::sqrt(sxx.value() * syy.value());
    if (d == 0.0) return 0.0;
    return sxy.value() / d;
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double norm_quantile(double p) {
    if (p <= 0.0 || p >= 1.0)
        throw RunError("norm_quantile: p out of range");
    // bisection on the CDF; plenty fast for how often this is called
    double lo = -10.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (norm_cdf(mid) < p) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

// Quantile of Beta(a, b) by bisection on the regularized incomplete beta.
double beta_quantile(double a, double b, double p) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (incomplete_beta(a, b, mid) < p) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

std::pair<double, double> clopper_pearson(std::size_t k, std::size_t n, double alpha) {
    if (n == 0) return {0.0, 1.0};
    double kk = static_cast<double>(k), nn = static_cast<double>(n);
    double lo = (k == 0) ? 0.0 : beta_quantile(kk, nn - kk + 1.0, alpha / 2.0);
    double hi = (k == n) ? 1.0 : beta_quantile(kk + 1.0, nn - kk, 1.0 - alpha / 2.0);
    return {lo, hi};
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw RunError("quantile of empty vector");
    q = std::clamp(q, 0.0, 1.0);
    std::sort(v.begin(), v.end());
    double pos = q * static_cast<double>(v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

}  // namespace driftdx::stats
