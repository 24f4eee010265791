#include "driftdx/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "driftdx/common.hpp"

namespace driftdx {

namespace {

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    Kahan k;
    for (double x : v) k.add(x);
    return k.value() / static_cast<double>(v.size());
}

double mean_product(const std::vector<double>& a, const std::vector<double>& b) {
    Kahan k;
    for (std::size_t i = 0; i < a.size(); ++i) k.add(a[i] * b[i]);
    return a.empty() ? 0.0 : k.value() / static_cast<double>(a.size());
}

void center(std::vector<double>& psi) {
    if (psi.empty()) return;
    double m = mean_of(psi);
    for (double& v : psi) v -= m;
}

MceeResult degenerate_result(DetectorKind kind, std::size_t n0, std::size_t n1,
                             const std::string& note) {
    MceeResult r;
    r.kind = kind;
    r.degenerate = true;
    r.note = note;
    r.n_source = n0;
    r.n_target = n1;
    r.influence.assign(n0 + n1, 0.0);
    return r;
}

// Delta-method influence for a single ratio N/D given pooled per-row
// numerator and denominator contributions (already weighted so their pooled
// means equal N and D).
std::vector<double> ratio_influence(const std::vector<double>& num_terms,
                                    const std::vector<double>& den_terms, double N, double D,
                                    double theta) {
    std::vector<double> psi(num_terms.size());
    for (std::size_t i = 0; i < num_terms.size(); ++i)
        psi[i] = ((num_terms[i] - N) - theta * (den_terms[i] - D)) / D;
    return psi;
}

}  // namespace

double vstatistic(const PairKernel& kernel, std::size_t n) {
    if (n == 0) throw RunError("vstatistic: empty input");
    Kahan total;
    for (std::size_t i = 0; i < n; ++i) {
        Kahan row;
        for (std::size_t j = 0; j < n; ++j) row.add(kernel(i, j));
        total.add(row.value());
    }
    double nn = static_cast<double>(n);
    return total.value() / (nn * nn);
}

double vstatistic_subsampled(const PairKernel& kernel, std::size_t n, std::size_t max_pairs,
                             std::uint64_t seed) {
    if (n == 0) throw RunError("vstatistic: empty input");
    if (n * n <= max_pairs) return vstatistic(kernel, n);
    Rng rng(substream(seed, 0x75a7));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    Kahan k;
    for (std::size_t t = 0; t < max_pairs; ++t) k.add(kernel(pick(rng), pick(rng)));
    return k.value() / static_cast<double>(max_pairs);
}

// ---- aggregate outcome -----------------------------------------------------

double plugin_mcee(const AggOutcomeInputs& in, double tau) {
    std::size_t n1 = in.h1.size();
    Kahan num, den;
    for (std::size_t i = 0; i < n1; ++i) {
        num.add((in.loss1[i] - in.z0_1[i] - tau) * in.h1[i]);
        den.add(in.h1[i]);
    }
    if (den.value() <= 0) return 0.0;
    return num.value() / den.value();
}

MceeResult mcee_agg_outcome(const AggOutcomeInputs& in, double tau) {
    std::size_t n0 = in.h0.size(), n1 = in.h1.size();
    std::size_t n = n0 + n1;
    double D = mean_of(in.h1);
    if (n1 == 0 || D <= 0)
        return degenerate_result(DetectorKind::agg_outcome, n0, n1, "zero target prevalence");

    double w0 = n0 ? static_cast<double>(n) / static_cast<double>(n0) : 0.0;
    double w1 = static_cast<double>(n) / static_cast<double>(n1);

    std::vector<double> num_terms(n, 0.0), den_terms(n, 0.0);
    Kahan a1, a0;
    for (std::size_t i = 0; i < n0; ++i) {
        double t = in.pi0[i] * in.h0[i] * (in.loss0[i] - in.z0_0[i]);
        a0.add(t);
        num_terms[i] = -w0 * t;
    }
    for (std::size_t i = 0; i < n1; ++i) {
        double t = (in.loss1[i] - in.z0_1[i] - tau) * in.h1[i];
        a1.add(t);
        num_terms[n0 + i] = w1 * t;
        den_terms[n0 + i] = w1 * in.h1[i];
    }
    double A1 = a1.value() / static_cast<double>(n1);
    double A0 = n0 ? a0.value() / static_cast<double>(n0) : 0.0;

    MceeResult r;
    r.kind = DetectorKind::agg_outcome;
    r.n_source = n0;
    r.n_target = n1;
    r.numerator = A1 - A0;
    r.denominator = D;
    r.estimate = r.numerator / r.denominator;
    r.plugin_estimate = A1 / D;
    r.influence = ratio_influence(num_terms, den_terms, r.numerator, D, r.estimate);
    center(r.influence);
    return r;
}

// ---- aggregate covariate ---------------------------------------------------

double plugin_mcee(const AggCovariateInputs& in, double tau) {
    double d1 = mean_of(in.h1), d0 = mean_of(in.h0);
    if (d1 <= 0 || d0 <= 0) return 0.0;
    return mean_product(in.z0_1, in.h1) / d1 - mean_product(in.loss0, in.h0) / d0 - tau;
}

MceeResult mcee_agg_covariate(const AggCovariateInputs& in, double tau) {
    std::size_t n0 = in.h0.size(), n1 = in.h1.size();
    std::size_t n = n0 + n1;
    double D1 = mean_of(in.h1);
    double D2 = mean_of(in.h0);
    if (n0 == 0 || n1 == 0 || D1 <= 0 || D2 <= 0)
        return degenerate_result(DetectorKind::agg_covariate, n0, n1, "zero prevalence");

    double w0 = static_cast<double>(n) / static_cast<double>(n0);
    double w1 = static_cast<double>(n) / static_cast<double>(n1);

    // theta1 = debiased E1[Z0 | A]
    std::vector<double> a(n, 0.0), d1(n, 0.0), b(n, 0.0), d2(n, 0.0);
    Kahan n1sum_t, n1sum_s, n2sum;
    for (std::size_t i = 0; i < n0; ++i) {
        double corr = in.pi0[i] * in.h0[i] * (in.loss0[i] - in.z0_0[i]);
        n1sum_s.add(corr);
        a[i] = w0 * corr;
        double lh = in.loss0[i] * in.h0[i];
        n2sum.add(lh);
        b[i] = w0 * lh;
        d2[i] = w0 * in.h0[i];
    }
    for (std::size_t i = 0; i < n1; ++i) {
        double zh = in.z0_1[i] * in.h1[i];
        n1sum_t.add(zh);
        a[n0 + i] = w1 * zh;
        d1[n0 + i] = w1 * in.h1[i];
    }
    double N1 = n1sum_t.value() / static_cast<double>(n1) + n1sum_s.value() / static_cast<double>(n0);
    double N2 = n2sum.value() / static_cast<double>(n0);
    double theta1 = N1 / D1;
    double theta2 = N2 / D2;

    MceeResult r;
    r.kind = DetectorKind::agg_covariate;
    r.n_source = n0;
    r.n_target = n1;
    r.estimate = theta1 - theta2 - tau;
    r.denominator = D1;
    r.numerator = r.estimate * D1;
    r.plugin_estimate = plugin_mcee(in, tau);

    std::vector<double> psi1 = ratio_influence(a, d1, N1, D1, theta1);
    std::vector<double> psi2 = ratio_influence(b, d2, N2, D2, theta2);
    r.influence.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.influence[i] = psi1[i] - psi2[i];
    center(r.influence);
    return r;
}

// ---- detailed covariate ----------------------------------------------------

double plugin_mcee(const DetailCovariateInputs& in, double tau) {
    double d1 = mean_of(in.h1);
    Kahan wnum, wden;
    for (std::size_t i = 0; i < in.h0.size(); ++i) {
        wnum.add(in.pis0[i] * in.loss0[i] * in.h0[i]);
        wden.add(in.pis0[i] * in.h0[i]);
    }
    if (d1 <= 0 || wden.value() <= 0) return 0.0;
    return mean_product(in.z0_1, in.h1) / d1 - wnum.value() / wden.value() - tau;
}

MceeResult mcee_detail_covariate(const DetailCovariateInputs& in, double tau) {
    std::size_t n0 = in.h0.size(), n1 = in.h1.size();
    std::size_t n = n0 + n1;
    double D1 = mean_of(in.h1);
    if (n0 == 0 || n1 == 0 || D1 <= 0)
        return degenerate_result(DetectorKind::detail_covariate, n0, n1, "zero prevalence");

    double w0 = static_cast<double>(n) / static_cast<double>(n0);
    double w1 = static_cast<double>(n) / static_cast<double>(n1);

    std::vector<double> a(n, 0.0), d1(n, 0.0), b(n, 0.0), e(n, 0.0);
    Kahan n1_t, n1_s, n2_t, n2_s, d2_t, d2_s;
    for (std::size_t i = 0; i < n0; ++i) {
        double corr = in.pi0[i] * in.h0[i] * (in.loss0[i] - in.z0_0[i]);
        n1_s.add(corr);
        a[i] = w0 * corr;
        double bn = in.pis0[i] * (in.loss0[i] * in.h0[i] - in.mg0[i]);
        n2_s.add(bn);
        b[i] = w0 * bn;
        double bd = in.pis0[i] * (in.h0[i] - in.mh0[i]);
        d2_s.add(bd);
        e[i] = w0 * bd;
    }
    for (std::size_t i = 0; i < n1; ++i) {
        double zh = in.z0_1[i] * in.h1[i];
        n1_t.add(zh);
        a[n0 + i] = w1 * zh;
        d1[n0 + i] = w1 * in.h1[i];
        n2_t.add(in.mg1[i]);
        b[n0 + i] = w1 * in.mg1[i];
        d2_t.add(in.mh1[i]);
        e[n0 + i] = w1 * in.mh1[i];
    }
    double N1 = n1_t.value() / static_cast<double>(n1) + n1_s.value() / static_cast<double>(n0);
    double N2 = n2_t.value() / static_cast<double>(n1) + n2_s.value() / static_cast<double>(n0);
    double D2 = d2_t.value() / static_cast<double>(n1) + d2_s.value() / static_cast<double>(n0);
    if (D2 <= 0)
        return degenerate_result(DetectorKind::detail_covariate, n0, n1,
                                 "degenerate shifted-domain prevalence estimate");
    double theta1 = N1 / D1;
    double theta2 = N2 / D2;

    MceeResult r;
    r.kind = DetectorKind::detail_covariate;
    r.n_source = n0;
    r.n_target = n1;
    r.estimate = theta1 - theta2 - tau;
    r.denominator = D1;
    r.numerator = r.estimate * D1;
    r.plugin_estimate = plugin_mcee(in, tau);

    std::vector<double> psi1 = ratio_influence(a, d1, N1, D1, theta1);
    std::vector<double> psi2 = ratio_influence(b, e, N2, D2, theta2);
    r.influence.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.influence[i] = psi1[i] - psi2[i];
    center(r.influence);
    return r;
}

// ---- detailed outcome ------------------------------------------------------

double plugin_mcee(const DetailOutcomeInputs& in, double tau) {
    std::size_t n1 = in.h.size();
    Kahan num, den;
    for (std::size_t i = 0; i < n1; ++i) {
        num.add((in.loss[i] - in.zs[i] - tau) * in.h[i]);
        den.add(in.h[i]);
    }
    if (den.value() <= 0) return 0.0;
    return num.value() / den.value();
}

MceeResult mcee_detail_outcome(const DetailOutcomeInputs& in, double tau) {
    if (!in.use_pairs) {
        // empty-subset convention: Zs plays the role of Z0, the pairwise
        // ratio is identically 1, and the source-side one-step term applies
        AggOutcomeInputs agg;
        agg.h1 = in.h;
        agg.loss1 = in.loss;
        agg.z0_1 = in.zs;
        agg.h0 = in.h0;
        agg.loss0 = in.loss0;
        agg.z0_0 = in.z0_0;
        agg.pi0 = in.pi0;
        MceeResult r = mcee_agg_outcome(agg, tau);
        r.kind = DetectorKind::detail_outcome;
        return r;
    }

    std::size_t n1 = in.h.size();
    double D = mean_of(in.h);
    if (n1 == 0 || D <= 0)
        return degenerate_result(DetectorKind::detail_outcome, 0, n1, "zero target prevalence");
    if (in.bin.size() != n1 || !in.pair_kernel)
        throw RunError("mcee_detail_outcome: missing pair machinery");

    std::map<int, std::vector<std::size_t>> by_bin;
    for (std::size_t i = 0; i < n1; ++i) by_bin[in.bin[i]].push_back(i);

    // within-bin V-statistic of the correction kernel plus its Hajek
    // projection: psi_corr_i = rowmean_i + colmean_i - binmean_{b(i)} - V
    std::vector<double> rowmean(n1, 0.0), colmean(n1, 0.0), binmean(n1, 0.0);
    Kahan vtotal;
    for (const auto& [bin, rows] : by_bin) {
        double nb = static_cast<double>(rows.size());
        std::vector<Kahan> col(rows.size());
        Kahan binsum;
        for (std::size_t ii = 0; ii < rows.size(); ++ii) {
            Kahan row;
            for (std::size_t jj = 0; jj < rows.size(); ++jj) {
                double c = in.pair_kernel(rows[ii], rows[jj]);
                row.add(c);
                col[jj].add(c);
            }
            rowmean[rows[ii]] = row.value() / nb;
            binsum.add(row.value());
        }
        double bmean = binsum.value() / (nb * nb);
        for (std::size_t jj = 0; jj < rows.size(); ++jj) {
            colmean[rows[jj]] = col[jj].value() / nb;
            binmean[rows[jj]] = bmean;
        }
        vtotal.add(nb * bmean);
    }
    double V = vtotal.value() / static_cast<double>(n1);

    Kahan base_sum;
    std::vector<double> base(n1);
    for (std::size_t i = 0; i < n1; ++i) {
        base[i] = (in.loss[i] - in.zs[i] - tau) * in.h[i];
        base_sum.add(base[i]);
    }
    double base_mean = base_sum.value() / static_cast<double>(n1);

    MceeResult r;
    r.kind = DetectorKind::detail_outcome;
    r.n_source = 0;
    r.n_target = n1;
    r.numerator = base_mean - V;
    r.denominator = D;
    r.estimate = r.numerator / D;
    r.plugin_estimate = base_mean / D;

    std::vector<double> num_terms(n1), den_terms(n1);
    for (std::size_t i = 0; i < n1; ++i) {
        num_terms[i] = base[i] - (rowmean[i] + colmean[i] - binmean[i]);
        den_terms[i] = in.h[i];
    }
    r.influence = ratio_influence(num_terms, den_terms, r.numerator, D, r.estimate);
    center(r.influence);
    return r;
}

}  // namespace driftdx
