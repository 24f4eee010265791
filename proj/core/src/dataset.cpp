#include "driftdx/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "driftdx/stats.hpp"

namespace driftdx {

Matrix Matrix::select_columns(const std::vector<int>& cols) const {
    Matrix out(n_rows, cols.size());
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
            out.at(r, c) = at(r, static_cast<std::size_t>(cols[c]));
    return out;
}

void Dataset::validate() const {
    std::size_t nn = n();
    if (d() < 1) throw InputError("dataset has no feature columns");
    if (outcome.size() != nn || predictions.size() != nn)
        throw InputError("dataset vector lengths disagree with feature rows");
    if (!loss.empty() && loss.size() != nn)
        throw InputError("loss vector length disagrees with feature rows");
    if (column_names.size() != d())
        throw InputError("column name count disagrees with feature columns");
    for (std::size_t i = 0; i < column_names.size(); ++i)
        for (std::size_t j = i + 1; j < column_names.size(); ++j)
            if (column_names[i] == column_names[j])
                throw InputError("duplicate column name: " + column_names[i]);
    for (int y : outcome)
        if (y != 0 && y != 1) throw InputError("outcome values must be 0 or 1");
    for (double l : loss)
        if (!std::isfinite(l) || l < 0) throw InputError("losses must be finite and nonnegative");
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& idx) const {
    Dataset out;
    out.domain = domain;
    out.column_names = column_names;
    out.features = Matrix(idx.size(), d());
    out.outcome.reserve(idx.size());
    out.predictions.reserve(idx.size());
    if (!loss.empty()) out.loss.reserve(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        std::size_t r = idx[k];
        for (std::size_t c = 0; c < d(); ++c) out.features.at(k, c) = features.at(r, c);
        out.outcome.push_back(outcome[r]);
        out.predictions.push_back(predictions[r]);
        if (!loss.empty()) out.loss.push_back(loss[r]);
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
    const char* b = cell.data();
    const char* e = b + cell.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
    double v = 0;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || p != e)
        throw InputError("non-numeric cell at row " + std::to_string(row) + ", column '" + col +
                         "': '" + cell + "'");
    return v;
}

}  // namespace

Dataset load_dataset(const std::string& path, const CsvSchema& schema, Domain domain) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open file: " + path);
    std::string header;
    if (!std::getline(in, header)) throw InputError("empty file: " + path);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    std::vector<std::string> cols = split_csv_line(header);
    for (auto& c : cols) {
        while (!c.empty() && (c.back() == ' ' || c.back() == '\r')) c.pop_back();
        while (!c.empty() && c.front() == ' ') c.erase(c.begin());
    }

    auto find_col = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == name) return static_cast<int>(i);
        return -1;
    };

    int outcome_idx = find_col(schema.outcome_column);
    if (outcome_idx < 0) throw InputError("missing outcome column '" + schema.outcome_column + "'");
    int pred_idx = find_col(schema.prediction_column);
    if (pred_idx < 0)
        throw InputError("missing prediction column '" + schema.prediction_column + "'");

    std::vector<int> feat_idx;
    std::vector<std::string> feat_names;
    if (schema.feature_columns.empty()) {
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (static_cast<int>(i) == outcome_idx || static_cast<int>(i) == pred_idx) continue;
            feat_idx.push_back(static_cast<int>(i));
            feat_names.push_back(cols[i]);
        }
    } else {
        for (const auto& name : schema.feature_columns) {
            int idx = find_col(name);
            if (idx < 0) throw InputError("missing feature column '" + name + "'");
            feat_idx.push_back(idx);
            feat_names.push_back(name);
        }
    }
    if (feat_idx.empty()) throw InputError("schema selects no feature columns");

    std::vector<double> flat;
    std::vector<int> outcome;
    std::vector<double> predictions;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != cols.size())
            throw InputError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                             " cells, expected " + std::to_string(cols.size()));
        double y = parse_cell(cells[outcome_idx], row, schema.outcome_column);
        if (y != 0.0 && y != 1.0)
            throw InputError("outcome at row " + std::to_string(row) + " is not 0/1");
        outcome.push_back(static_cast<int>(y));
        predictions.push_back(parse_cell(cells[pred_idx], row, schema.prediction_column));
        for (std::size_t k = 0; k < feat_idx.size(); ++k)
            flat.push_back(parse_cell(cells[feat_idx[k]], row, feat_names[k]));
    }
    if (row == 0) throw InputError("no data rows in file: " + path);

    Dataset ds;
    ds.domain = domain;
    ds.column_names = feat_names;
    ds.features.n_rows = row;
    ds.features.n_cols = feat_idx.size();
    ds.features.values = std::move(flat);
    ds.outcome = std::move(outcome);
    ds.predictions = std::move(predictions);
    ds.loss.assign(row, 0.0);
    ds.validate();
    return ds;
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw RunError("cannot write file: " + path);
    for (const auto& c : ds.column_names) out << c << ',';
    out << "y,pred\n";
    char buf[64];
    for (std::size_t r = 0; r < ds.n(); ++r) {
        for (std::size_t c = 0; c < ds.d(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.features.at(r, c));
            out << buf << ',';
        }
        out << ds.outcome[r] << ',';
        std::snprintf(buf, sizeof buf, "%.17g", ds.predictions[r]);
        out << buf << '\n';
    }
}

int predicted_class(double prediction) { return prediction >= 0.5 ? 1 : 0; }

Dataset compute_loss(const Dataset& ds, LossKind kind) {
    if (kind != LossKind::zero_one) throw InputError("unsupported loss kind");
    Dataset out = ds;
    out.loss.resize(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        double p = ds.predictions[i];
        if (!(p >= 0.0 && p <= 1.0))
            throw InputError("prediction outside [0,1] at row " + std::to_string(i + 1));
        out.loss[i] = (predicted_class(p) != ds.outcome[i]) ? 1.0 : 0.0;
    }
    return out;
}

SplitPair split(const Dataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw InputError("split fraction must be in (0,1)");
    if (ds.n() < 2) throw InputError("need at least 2 rows to split");

    std::vector<std::size_t> class_rows[2];
    for (std::size_t i = 0; i < ds.n(); ++i) class_rows[ds.outcome[i]].push_back(i);

    // stratified: total train size hits round(f*n) exactly, allocated to the
    // classes by largest remainder
    std::size_t n = ds.n();
    std::size_t want_total = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    want_total = std::clamp<std::size_t>(want_total, 1, n - 1);
    double exact[2] = {fraction * static_cast<double>(class_rows[0].size()),
                       fraction * static_cast<double>(class_rows[1].size())};
    std::size_t take[2] = {static_cast<std::size_t>(exact[0]), static_cast<std::size_t>(exact[1])};
    while (take[0] + take[1] < want_total) {
        double frac0 = exact[0] - static_cast<double>(take[0]);
        double frac1 = exact[1] - static_cast<double>(take[1]);
        int grow = (frac1 > frac0 && take[1] < class_rows[1].size()) ? 1 : 0;
        if (take[grow] >= class_rows[grow].size()) grow = 1 - grow;
        ++take[grow];
    }
    while (take[0] + take[1] > want_total) {
        int shrink = (take[1] > 0) ? 1 : 0;
        if (exact[0] - static_cast<double>(take[0]) < exact[1] - static_cast<double>(take[1]) &&
            take[0] > 0)
            shrink = 0;
        --take[shrink];
    }

    Rng rng(substream(seed, 0x5913));
    std::vector<std::size_t> train_idx, eval_idx;
    for (int cls = 0; cls < 2; ++cls) {
        auto rows = class_rows[cls];
        std::shuffle(rows.begin(), rows.end(), rng);
        for (std::size_t k = 0; k < rows.size(); ++k)
            (k < take[cls] ? train_idx : eval_idx).push_back(rows[k]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(eval_idx.begin(), eval_idx.end());

    SplitPair out;
    out.split_fraction = fraction;
    out.seed = seed;
    out.train = ds.select_rows(train_idx);
    out.eval = ds.select_rows(eval_idx);
    return out;
}

FeatureSubset filter_loss_correlated(const Dataset& train_source, const Dataset& train_target,
                                     double alpha_corr) {
    if (train_source.loss.empty() || train_target.loss.empty())
        throw InputError("losses must be computed before correlation filtering");
    if (train_source.d() != train_target.d())
        throw InputError("source/target feature dimension mismatch");

    std::size_t n = train_source.n() + train_target.n();
    std::vector<double> loss;
    loss.reserve(n);
    loss.insert(loss.end(), train_source.loss.begin(), train_source.loss.end());
    loss.insert(loss.end(), train_target.loss.begin(), train_target.loss.end());

    FeatureSubset out;
    out.name = "loss_correlated";
    std::vector<double> col(n);
    for (std::size_t c = 0; c < train_source.d(); ++c) {
        for (std::size_t r = 0; r < train_source.n(); ++r) col[r] = train_source.features.at(r, c);
        for (std::size_t r = 0; r < train_target.n(); ++r)
            col[train_source.n() + r] = train_target.features.at(r, c);
        bool constant = std::all_of(col.begin(), col.end(), [&](double v) { return v == col[0]; });
        if (constant) {
            std::cerr << "warning: feature '" << train_source.column_names[c]
                      << "' is constant on training data, excluded from covariate tests\n";
            continue;
        }
        // 0-1 loss concentrates near the decision boundary, so its dependence
        // on a feature is often non-monotone (a bump, not a trend); test the
        // centered square alongside the linear term, Bonferroni over the pair
        double mean_c = stats::mean(col);
        std::vector<double> sq(n);
        for (std::size_t r = 0; r < n; ++r) sq[r] = (col[r] - mean_c) * (col[r] - mean_c);
        double p1 = stats::pearson_corr_pvalue(stats::pearson_corr(col, loss), n);
        double p2 = stats::pearson_corr_pvalue(stats::pearson_corr(sq, loss), n);
        double p = std::min(1.0, 2.0 * std::min(p1, p2));
        if (p <= alpha_corr) out.column_indices.push_back(static_cast<int>(c));
    }
    return out;
}

}  // namespace driftdx
