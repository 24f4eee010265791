// driftdx command line: diagnose CSV data, run simulation studies, render
// saved reports. Exit codes: 0 ok, 2 input error, 3 runtime error.
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "driftdx/report.hpp"
#include "driftdx/simlab.hpp"

namespace fs = std::filesystem;
using namespace driftdx;

namespace {

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path);
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path + ": invalid JSON: " + e.what());
    }
}

int column_index(const std::vector<std::string>& names, const std::string& name) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    throw InputError("unknown feature column '" + name + "'");
}

// Subsets file: [{"name": "X1", "columns": ["x1"]}, ...]; columns may be
// names or zero-based indices.
std::vector<FeatureSubset> load_subsets(const std::string& path,
                                        const std::vector<std::string>& column_names) {
    nlohmann::json j = load_json_file(path);
    if (!j.is_array()) throw InputError(path + ": subsets file must be a JSON array");
    std::vector<FeatureSubset> out;
    for (const auto& e : j) {
        FeatureSubset s;
        s.name = e.at("name").get<std::string>();
        for (const auto& c : e.at("columns")) {
            if (c.is_string())
                s.column_indices.push_back(column_index(column_names, c.get<std::string>()));
            else
                s.column_indices.push_back(c.get<int>());
        }
        std::sort(s.column_indices.begin(), s.column_indices.end());
        out.push_back(std::move(s));
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw RunError("cannot write " + path);
    out << content;
    if (!out) throw RunError("write failed for " + path);
}

struct ConfigFlags {
    std::string config_path;
    double tau = -1, epsilon = -1, alpha = -1, split_fraction = -1;
    int reps_boot = -1;
    std::int64_t seed = -1;
    bool force_detailed = false;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--tau", tau, "tolerance tau >= 0");
        cmd->add_option("--epsilon", epsilon, "minimum subgroup prevalence");
        cmd->add_option("--alpha", alpha, "significance level");
        cmd->add_option("--split-fraction", split_fraction, "training fraction of each domain");
        cmd->add_option("--bootstrap-reps", reps_boot, "multiplier bootstrap replicates");
        cmd->add_option("--seed", seed, "RNG seed");
        cmd->add_flag("--force-detailed", force_detailed,
                      "run detailed tests even when the aggregate does not reject");
    }

    // flags win over the config file, the file over defaults
    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_path.empty()) cfg = RunConfig::from_json(load_json_file(config_path));
        if (tau >= 0) cfg.tau = tau;
        if (epsilon >= 0) cfg.epsilon = epsilon;
        if (alpha >= 0) cfg.alpha = alpha;
        if (split_fraction >= 0) cfg.split_fraction = split_fraction;
        if (reps_boot >= 0) cfg.bootstrap_reps = reps_boot;
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (force_detailed) cfg.force_detailed = true;
        cfg.validate();
        return cfg;
    }
};

void print_flags(const HierarchicalReport& rep) {
    auto show = [](const TestResult& t) {
        std::cout << t.hypothesis << ": p = " << t.p_value << (t.rejected ? " [rejected]" : "")
                  << (t.degenerate ? " [degenerate]" : "") << "\n";
    };
    show(rep.agg_covariate);
    show(rep.agg_outcome);
    auto branch = [&](const DetailedResults& d, const char* label) {
        for (const auto& [name, t] : d.by_subset) show(t);
        std::cout << label << " = {";
        for (std::size_t i = 0; i < d.flags.size(); ++i)
            std::cout << (i ? ", " : "") << d.flags[i];
        std::cout << "}\n";
    };
    if (!rep.detail_covariate.by_subset.empty()) branch(rep.detail_covariate, "S_hat^X");
    if (!rep.detail_outcome.by_subset.empty()) branch(rep.detail_outcome, "S_hat^Y|X");
}

int cmd_diagnose(const std::string& source_path, const std::string& target_path,
                 const std::string& outcome_col, const std::string& pred_col,
                 const std::string& subsets_path, const ConfigFlags& flags,
                 const std::string& out_dir) {
    RunConfig cfg = flags.resolve();
    CsvSchema schema;
    schema.outcome_column = outcome_col;
    schema.prediction_column = pred_col;
    Dataset source = load_dataset(source_path, schema, Domain::source);
    Dataset target = load_dataset(target_path, schema, Domain::target);
    if (source.column_names != target.column_names)
        throw InputError("source and target feature columns disagree");

    std::vector<FeatureSubset> subsets = cfg.subsets;
    if (!subsets_path.empty()) subsets = load_subsets(subsets_path, source.column_names);

    fs::create_directories(out_dir);
    HierarchicalReport rep = run_hierarchy(source, target, subsets, cfg);
    nlohmann::json rj = rep.to_json();
    write_report_json(rj, (fs::path(out_dir) / "report.json").string());
    write_text_file((fs::path(out_dir) / "hierarchy.svg").string(), render_hierarchy_svg(rj));
    write_text_file((fs::path(out_dir) / "summary.txt").string(), render_text_summary(rj));
    print_flags(rep);
    return 0;
}

int cmd_simulate(const std::string& setup, int reps, const ConfigFlags& flags,
                 const std::string& out_dir) {
    if (reps < 10) throw InputError("--reps must be >= 10");
    SimSetupSpec spec = SimSetupSpec::preset(setup);
    RunConfig cfg = flags.resolve();
    if (flags.split_fraction < 0 && flags.config_path.empty())
        cfg.split_fraction = spec.default_split_fraction;
    if (cfg.subsets.empty()) {
        for (std::size_t c = 0; c < spec.d(); ++c)
            cfg.subsets.push_back({"X" + std::to_string(c + 1), {static_cast<int>(c)}});
    }
    StudyRun run = run_power_study(spec, reps, cfg, cfg.seed);
    fs::create_directories(out_dir);
    write_text_file((fs::path(out_dir) / "study.json").string(), run.to_json().dump(2) + "\n");
    write_text_file((fs::path(out_dir) / "p_values.csv").string(), run.to_csv());
    for (const auto& [h, r] : run.rates)
        std::cout << h << ": rate " << r.rate << " (" << r.ci_low << ", " << r.ci_high << "), "
                  << r.rejections << "/" << r.n << "\n";
    if (run.failures) std::cout << run.failures << " rep(s) failed\n";
    return 0;
}

int cmd_report(const std::string& in_path, const std::string& svg_path) {
    nlohmann::json rj = read_report_json(in_path);
    try {
        write_text_file(svg_path, render_hierarchy_svg(rj));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(in_path + ": report JSON missing fields: " + e.what());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"driftdx: drift diagnosis for tabular prediction models"};
    app.require_subcommand(1);

    std::string source_path, target_path, outcome_col = "y", pred_col = "pred";
    std::string subsets_path, out_dir = ".";
    ConfigFlags diag_flags;
    CLI::App* diag = app.add_subcommand("diagnose", "run the test hierarchy on two CSV files");
    diag->add_option("--source", source_path, "source-domain CSV")->required();
    diag->add_option("--target", target_path, "target-domain CSV")->required();
    diag->add_option("--outcome", outcome_col, "outcome column name");
    diag->add_option("--pred", pred_col, "prediction column name");
    diag->add_option("--subsets", subsets_path, "JSON file of named feature subsets");
    diag->add_option("--out", out_dir, "output directory");
    diag_flags.add_to(diag);

    std::string setup = "setup_2", sim_out = ".";
    int reps = 25;
    ConfigFlags sim_flags;
    CLI::App* sim = app.add_subcommand("simulate", "run a synthetic power study");
    sim->add_option("--setup", setup,
                    "setup_1a | setup_1b | setup_2 | setup_3 | null_variant");
    sim->add_option("--reps", reps, "number of repetitions (>= 10)");
    sim->add_option("--out", sim_out, "output directory");
    sim_flags.add_to(sim);

    std::string report_in, svg_out = "hierarchy.svg";
    CLI::App* rpt = app.add_subcommand("report", "render the SVG diagram from a saved report");
    rpt->add_option("--in", report_in, "report.json path")->required();
    rpt->add_option("--svg", svg_out, "output SVG path");

    try {
        app.parse(argc, argv);
        if (diag->parsed())
            return cmd_diagnose(source_path, target_path, outcome_col, pred_col, subsets_path,
                                diag_flags, out_dir);
        if (sim->parsed()) return cmd_simulate(setup, reps, sim_flags, sim_out);
        if (rpt->parsed()) return cmd_report(report_in, svg_out);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
