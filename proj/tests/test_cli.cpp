#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "driftdx/simlab.hpp"

using namespace driftdx;
namespace fs = std::filesystem;

namespace {

const char* cli = DRIFTDX_CLI_PATH;

int run(const std::string& args) {
    std::string cmd = std::string(cli) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path workdir() {
    fs::path p = fs::temp_directory_path() / "driftdx_cli_test";
    fs::create_directories(p);
    return p;
}

fs::path small_csv(const char* name, std::uint64_t seed) {
    SimSetupSpec spec = SimSetupSpec::preset(SimSetupSpec::Id::setup_2);
    spec.n_per_domain = 500;
    Model study = train_study_model(spec, 1000, 1);
    auto [src, tgt] = generate_setup(spec, seed);
    apply_study_model(src, study);
    fs::path p = workdir() / name;
    write_dataset_csv(src, p.string());
    return p;
}

}  // namespace

TEST_CASE("help exits zero and names every subcommand") {
    CHECK(run("--help") == 0);
    CHECK(run("diagnose --help") == 0);
    CHECK(run("simulate --help") == 0);
    CHECK(run("report --help") == 0);
}

TEST_CASE("missing required flags exit nonzero") {
    CHECK(run("diagnose") != 0);
    CHECK(run("report") != 0);
}

TEST_CASE("unknown setup and bad reps are input errors") {
    CHECK(run("simulate --setup nonsense --reps 10") == 2);
    CHECK(run("simulate --setup setup_2 --reps 0") == 2);
}

TEST_CASE("missing outcome column exits 2") {
    fs::path csv = small_csv("src.csv", 2);
    std::string args = "diagnose --source " + csv.string() + " --target " + csv.string() +
                       " --outcome not_a_column --pred pred --out " +
                       (workdir() / "out_badcol").string();
    CHECK(run(args) == 2);
}

TEST_CASE("identical source and target produce a non-rejecting report") {
    fs::path csv = small_csv("same.csv", 3);
    fs::path out = workdir() / "out_same";
    std::string args = "diagnose --source " + csv.string() + " --target " + csv.string() +
                       " --outcome y --pred pred --bootstrap-reps 150 --seed 7 --out " +
                       out.string();
    REQUIRE(run(args) == 0);
    REQUIRE(fs::exists(out / "report.json"));
    REQUIRE(fs::exists(out / "hierarchy.svg"));
    REQUIRE(fs::exists(out / "summary.txt"));

    nlohmann::json rep;
    {
        std::ifstream in(out / "report.json");
        in >> rep;
    }
    CHECK(rep["aggregate"]["covariate"]["rejected"] == false);
    CHECK(rep["aggregate"]["outcome"]["rejected"] == false);
    CHECK(rep["detailed"]["covariate"]["tests"].empty());
    CHECK(rep["detailed"]["outcome"]["tests"].empty());

    // config echo re-parses into an equal RunConfig
    RunConfig echoed = RunConfig::from_json(rep["config"]);
    CHECK(echoed.bootstrap_reps == 150);
    CHECK(echoed.seed == 7);
}

TEST_CASE("report rendering is byte deterministic and all gray without rejections") {
    fs::path csv = small_csv("det.csv", 4);
    fs::path out = workdir() / "out_det";
    std::string args = "diagnose --source " + csv.string() + " --target " + csv.string() +
                       " --outcome y --pred pred --bootstrap-reps 120 --seed 9 --out " +
                       out.string();
    REQUIRE(run(args) == 0);

    fs::path svg1 = workdir() / "r1.svg", svg2 = workdir() / "r2.svg";
    REQUIRE(run("report --in " + (out / "report.json").string() + " --svg " + svg1.string()) ==
            0);
    REQUIRE(run("report --in " + (out / "report.json").string() + " --svg " + svg2.string()) ==
            0);
    std::string a = slurp(svg1), b = slurp(svg2);
    CHECK(a == b);
    CHECK(a.find("#d62728") == std::string::npos);  // nothing red
    CHECK(a.find("#aaaaaa") != std::string::npos);
    // the freshly produced diagram matches the diagnose-time one
    CHECK(a == slurp(out / "hierarchy.svg"));
}

TEST_CASE("malformed report JSON exits 2") {
    fs::path bad = workdir() / "bad.json";
    {
        std::ofstream o(bad);
        o << "{ not json";
    }
    CHECK(run("report --in " + bad.string() + " --svg " + (workdir() / "x.svg").string()) == 2);
    CHECK(run("report --in " + (workdir() / "missing.json").string() + " --svg " +
              (workdir() / "y.svg").string()) == 2);
}
