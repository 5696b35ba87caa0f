#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

// End-to-end tests of the installed binary: every case shells out to the
// executable named by SELREC_CLI_PATH and inspects the files it writes.

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir =
        fs::temp_directory_path() / ("selrec-cli-" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd =
        std::string("\"") + SELREC_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

void write_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << body;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream body;
    body << in.rdbuf();
    return body.str();
}

std::vector<std::string> lines_of(const std::string& body) {
    std::vector<std::string> lines;
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

void write_spec(const fs::path& path, const json& covariates, const std::string& outcome) {
    json spec;
    spec["covariates"] = covariates;
    spec["outcome"] = outcome;
    write_file(path, spec.dump(2) + "\n");
}

std::string q(const fs::path& path) { return "\"" + path.string() + "\""; }

}  // namespace

TEST_CASE("weights command writes normalized binary weights") {
    const fs::path dir = scratch_dir("weights");
    write_file(dir / "pool.csv", "x\n1\n1\n1\n-1\n");
    write_spec(dir / "spec.json", json::array({{{"name", "x"}, {"kind", "binary"}}}), "none");

    const int rc = run_cli("weights --pool " + q(dir / "pool.csv") + " --spec " +
                           q(dir / "spec.json") + " --protocol marginal --out " +
                           q(dir / "out"));
    CHECK(rc == 0);

    const auto lines = lines_of(read_file(dir / "out/weights.csv"));
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "row,unnormalized,normalized");
    // p(+1) = 3/4: plus rows get 1-p = 0.25, the minus row gets 0.75;
    // the normalizer is 1.5.
    CHECK(lines[1] == "0,0.25,0.16666666666666666");
    CHECK(lines[2] == "1,0.25,0.16666666666666666");
    CHECK(lines[3] == "2,0.25,0.16666666666666666");
    CHECK(lines[4] == "3,0.75,0.5");

    const std::string manifest = read_file(dir / "out/manifest.json");
    CHECK(manifest.find("\"command\": \"weights\"") != std::string::npos);
    CHECK(manifest.find("\"created\"") != std::string::npos);

    // Re-running from the manifest reproduces the CSV byte for byte.
    const int rc2 =
        run_cli("weights --config " + q(dir / "out/manifest.json") + " --out " + q(dir / "re"));
    CHECK(rc2 == 0);
    CHECK(read_file(dir / "re/weights.csv") == read_file(dir / "out/weights.csv"));

    // Protocols without per-candidate weights are rejected.
    CHECK(run_cli("weights --pool " + q(dir / "pool.csv") + " --spec " + q(dir / "spec.json") +
                  " --protocol random --out " + q(dir / "bad")) == 1);
    // No continuous covariate: the continuous-only protocol cannot apply.
    CHECK(run_cli("weights --pool " + q(dir / "pool.csv") + " --spec " + q(dir / "spec.json") +
                  " --protocol continuous --out " + q(dir / "bad2")) == 1);
}

TEST_CASE("select command balances, reproduces, and validates") {
    const fs::path dir = scratch_dir("select");
    write_file(dir / "pool.csv", "x\n1\n1\n1\n-1\n");
    write_spec(dir / "spec.json", json::array({{{"name", "x"}, {"kind", "binary"}}}), "none");
    const std::string common = " --pool " + q(dir / "pool.csv") + " --spec " +
                               q(dir / "spec.json");

    // Joint balancing with one binary covariate and n=2 takes one row per sign.
    CHECK(run_cli("select" + common + " --protocol joint --n 2 --seed 7 --out " +
                  q(dir / "joint")) == 0);
    const auto joint = lines_of(read_file(dir / "joint/cohort.csv"));
    REQUIRE(joint.size() == 3);
    CHECK(joint[0] == "row,x");
    const bool plus_first = joint[1].substr(joint[1].find(',') + 1) == "1";
    const std::string other = joint[2].substr(joint[2].find(',') + 1);
    CHECK(plus_first ? other == "-1" : other == "1");

    // Same seed, same bytes; manifest re-run, same bytes.
    CHECK(run_cli("select" + common + " --protocol joint --n 2 --seed 7 --out " +
                  q(dir / "again")) == 0);
    CHECK(read_file(dir / "again/cohort.csv") == read_file(dir / "joint/cohort.csv"));
    CHECK(run_cli("select --config " + q(dir / "joint/manifest.json") + " --out " +
                  q(dir / "re")) == 0);
    CHECK(read_file(dir / "re/cohort.csv") == read_file(dir / "joint/cohort.csv"));

    // n equal to the pool size returns everything, in row order.
    CHECK(run_cli("select" + common + " --protocol marginal --n 4 --seed 3 --out " +
                  q(dir / "all")) == 0);
    const auto all = lines_of(read_file(dir / "all/cohort.csv"));
    REQUIRE(all.size() == 5);
    CHECK(all[1].rfind("0,", 0) == 0);
    CHECK(all[4].rfind("3,", 0) == 0);

    // Infeasible n, mismatched manifest command, and a missing n.
    CHECK(run_cli("select" + common + " --protocol marginal --n 9 --seed 3 --out " +
                  q(dir / "bad")) == 1);
    write_file(dir / "wrong.json", "{\"command\": \"weights\", \"out\": \"x\"}\n");
    CHECK(run_cli("select --config " + q(dir / "wrong.json") + " --n 2 --out " +
                  q(dir / "bad2")) == 1);
    CHECK(run_cli("select" + common + " --out " + q(dir / "bad3")) == 2);
}

TEST_CASE("simulate command runs a small custom experiment reproducibly") {
    const fs::path dir = scratch_dir("simulate");
    json cfg;
    cfg["generator"] = {{"pool_size", 500},
                        {"covariates", {{"scheme", "two-binary"}, {"cells", {0.15, 0.6, 0.15, 0.1}}}},
                        {"outcome",
                         {{"model", "logistic"}, {"w0", -1.0 / 6.0}, {"w", {1.0 / 3.0, 1.0 / 3.0}}}}};
    cfg["protocols"] = {"random", "marginal"};
    cfg["n_grid"] = {60, 120};
    cfg["replications"] = 8;
    cfg["alpha"] = 0.05;
    cfg["seed"] = 5;
    cfg["threads"] = 1;
    cfg["out"] = (dir / "run1").string();
    write_file(dir / "config.json", cfg.dump(2) + "\n");

    CHECK(run_cli("simulate --config " + q(dir / "config.json")) == 0);
    const std::string results = read_file(dir / "run1/results.csv");
    const auto lines = lines_of(results);
    REQUIRE(lines.size() > 1);
    CHECK(lines[0] == "protocol,n,metric,value,mc_se,replications");
    CHECK(results.find("random,60,power_all,") != std::string::npos);
    CHECK(results.find("marginal,120,mse,") != std::string::npos);
    CHECK(results.find("marginal,120,nonconverged_rate,") != std::string::npos);
    CHECK(fs::exists(dir / "run1/power.svg"));
    CHECK(fs::exists(dir / "run1/mse.svg"));
    CHECK(!fs::exists(dir / "run1/type1.svg"));  // both slopes are nonzero

    CHECK(run_cli("simulate --config " + q(dir / "run1/manifest.json") + " --out " +
                  q(dir / "run2")) == 0);
    CHECK(read_file(dir / "run2/results.csv") == results);
    CHECK(read_file(dir / "run2/power.svg") == read_file(dir / "run1/power.svg"));

    // Custom preset without a generator block, and an unknown preset.
    CHECK(run_cli("simulate --seed 3 --out " + q(dir / "bad")) == 1);
    CHECK(run_cli("simulate --preset bogus --out " + q(dir / "bad2")) == 1);
}

TEST_CASE("fit command reports both model families") {
    const fs::path dir = scratch_dir("fit");
    write_file(dir / "logit.csv", "x,y\n-1.2,-1\n-0.5,-1\n-0.1,1\n0.4,-1\n0.9,1\n1.5,1\n");
    write_spec(dir / "lspec.json", json::array({{{"name", "x"}, {"kind", "continuous"}}}),
               "binary");
    CHECK(run_cli("fit --pool " + q(dir / "logit.csv") + " --spec " + q(dir / "lspec.json") +
                  " --out " + q(dir / "lout")) == 0);
    const auto logit = lines_of(read_file(dir / "lout/model.csv"));
    REQUIRE(logit.size() == 3);
    CHECK(logit[0] == "term,beta,lower_ci,upper_ci,p_value");
    CHECK(logit[1].rfind("(intercept),", 0) == 0);
    CHECK(logit[2].rfind("x,", 0) == 0);
    {
        std::istringstream row(logit[2].substr(2));
        std::string beta, lo, hi;
        std::getline(row, beta, ',');
        std::getline(row, lo, ',');
        std::getline(row, hi, ',');
        CHECK(std::stod(beta) == doctest::Approx(2.39418783544383).epsilon(1e-6));
        CHECK(std::stod(lo) < std::stod(beta));
        CHECK(std::stod(hi) > std::stod(beta));
    }

    write_file(dir / "surv.csv", "x,time,event\n0.5,1,1\n-0.2,2,1\n0.3,3,0\n-0.1,4,1\n0.4,5,0\n");
    write_spec(dir / "sspec.json", json::array({{{"name", "x"}, {"kind", "continuous"}}}),
               "survival");
    CHECK(run_cli("fit --pool " + q(dir / "surv.csv") + " --spec " + q(dir / "sspec.json") +
                  " --out " + q(dir / "sout")) == 0);
    const auto cox = lines_of(read_file(dir / "sout/model.csv"));
    REQUIRE(cox.size() == 2);  // no intercept term
    CHECK(cox[1].rfind("x,", 0) == 0);
    {
        std::istringstream row(cox[1].substr(2));
        std::string beta;
        std::getline(row, beta, ',');
        CHECK(std::stod(beta) == doctest::Approx(-1.13214715031976).epsilon(1e-6));
    }

    // Manifest re-run reproduces the fit output too.
    CHECK(run_cli("fit --config " + q(dir / "sout/manifest.json") + " --out " +
                  q(dir / "sre")) == 0);
    CHECK(read_file(dir / "sre/model.csv") == read_file(dir / "sout/model.csv"));

    CHECK(run_cli("fit --pool " + q(dir / "logit.csv") + " --spec " + q(dir / "lspec.json") +
                  " --level 1.5 --out " + q(dir / "bad")) == 1);
    write_spec(dir / "nspec.json", json::array({{{"name", "x"}, {"kind", "continuous"}}}),
               "none");
    CHECK(run_cli("fit --pool " + q(dir / "logit.csv") + " --spec " + q(dir / "nspec.json") +
                  " --out " + q(dir / "bad2")) == 1);
    CHECK(run_cli("fit --pool " + q(dir / "missing.csv") + " --spec " + q(dir / "lspec.json") +
                  " --out " + q(dir / "bad3")) == 1);
}

TEST_CASE("bare invocations fail with a usage error") {
    CHECK(run_cli("") != 0);
    CHECK(run_cli("frobnicate") != 0);
}
