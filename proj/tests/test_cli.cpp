#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

using testutil::TempDir;
using testutil::read_text;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

RunResult run_cli(const TempDir& tmp, const std::string& args) {
    const std::string out_file = tmp.file("stdout.txt");
    const std::string err_file = tmp.file("stderr.txt");
    const std::string cmd = std::string(SOHPIE_CLI_PATH) + " " + args + " > " + out_file +
                            " 2> " + err_file;
    const int status = std::system(cmd.c_str());
    RunResult res;
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    res.out = read_text(out_file);
    res.err = read_text(err_file);
    return res;
}

std::size_t data_rows(const std::string& table_text) {
    std::istringstream in(table_text);
    std::string line;
    std::size_t rows = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        ++rows;
    }
    return rows;
}

std::string first_header(const std::string& table_text) {
    std::istringstream in(table_text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') return line;
    return {};
}

} // namespace

TEST_CASE("simulate writes a dataset with truth and manifest") {
    TempDir tmp;
    const std::string out = tmp.file("ds");
    const RunResult res = run_cli(
        tmp, "simulate --p 20 --n 50 --delta1 0.05 --delta2 0.2 --scenario multivariable "
             "--seed 1 --out " + out);
    REQUIRE(res.exit_code == 0);
    for (const char* name :
         {"otu_group1.tsv", "otu_group2.tsv", "metadata.csv", "truth.json", "manifest.json"})
        CHECK(std::filesystem::exists(out + "/" + name));
    CHECK(read_text(out + "/truth.json").find("\"eta\"") != std::string::npos);
    CHECK(read_text(out + "/manifest.json").find("\"command\": \"simulate\"") !=
          std::string::npos);
}

TEST_CASE("simulate is byte-identical across reruns of one seed") {
    TempDir tmp;
    const std::string a = tmp.file("a");
    const std::string b = tmp.file("b");
    const std::string args = "simulate --p 10 --n 24 --delta1 0.2 --seed 33 --out ";
    REQUIRE(run_cli(tmp, args + a).exit_code == 0);
    REQUIRE(run_cli(tmp, args + b).exit_code == 0);
    for (const char* name : {"otu_group1.tsv", "otu_group2.tsv", "metadata.csv", "truth.json"})
        CHECK(read_text(a + "/" + name) == read_text(b + "/" + name));
}

TEST_CASE("simulate accepts a delta that spikes most taxa") {
    TempDir tmp;
    const RunResult res =
        run_cli(tmp, "simulate --p 5 --n 20 --delta1 0.9 --seed 2 --out " + tmp.file("ds"));
    CHECK(res.exit_code == 0);
    CHECK(res.out.find("spiked 4+0") != std::string::npos);
}

TEST_CASE("analyze produces one result row per taxon, covariates included") {
    TempDir tmp;
    const std::string out = tmp.file("an");
    const RunResult res = run_cli(
        tmp, std::string("analyze ") + testutil::fixture("amgut_mini.tsv") + " --metadata " +
                 testutil::fixture("amgut_meta.csv") +
                 " --group group --covariates age,sex --seed 4 --out " + out);
    REQUIRE(res.exit_code == 0);
    const std::string results = read_text(out + "/results.tsv");
    CHECK(data_rows(results) == 12);
    CHECK(first_header(results).find("age") != std::string::npos);
    for (const char* name :
         {"pseudovalues.tsv", "assoc_group1.tsv", "assoc_group2.tsv", "manifest.json"})
        CHECK(std::filesystem::exists(out + "/" + name));
    const std::string manifest = read_text(out + "/manifest.json");
    CHECK(manifest.find("fnv1a:") != std::string::npos);
    CHECK(manifest.find("amgut_mini.tsv") != std::string::npos);
}

TEST_CASE("omitting covariates yields the group-only model") {
    TempDir tmp;
    const std::string out = tmp.file("an");
    const RunResult res = run_cli(
        tmp, std::string("analyze ") + testutil::fixture("amgut_mini.tsv") + " --metadata " +
                 testutil::fixture("amgut_meta.csv") + " --group group --seed 4 --out " + out);
    REQUIRE(res.exit_code == 0);
    const std::string header = first_header(read_text(out + "/results.tsv"));
    CHECK(header.find("age") == std::string::npos);
    CHECK(header.find("sex") == std::string::npos);
    CHECK(header.find("(intercept)") != std::string::npos);
}

TEST_CASE("paired analysis runs from two time-point tables") {
    TempDir tmp;
    const std::string out = tmp.file("an");
    const RunResult res = run_cli(
        tmp, std::string("analyze --paired ") + testutil::fixture("paired_before.tsv") + " " +
                 testutil::fixture("paired_after.tsv") + " --metadata " +
                 testutil::fixture("paired_meta.csv") + " --group group --seed 4 --out " + out);
    REQUIRE(res.exit_code == 0);
    CHECK(data_rows(read_text(out + "/results.tsv")) == 6);
    CHECK(read_text(out + "/manifest.json").find("analyze --paired") != std::string::npos);
}

TEST_CASE("a missing input surfaces as a stage-named error and nonzero exit") {
    TempDir tmp;
    const RunResult res = run_cli(
        tmp, std::string("analyze no_such_table.tsv --metadata ") +
                 testutil::fixture("amgut_meta.csv") + " --group group --out " + tmp.file("x"));
    CHECK(res.exit_code == 1);
    CHECK(res.err.find("no_such_table.tsv") != std::string::npos);
}

TEST_CASE("an unknown metadata column is rejected") {
    TempDir tmp;
    const RunResult res = run_cli(
        tmp, std::string("analyze ") + testutil::fixture("amgut_mini.tsv") + " --metadata " +
                 testutil::fixture("amgut_meta.csv") +
                 " --group group --covariates height --out " + tmp.file("x"));
    CHECK(res.exit_code == 1);
    CHECK(res.err.find("height") != std::string::npos);
}

TEST_CASE("benchmark emits one summary row per grid cell") {
    TempDir tmp;
    const std::string out = tmp.file("bm");
    const RunResult res = run_cli(
        tmp, "benchmark --p 20 --n 20,50 --delta1 0.2 --delta2 0.2 --replicates 10 --seed 3 "
             "--threads 1 --out " + out);
    REQUIRE(res.exit_code == 0);
    const std::string summary = read_text(out + "/summary.tsv");
    CHECK(data_rows(summary) == 2);
    CHECK(summary.find("generator-dependent") != std::string::npos);
    CHECK(data_rows(read_text(out + "/replicates.tsv")) == 20);
    CHECK(first_header(read_text(out + "/replicates.tsv")) ==
          "p\tn\tdelta1\tdelta2\treplicate\tprecision\trecall\tf1\taccuracy\tn_undefined");
}

TEST_CASE("benchmark summaries do not depend on the thread count") {
    TempDir tmp;
    const std::string one = tmp.file("one");
    const std::string eight = tmp.file("eight");
    const std::string grid = "benchmark --p 10 --n 16 --delta1 0.2 --delta2 0.2 --replicates 6 "
                             "--seed 5 --out ";
    REQUIRE(run_cli(tmp, grid + one + " --threads 1").exit_code == 0);
    REQUIRE(run_cli(tmp, grid + eight + " --threads 8").exit_code == 0);
    CHECK(read_text(one + "/summary.tsv") == read_text(eight + "/summary.tsv"));
    CHECK(read_text(one + "/replicates.tsv") == read_text(eight + "/replicates.tsv"));
}

TEST_CASE("version and help are wired") {
    TempDir tmp;
    CHECK(run_cli(tmp, "--version").out.find('.') != std::string::npos);
    const RunResult help = run_cli(tmp, "--help");
    CHECK(help.exit_code == 0);
    for (const char* sub : {"analyze", "simulate", "benchmark"})
        CHECK(help.out.find(sub) != std::string::npos);
}
