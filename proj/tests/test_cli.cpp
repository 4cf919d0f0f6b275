#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gesm/dataset.hpp"
#include "gesm/model.hpp"

using namespace gesm;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CliResult run_cli(const std::string& args) {
    const std::string out_path = "/tmp/gesm_cli_stdout.txt";
    const std::string err_path = "/tmp/gesm_cli_stderr.txt";
    const std::string cmd =
        std::string(GESM_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
    const int status = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    return result;
}

// One shared container and split flags for the whole suite.
const std::string kData = "/tmp/gesm_cli_data.gesm";
const std::string kSplit =
    " --split per-class --train-per-class 8 --val-count 16 --test-count 24";
const std::string kSmall = " --set hidden=8 --set heads=2 --set steps=2 --set max_epochs=30";

void ensure_data() {
    static bool done = false;
    if (!done) {
        const GraphDataset ds = synth_two_cluster(30, 0.25, 0.02, 9);
        save_dataset(ds, kData);
        done = true;
    }
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        lines.push_back(line);
    }
    return lines;
}

} // namespace

TEST_CASE("validate-data prints the summary line and succeeds") {
    ensure_data();
    const CliResult r = run_cli("validate-data --data " + kData);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("n=60") != std::string::npos);
    CHECK(r.out.find("edges=") != std::string::npos);
}

TEST_CASE("train writes a report and parameters and prints the test metric") {
    ensure_data();
    std::filesystem::remove_all("/tmp/gesm_cli_run");
    const CliResult r = run_cli("train --data " + kData + kSplit + kSmall +
                                " --seed 4 --out /tmp/gesm_cli_run");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("test_metric=") != std::string::npos);
    CHECK(std::filesystem::exists("/tmp/gesm_cli_run/report.csv"));
    CHECK(std::filesystem::exists("/tmp/gesm_cli_run/params.gesm"));
    const std::string report = slurp("/tmp/gesm_cli_run/report.csv");
    CHECK(report.rfind("epoch,train_loss,val_loss,val_metric", 0) == 0);
    CHECK(report.find("# summary") != std::string::npos);
}

TEST_CASE("fixed seeds give byte-identical reports apart from wall time") {
    ensure_data();
    auto strip_timing = [](const std::string& text) {
        std::string out;
        for (const std::string& line : lines_of(text)) {
            if (line.rfind("# summary", 0) == 0) {
                out += line.substr(0, line.find(" eval_ms="));
            } else {
                out += line;
            }
            out += '\n';
        }
        return out;
    };
    run_cli("train --data " + kData + kSplit + kSmall + " --seed 6 --out /tmp/gesm_cli_a");
    run_cli("train --data " + kData + kSplit + kSmall + " --seed 6 --out /tmp/gesm_cli_b");
    CHECK(strip_timing(slurp("/tmp/gesm_cli_a/report.csv")) ==
          strip_timing(slurp("/tmp/gesm_cli_b/report.csv")));
    CHECK(slurp("/tmp/gesm_cli_a/params.gesm") == slurp("/tmp/gesm_cli_b/params.gesm"));
}

TEST_CASE("eval reloads saved parameters and reproduces the test metric") {
    ensure_data();
    const CliResult trained = run_cli("train --data " + kData + kSplit + kSmall +
                                      " --seed 4 --out /tmp/gesm_cli_run");
    REQUIRE(trained.exit_code == 0);
    const std::string metric =
        trained.out.substr(trained.out.find("test_metric=") + 12,
                           trained.out.find(' ') - trained.out.find("test_metric=") - 12);
    const CliResult r = run_cli("eval --data " + kData + kSplit +
                                " --params /tmp/gesm_cli_run/params.gesm --mask test --seed 4");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("test_metric=" + metric) != std::string::npos);
}

TEST_CASE("train with multiple seeds emits a per-seed table") {
    ensure_data();
    const CliResult r =
        run_cli("train --data " + kData + kSplit + kSmall + " --seed 2 --seeds 3");
    CHECK(r.exit_code == 0);
    CHECK(r.out.rfind("seed,test_metric,failure", 0) == 0);
    const auto lines = lines_of(r.out);
    // header + 3 seeds + summary comment + final stdout summary line
    CHECK(lines.size() == 6);
    CHECK(lines[1].rfind("2,", 0) == 0);
    CHECK(lines[3].rfind("4,", 0) == 0);
    CHECK(r.out.find("# summary mean=") != std::string::npos);
}

TEST_CASE("sweep-steps emits one csv row per requested depth") {
    ensure_data();
    const CliResult r =
        run_cli("sweep-steps --data " + kData + kSplit + kSmall + " --steps 0,2,4 --seed 3");
    CHECK(r.exit_code == 0);
    const auto lines = lines_of(r.out);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "steps,train_acc,val_acc,test_acc");
    CHECK(lines[1].rfind("0,", 0) == 0);
    CHECK(lines[2].rfind("2,", 0) == 0);
    CHECK(lines[3].rfind("4,", 0) == 0);
}

TEST_CASE("sweep-steps rejects a non-ascending list") {
    ensure_data();
    const CliResult r =
        run_cli("sweep-steps --data " + kData + kSplit + kSmall + " --steps 4,2");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("ascending") != std::string::npos);
}

TEST_CASE("sweep-label-rate aggregates seeded runs per rate") {
    ensure_data();
    const CliResult r = run_cli("sweep-label-rate --data " + kData + kSmall +
                                " --rates 0.1,0.2 --seeds 2 --val-count 16 --test-count 24");
    CHECK(r.exit_code == 0);
    const auto lines = lines_of(r.out);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "rate,mean_test_metric,std,succeeded,runs");
    CHECK(lines[1].rfind("0.1", 0) == 0);
    CHECK(lines[2].rfind("0.2", 0) == 0);
}

TEST_CASE("time-inference reports median timings per depth") {
    ensure_data();
    const CliResult r = run_cli("time-inference --data " + kData + kSplit + kSmall +
                                " --steps 1,3 --repeats 3");
    CHECK(r.exit_code == 0);
    const auto lines = lines_of(r.out);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "steps,median_ms,min_ms,max_ms");
    CHECK(lines[1].rfind("1,", 0) == 0);
    CHECK(lines[2].rfind("3,", 0) == 0);

    const CliResult bad = run_cli("time-inference --data " + kData + kSplit +
                                  " --steps 1 --repeats 2");
    CHECK(bad.exit_code == 1);
}

TEST_CASE("dump-embeddings writes both layer choices with the right shapes") {
    ensure_data();
    run_cli("train --data " + kData + kSplit + kSmall + " --seed 4 --out /tmp/gesm_cli_run");
    const CliResult pre = run_cli("dump-embeddings --data " + kData +
                                  " --params /tmp/gesm_cli_run/params.gesm"
                                  " --layer pre-propagation --out /tmp/gesm_cli_pre.txt");
    CHECK(pre.exit_code == 0);
    const Matrix z = read_embeddings("/tmp/gesm_cli_pre.txt");
    CHECK(z.rows == 60);
    CHECK(z.cols == 8); // hidden width

    const CliResult logits = run_cli("dump-embeddings --data " + kData +
                                     " --params /tmp/gesm_cli_run/params.gesm"
                                     " --layer pre-softmax --out /tmp/gesm_cli_logit.txt");
    CHECK(logits.exit_code == 0);
    const Matrix l = read_embeddings("/tmp/gesm_cli_logit.txt");
    CHECK(l.rows == 60);
    CHECK(l.cols == 2); // class count
}

TEST_CASE("usage errors exit with code two") {
    ensure_data();
    CHECK(run_cli("train").exit_code == 2); // missing --data
    CHECK(run_cli("dump-embeddings --data " + kData +
                  " --params /tmp/gesm_cli_run/params.gesm --layer bogus --out /tmp/x.txt")
              .exit_code == 2);
    CHECK(run_cli("no-such-command").exit_code == 2);
    CHECK(run_cli("train --data " + kData + " --variant sideways").exit_code == 2);
    CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("runtime failures exit with code one") {
    CHECK(run_cli("validate-data --data /tmp/gesm_absent.gesm").exit_code == 1);
    ensure_data();
    CHECK(run_cli("train --data " + kData + " --split stored").exit_code == 1);
    CHECK(run_cli("eval --data " + kData + kSplit + " --params /tmp/gesm_absent.params")
              .exit_code == 1);
}

TEST_CASE("variant flag switches the trained architecture") {
    ensure_data();
    const CliResult r = run_cli("train --data " + kData + kSplit + kSmall +
                                " --seed 4 --variant base --out /tmp/gesm_cli_base");
    CHECK(r.exit_code == 0);
    const GesmParams params = load_params("/tmp/gesm_cli_base/params.gesm");
    CHECK(!params.variant.use_attention);
    CHECK(!params.variant.use_regularizer);
    CHECK(!params.w_embed.empty());
    CHECK(params.w_heads.empty());
}

TEST_CASE("synth generates a loadable container with the requested size") {
    const CliResult r = run_cli(
        "synth --out /tmp/gesm_cli_synth.gesm --n-per-cluster 15 --p-in 0.3 --seed 2");
    CHECK(r.exit_code == 0);
    const GraphDataset ds = load_dataset("/tmp/gesm_cli_synth.gesm");
    CHECK(ds.n == 30);
    validate_dataset(ds);
}
