// Exercises the installed command-line tool as a subprocess: round trips
// through the subcommands, exit-code contract, manifest replay, and the
// no-partial-output guarantee on failure.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csl/npy.hpp"
#include "csl/rng.hpp"
#include "csl/tensor.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Per-test scratch directory under the system temp root.
fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() /
                       ("csl_cli_" + name + "_" + std::to_string(getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

/// Runs the tool through the shell, capturing stdout/stderr and exit code.
/// env_prefix, when non-empty, is prepended verbatim (e.g. "CSL_SEED=5").
RunResult run_cli(const fs::path& dir, const std::string& args,
                  const std::string& env_prefix = "") {
    const fs::path out_path = dir / "cmd_stdout.txt";
    const fs::path err_path = dir / "cmd_stderr.txt";
    std::string cmd;
    if (!env_prefix.empty()) cmd += env_prefix + " ";
    cmd += std::string(CSL_CLI_PATH) + " " + args + " >" + out_path.string() +
           " 2>" + err_path.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    return r;
}

json parse_file(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    json j;
    in >> j;
    return j;
}

}  // namespace

TEST_CASE("version and help exit cleanly") {
    const fs::path dir = fresh_dir("version");
    const RunResult version = run_cli(dir, "--version");
    CHECK(version.code == 0);
    CHECK(version.out.find("0.1.0") != std::string::npos);
    CHECK(run_cli(dir, "--help").code == 0);
    CHECK(run_cli(dir, "select --help").code == 0);
}

TEST_CASE("usage errors exit with 2") {
    const fs::path dir = fresh_dir("usage");
    CHECK(run_cli(dir, "").code == 2);                  // missing subcommand
    CHECK(run_cli(dir, "select").code == 2);            // missing required
    CHECK(run_cli(dir, "select --bogus x").code == 2);  // unknown flag
    CHECK(run_cli(dir, "frobnicate").code == 2);        // unknown subcommand
}

TEST_CASE("synth, select, eval, loss and mask round trip") {
    const fs::path dir = fresh_dir("pipeline");
    const std::string probs = (dir / "probs.npy").string();
    const std::string gt = (dir / "gt.npy").string();
    const std::string corr = (dir / "correctness.npy").string();

    const RunResult synth = run_cli(
        dir, "synth --height 32 --width 32 --classes 4 --seed 7 --out-probs " +
                 probs + " --out-gt " + gt + " --out-correctness " + corr +
                 " --manifest " + (dir / "synth.json").string());
    REQUIRE(synth.code == 0);
    REQUIRE(fs::exists(probs));
    REQUIRE(fs::exists(gt));
    REQUIRE(fs::exists(corr));

    const json synth_manifest = parse_file(dir / "synth.json");
    CHECK(synth_manifest.at("schema") == "csl-manifest/1");
    CHECK(synth_manifest.at("subcommand") == "synth");
    CHECK(synth_manifest.at("seed") == 7);

    const std::string weights = (dir / "weights.npy").string();
    const std::string labels = (dir / "labels.npy").string();
    const RunResult select = run_cli(
        dir, "select --probs " + probs + " --normalize --out-weights " +
                 weights + " --out-labels " + labels + " --manifest " +
                 (dir / "select.json").string());
    REQUIRE(select.code == 0);

    const csl::Tensor w = csl::npy::read_array(weights);
    REQUIRE(w.shape() == std::vector<size_t>{32, 32});
    REQUIRE(w.dtype() == csl::Dtype::Float64);
    for (double v : w.view<double>()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    const csl::Tensor l = csl::npy::read_array(labels);
    REQUIRE(l.shape() == std::vector<size_t>{32, 32});
    CHECK(l.dtype() == csl::Dtype::Int32);

    const RunResult eval = run_cli(
        dir, "eval --weights " + weights + " --pred-labels " + labels +
                 " --gt " + gt + " --manifest " + (dir / "eval.json").string());
    REQUIRE(eval.code == 0);
    const json report = json::parse(eval.out);
    CHECK(report.contains("accuracy_hard"));
    CHECK(report.contains("accuracy_soft"));
    CHECK(report.at("n_pixels") == 32 * 32);

    const RunResult loss = run_cli(
        dir, "loss --probs " + probs + " --target " + labels + " --weights " +
                 weights);
    REQUIRE(loss.code == 0);
    const double plain = std::stod(loss.out);
    CHECK(plain >= 0.0);

    // Combining with the same probabilities and lambda 0.5/0.5 reproduces
    // the plain loss.
    const RunResult combined = run_cli(
        dir, "loss --probs " + probs + " --target " + labels + " --weights " +
                 weights + " --masked-probs " + probs +
                 " --lambda1 0.5 --lambda2 0.5");
    REQUIRE(combined.code == 0);
    CHECK(std::stod(combined.out) == doctest::Approx(plain).epsilon(1e-12));

    const std::string masked = (dir / "masked.npy").string();
    const std::string zeroed = (dir / "zeroed.npy").string();
    const RunResult mask = run_cli(
        dir, "mask --weights " + weights + " --image " + probs +
                 " --patch-size 8 --ratio 0.6 --seed 3 --out-image " + masked +
                 " --out-mask " + zeroed);
    REQUIRE(mask.code == 0);
    const csl::Tensor z = csl::npy::read_array(zeroed);
    REQUIRE(z.shape() == std::vector<size_t>{32, 32});
    REQUIRE(z.dtype() == csl::Dtype::Uint8);
    const auto zv = z.view<uint8_t>();
    const auto wv = w.view<double>();
    for (size_t i = 0; i < zv.size(); ++i) {
        if (zv[i]) CHECK(wv[i] == 1.0);  // only trusted pixels get zeroed
    }
    const csl::Tensor m = csl::npy::read_array(masked);
    const csl::Tensor p = csl::npy::read_array(probs);
    REQUIRE(m.shape() == p.shape());
    const auto mv = m.view<float>();
    for (size_t i = 0; i < 32 * 32; ++i) {
        if (zv[i]) {
            for (size_t k = 0; k < 4; ++k) CHECK(mv[k * 32 * 32 + i] == 0.0f);
        }
    }
}

TEST_CASE("eval respects the ignore index") {
    const fs::path dir = fresh_dir("ignore");
    const std::string weights = (dir / "w.npy").string();
    const std::string pred = (dir / "pred.npy").string();
    const std::string gt = (dir / "gt.npy").string();
    csl::npy::write_array(
        weights, csl::Tensor::from_f64({1, 2}, csl::Dtype::Float64,
                                       std::vector<double>{1.0, 0.0}));
    csl::npy::write_array(
        pred, csl::Tensor::from_f64({1, 2}, csl::Dtype::Int32,
                                    std::vector<double>{0.0, 1.0}));
    csl::npy::write_array(
        gt, csl::Tensor::from_f64({1, 2}, csl::Dtype::Int32,
                                  std::vector<double>{0.0, 255.0}));
    const RunResult eval = run_cli(dir, "eval --weights " + weights +
                                            " --pred-labels " + pred +
                                            " --gt " + gt);
    REQUIRE(eval.code == 0);
    const json report = json::parse(eval.out);
    CHECK(report.at("n_pixels") == 1);
    CHECK(report.at("n_ignored") == 1);
    CHECK(report.at("accuracy_hard") == 1.0);
}

TEST_CASE("compare renders json and text tables") {
    const fs::path dir = fresh_dir("compare");
    const std::string probs = (dir / "probs.npy").string();
    const std::string gt = (dir / "gt.npy").string();
    REQUIRE(run_cli(dir, "synth --height 24 --width 24 --classes 4 --seed 2 "
                         "--out-probs " +
                             probs + " --out-gt " + gt)
                .code == 0);

    const RunResult cmp = run_cli(
        dir, "compare --probs " + probs + " --gt " + gt +
                 " --method csl:csl:norm --method thr:threshold:0.9");
    REQUIRE(cmp.code == 0);
    const json table = json::parse(cmp.out);
    REQUIRE(table.at("methods").size() == 2);
    CHECK(table.at("methods")[0].at("name") == "csl");
    CHECK(table.at("methods")[1].at("name") == "thr");
    CHECK(table.at("deltas").size() == 1);

    const RunResult text = run_cli(
        dir, "compare --probs " + probs + " --gt " + gt +
                 " --method thr:threshold --format text");
    REQUIRE(text.code == 0);
    CHECK(text.out.find("method") != std::string::npos);
    CHECK(text.out.find("thr") != std::string::npos);

    CHECK(run_cli(dir, "compare --probs " + probs + " --gt " + gt +
                           " --method nocolon")
              .code == 2);
    CHECK(run_cli(dir, "compare --probs " + probs + " --gt " + gt +
                           " --method x:bogus")
              .code == 2);
}

TEST_CASE("rerun replays a manifest byte for byte") {
    const fs::path dir = fresh_dir("rerun");
    const std::string probs = (dir / "probs.npy").string();
    const std::string gt = (dir / "gt.npy").string();
    REQUIRE(run_cli(dir, "synth --height 24 --width 24 --classes 5 --seed 11 "
                         "--out-probs " +
                             probs + " --out-gt " + gt + " --manifest " +
                             (dir / "synth.json").string())
                .code == 0);

    const std::string weights = (dir / "w.npy").string();
    const std::string labels = (dir / "l.npy").string();
    REQUIRE(run_cli(dir, "select --probs " + probs + " --normalize "
                         "--out-weights " +
                             weights + " --out-labels " + labels +
                             " --manifest " + (dir / "select.json").string())
                .code == 0);

    const std::string w_before = slurp(weights);
    const std::string l_before = slurp(labels);
    const std::string p_before = slurp(probs);
    fs::remove(weights);
    fs::remove(labels);
    fs::remove(probs);
    fs::remove(gt);

    // Replay the generator first, then the selection that consumed it.
    REQUIRE(run_cli(dir, "rerun --manifest " + (dir / "synth.json").string())
                .code == 0);
    CHECK(slurp(probs) == p_before);
    REQUIRE(run_cli(dir, "rerun --manifest " + (dir / "select.json").string())
                .code == 0);
    CHECK(slurp(weights) == w_before);
    CHECK(slurp(labels) == l_before);

    // Unknown schema and missing manifest fail without touching outputs.
    std::ofstream bad(dir / "bad.json");
    bad << R"({"schema": "other/9", "subcommand": "select"})";
    bad.close();
    CHECK(run_cli(dir, "rerun --manifest " + (dir / "bad.json").string())
              .code == 2);
    CHECK(run_cli(dir, "rerun --manifest " + (dir / "missing.json").string())
              .code == 3);
}

TEST_CASE("missing and malformed inputs map to distinct exit codes") {
    const fs::path dir = fresh_dir("errors");
    const std::string out_w = (dir / "w.npy").string();
    const std::string out_l = (dir / "l.npy").string();

    // Unreadable input file: I/O error, exit 3.
    const RunResult missing = run_cli(
        dir, "select --probs " + (dir / "nope.npy").string() +
                 " --out-weights " + out_w + " --out-labels " + out_l);
    CHECK(missing.code == 3);
    CHECK_FALSE(fs::exists(out_w));

    // Structurally wrong input: validation error, exit 2.
    const std::string flat = (dir / "flat.npy").string();
    csl::npy::write_array(
        flat, csl::Tensor::zeros({8, 8}, csl::Dtype::Float32));
    const RunResult malformed = run_cli(
        dir, "select --probs " + flat + " --out-weights " + out_w +
                 " --out-labels " + out_l);
    CHECK(malformed.code == 2);
    CHECK_FALSE(fs::exists(out_w));
    CHECK_FALSE(fs::exists(out_l));
}

TEST_CASE("a late write failure removes everything already written") {
    const fs::path dir = fresh_dir("cleanup");
    const std::string probs = (dir / "probs.npy").string();
    const std::string gt = (dir / "gt.npy").string();
    REQUIRE(run_cli(dir, "synth --height 16 --width 16 --classes 3 --seed 1 "
                         "--out-probs " +
                             probs + " --out-gt " + gt)
                .code == 0);

    // Weights write succeeds, labels write fails: the weights file must not
    // survive the failed run.
    const std::string out_w = (dir / "w.npy").string();
    const std::string bad_l = (dir / "no_such_dir" / "l.npy").string();
    const RunResult broken = run_cli(
        dir, "select --probs " + probs + " --out-weights " + out_w +
                 " --out-labels " + bad_l);
    CHECK(broken.code == 3);
    CHECK_FALSE(fs::exists(out_w));
}

TEST_CASE("seed resolution prefers the flag, then the environment") {
    const fs::path dir = fresh_dir("seed");
    const std::string a = (dir / "a.npy").string();
    const std::string b = (dir / "b.npy").string();
    const std::string c = (dir / "c.npy").string();
    const std::string gt_a = (dir / "gt_a.npy").string();
    const std::string gt_b = (dir / "gt_b.npy").string();
    const std::string gt_c = (dir / "gt_c.npy").string();

    const std::string common = "synth --height 16 --width 16 --classes 3 ";
    REQUIRE(run_cli(dir, common + "--seed 5 --out-probs " + a + " --out-gt " +
                             gt_a)
                .code == 0);
    REQUIRE(run_cli(dir, common + "--out-probs " + b + " --out-gt " + gt_b,
                    "CSL_SEED=5")
                .code == 0);
    CHECK(slurp(a) == slurp(b));  // env seed matches the explicit flag

    // The explicit flag wins over the environment.
    REQUIRE(run_cli(dir, common + "--seed 5 --out-probs " + c + " --out-gt " +
                             gt_c,
                    "CSL_SEED=99")
                .code == 0);
    CHECK(slurp(a) == slurp(c));

    CHECK(run_cli(dir, common + "--out-probs " + b + " --out-gt " + gt_b,
                  "CSL_SEED=banana")
              .code == 2);
}

TEST_CASE("degenerate features warn but still succeed") {
    const fs::path dir = fresh_dir("fallback");
    const std::string probs = (dir / "uniform.npy").string();
    csl::npy::write_array(
        probs, csl::Tensor::from_f64({2, 8, 8}, csl::Dtype::Float64,
                                     std::vector<double>(2 * 64, 0.5)));
    const std::string out_w = (dir / "w.npy").string();
    const std::string out_l = (dir / "l.npy").string();
    const RunResult r = run_cli(dir, "select --probs " + probs +
                                         " --out-weights " + out_w +
                                         " --out-labels " + out_l);
    CHECK(r.code == 0);
    CHECK(r.err.find("fallback") != std::string::npos);
    CHECK(fs::exists(out_w));
}
