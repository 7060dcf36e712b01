#include "helpers.hpp"
#include <mfedch/cli.hpp>
#include <gtest/gtest.h>
#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

using namespace mfedch;
using testing_support::read_file;
using testing_support::TempDir;
using testing_support::write_file;

namespace {

struct Result
{
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args)
{
    args.insert(args.begin(), "mfedch");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), {out, err});
    return {code, out.str(), err.str()};
}

int exit_status(const std::string& command)
{
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kBlobs = R"({
  "dataset": {"synth": {"views": 2, "classes": 3, "per_class": 6, "dims": [4, 4], "noise_sigma": 0.0, "seed": 1}},
  "hyper": {"max_iters": 20},
  "experiment": {"M": [2, 3], "repeats": 2}
})";

} // namespace

TEST(Cli, TrainThenEvalOnNoiseFreeBlobs)
{
    TempDir dir("cli_train");
    write_file(dir / "c.json", kBlobs);
    auto r = run({"train", "--config", dir / "c.json", "--out", dir / "model"});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const auto* f : {"manifest.json", "P_0.csv", "P_1.csv", "loss_history.csv", "run.json"})
        EXPECT_TRUE(std::filesystem::exists(dir.path() / "model" / f)) << f;

    r = run({"eval", "--config", dir / "c.json", "--model", dir / "model", "--out", dir / "eval"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = read_file(dir / "eval/results.csv");
    EXPECT_EQ(csv,
              "row_label,M,mean,std,repeats\n"
              "view0,2,1,0,2\nview1,2,1,0,2\nMean,2,1,0,2\nII,2,1,0,2\n"
              "view0,3,1,0,2\nview1,3,1,0,2\nMean,3,1,0,2\nII,3,1,0,2\n");
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "eval/results.txt"));
}

TEST(Cli, RunJsonEchoesTheResolvedConfig)
{
    TempDir dir("cli_runjson");
    write_file(dir / "c.json", kBlobs);
    const auto r = run({"train", "--config", dir / "c.json", "--out", dir / "m", "--set", "hyper.tau1=0.5"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto run_json = Json::parse(read_file(dir / "m/run.json"));
    EXPECT_EQ(run_json["command"], "train");
    EXPECT_EQ(run_json["config"]["hyper"]["tau1"], 0.5);
    EXPECT_EQ(run_json["config"]["hyper"]["gamma"], 0.001);
    EXPECT_EQ(run_json["config"]["train"]["w_init"], "jittered");
    // The echoed config alone reproduces the run.
    write_file(dir / "again.json", run_json["config"].dump());
    ASSERT_EQ(run({"train", "--config", dir / "again.json", "--out", dir / "m2"}).code, 0);
    EXPECT_EQ(read_file(dir / "m/P_0.csv"), read_file(dir / "m2/P_0.csv"));
    EXPECT_EQ(read_file(dir / "m/loss_history.csv"), read_file(dir / "m2/loss_history.csv"));
}

TEST(Cli, EvalWithMismatchedModelIsShapeError)
{
    TempDir dir("cli_shape");
    write_file(dir / "c.json", kBlobs);
    ASSERT_EQ(run({"train", "--config", dir / "c.json", "--out", dir / "m"}).code, 0);
    const auto r = run({"eval", "--config", dir / "c.json", "--model", dir / "m", "--out", dir / "e", "--set",
                        "dataset.synth.dims=[5,4]"});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err.rfind("mfedch: shape_error: ", 0), 0u) << r.err;
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, GradcheckOnDefaultSeedPasses)
{
    const auto r = run({"gradcheck"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("max_rel_err"), std::string::npos);
}

TEST(Cli, GradcheckFailureIsNumericExit)
{
    // A step this coarse cannot meet the tolerance.
    const auto r = run({"gradcheck", "--set", "gradcheck.step=0.5", "--set", "gradcheck.instances=3"});
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(r.err.rfind("mfedch: numeric_error: ", 0), 0u) << r.err;
}

TEST(Cli, DiagnoseWritesRows)
{
    TempDir dir("cli_diag");
    write_file(dir / "c.json", kBlobs);
    const auto r = run({"diagnose", "--config", dir / "c.json", "--out", dir / "d"});
    EXPECT_EQ(r.code, 0) << r.err << r.out;
    const auto csv = read_file(dir / "d/diagnostics.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "check,value,bound,pass");
    EXPECT_NE(csv.find("negative_control_residual"), std::string::npos);
    EXPECT_NE(csv.find("trained_laplacian_gap_scaled_view1"), std::string::npos);
    // Reported, but not part of the exit status.
    EXPECT_NE(csv.find("cross_view_alignment_gain,"), std::string::npos);
}

TEST(Cli, SynthWritesLoadableFiles)
{
    TempDir dir("cli_synth");
    const auto r = run({"synth", "--out", dir / "s", "--set", "dataset.synth.classes=2", "--set",
                        "dataset.synth.per_class=3"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto ds = load_views({dir / "s/view_0.csv", dir / "s/view_1.csv"}, dir / "s/labels.csv");
    EXPECT_EQ(ds.num_samples(), 6);
    EXPECT_EQ(ds.num_classes(), 2);
}

TEST(Cli, BaselineAndDimensionSweep)
{
    TempDir dir("cli_base");
    write_file(dir / "c.json", kBlobs);
    const auto r = run({"eval", "--config", dir / "c.json", "--out", dir / "e", "--baseline", "--set",
                        "experiment.d_sweep=[1,2]", "--set", "dataset.names=[\"GS\",\"LBP\"]"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(read_file(dir / "e/baseline.csv").find("LBP,3,1,0,2"), std::string::npos);
    EXPECT_NE(read_file(dir / "e/results.txt").find("GS "), std::string::npos);
}

TEST(Cli, UsageAndConfigErrors)
{
    TempDir dir("cli_err");
    auto r = run({});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("mfedch: usage_error: ", 0), 0u);
    r = run({"train", "--out", dir / "x"});
    EXPECT_EQ(r.code, 1);
    write_file(dir / "c.json", R"({"hyper": {"lamda": 2}})");
    r = run({"train", "--config", dir / "c.json", "--out", dir / "x"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("unknown key 'hyper.lamda'"), std::string::npos) << r.err;
    write_file(dir / "c2.json", R"({"dataset": {"views": ["nope0.csv", "nope1.csv"]}})");
    r = run({"train", "--config", dir / "c2.json", "--out", dir / "x"});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err.rfind("mfedch: parse_error: ", 0), 0u) << r.err;
}

TEST(Cli, BinaryExitCodes)
{
    TempDir dir("cli_bin");
    const std::string bin = MFEDCH_CLI_PATH;
    EXPECT_EQ(exit_status(bin + " gradcheck --set gradcheck.instances=2 > /dev/null"), 0);
    EXPECT_EQ(exit_status(bin + " train > /dev/null 2>&1"), 1);
    write_file(dir / "c.json", R"({"dataset": {"views": ["missing0.csv", "missing1.csv"]}})");
    EXPECT_EQ(exit_status(bin + " train --config " + (dir / "c.json") + " --out " + (dir / "o") + " 2> " +
                          (dir / "err.txt")),
              2);
    const auto err = read_file(dir / "err.txt");
    EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1) << err;
}
