#include "gapalign/graphdata.hpp"
#include "gapalign/text_io.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using gapalign::text::read_file;

namespace {

struct Result {
    int code;
    std::string out, err;
};

class Cli : public ::testing::Test {
protected:
    fs::path root;

    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        root = fs::temp_directory_path() / (std::string("gapalign_cli_") + info->name());
        fs::remove_all(root);
        fs::create_directories(root);
    }
    void TearDown() override { fs::remove_all(root); }

    Result run(const std::string& args) const {
        const auto out = root / "stdout.txt", err = root / "stderr.txt";
        const std::string cmd = std::string(GAPALIGN_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(out), read_file(err)};
    }

    std::string p(const std::string& rel) const { return (root / rel).string(); }

    void synth(const std::string& dir, const std::string& extra = "") const {
        ASSERT_EQ(run("synth --per-class 30 --dim 8 --seed 1 --out " + p(dir) + " " + extra).code, 0);
    }
};

std::size_t data_rows(const fs::path& csv) {
    const auto s = read_file(csv);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')) - 1;
}

}  // namespace

TEST_F(Cli, SynthProducesLoadableDataset) {
    const auto r = run("synth --classes 3 --per-class 100 --p-intra 0.8 --p-inter 0.05 --noise 0.3 --seed 0 --out " +
                       p("sbm0"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto g = gapalign::load_graph(p("sbm0"));
    EXPECT_EQ(g.n_nodes, 300);
    EXPECT_EQ(g.n_classes, 3);
}

TEST_F(Cli, SynthDeterministicAndRefusesOverwrite) {
    synth("a");
    synth("b");
    for (const char* f : {"edges.tsv", "features.csv", "labels.csv", "text_protos.csv", "meta.json"})
        EXPECT_EQ(read_file(root / "a" / f), read_file(root / "b" / f)) << f;
    const auto again = run("synth --per-class 30 --dim 8 --seed 1 --out " + p("a"));
    EXPECT_EQ(again.code, 6);
    EXPECT_NE(again.err.find("--force"), std::string::npos);
    synth("a", "--force");
    EXPECT_EQ(read_file(root / "a" / "edges.tsv"), read_file(root / "b" / "edges.tsv"));
}

TEST_F(Cli, SynthRangeCheck) {
    EXPECT_EQ(run("synth --p-intra 1.2 --out " + p("x")).code, 2);
    EXPECT_FALSE(fs::exists(root / "x"));
    EXPECT_EQ(run("synth --out " + p("y") + " --classes 5 --dim 3").code, 2);
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("bogus").code, 2);
    EXPECT_EQ(run("train --data x").code, 2);
    EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, TrainDefaultsEchoCitationTheta) {
    synth("d");
    const auto r = run("train --data " + p("d") + " --out " + p("r") + " --shots 2 --epochs 3 --profile citation");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("theta=0.10"), std::string::npos) << r.out;
    const auto meta = nlohmann::json::parse(read_file(root / "r" / "run_meta.json"));
    EXPECT_EQ(meta["config"]["theta"].get<double>(), 0.10);
    EXPECT_EQ(meta["config"]["epochs"].get<int>(), 3);
    for (const char* f : {"curves.csv", "curves.jsonl", "params.json", "run_meta.json", "results.csv"})
        EXPECT_TRUE(fs::exists(root / "r" / f)) << f;
    EXPECT_TRUE(meta.contains("dataset_fingerprint"));
    EXPECT_TRUE(meta.contains("wall_time_s"));
}

TEST_F(Cli, ThetaOverridesProfileWithNotice) {
    synth("d");
    const auto r = run("train --data " + p("d") + " --out " + p("r") + " --shots 2 --epochs 2 --profile social --theta 0.15");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("notice"), std::string::npos);
    EXPECT_NE(r.out.find("theta=0.15"), std::string::npos);
    ASSERT_EQ(run("train --data " + p("d") + " --out " + p("s") + " --shots 2 --epochs 2 --profile social").code, 0);
    EXPECT_EQ(nlohmann::json::parse(read_file(root / "s" / "run_meta.json"))["config"]["theta"].get<double>(), 0.12);
}

TEST_F(Cli, NoMonitorFiveEpochsFiveRows) {
    synth("d");
    ASSERT_EQ(run("train --data " + p("d") + " --out " + p("r") + " --shots 3 --no-monitor --epochs 5").code, 0);
    EXPECT_EQ(data_rows(root / "r" / "curves.csv"), 5u);
}

TEST_F(Cli, SeedSweepRowCounts) {
    synth("d");
    const auto r = run("train --data " + p("d") + " --out " + p("r") + " --shots 1 --seeds 0,1,2,3,4 --epochs 3");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(data_rows(root / "r" / "results.csv"), 5u);
    EXPECT_EQ(data_rows(root / "r" / "summary.csv"), 1u);
    for (int s = 0; s < 5; ++s) EXPECT_TRUE(fs::exists(root / "r" / ("seed_" + std::to_string(s)) / "curves.csv"));
    const auto meta = nlohmann::json::parse(read_file(root / "r" / "run_meta.json"));
    EXPECT_EQ(meta["seeds"].size(), 5u);
}

TEST_F(Cli, TrainDeterministicCurves) {
    synth("d");
    const std::string flags = " --shots 3 --epochs 6 --seed 4";
    ASSERT_EQ(run("train --data " + p("d") + " --out " + p("r1") + flags).code, 0);
    ASSERT_EQ(run("train --data " + p("d") + " --out " + p("r2") + flags).code, 0);
    EXPECT_EQ(read_file(root / "r1" / "curves.csv"), read_file(root / "r2" / "curves.csv"));
    EXPECT_EQ(read_file(root / "r1" / "params.json"), read_file(root / "r2" / "params.json"));
    const auto m1 = nlohmann::json::parse(read_file(root / "r1" / "run_meta.json"));
    const auto m2 = nlohmann::json::parse(read_file(root / "r2" / "run_meta.json"));
    EXPECT_EQ(m1["config_hash"], m2["config_hash"]);
    EXPECT_EQ(m1["dataset_fingerprint"], m2["dataset_fingerprint"]);
}

TEST_F(Cli, TrainRefusesNonEmptyOutWithoutForce) {
    synth("d");
    ASSERT_EQ(run("train --data " + p("d") + " --out " + p("r") + " --shots 1 --epochs 1").code, 0);
    EXPECT_EQ(run("train --data " + p("d") + " --out " + p("r") + " --shots 1 --epochs 1").code, 6);
    EXPECT_EQ(run("train --data " + p("d") + " --out " + p("r") + " --shots 1 --epochs 1 --force").code, 0);
}

TEST_F(Cli, DataErrorsMapToExitCodes) {
    EXPECT_EQ(run("train --data " + p("missing") + " --out " + p("r")).code, 3);
    synth("d");
    std::ofstream(root / "d" / "labels.csv", std::ios::app) << "0,99\n";
    const auto r = run("train --data " + p("d") + " --out " + p("r2"));
    EXPECT_EQ(r.code, 4);
    EXPECT_NE(r.err.find("labels.csv:"), std::string::npos) << r.err;
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
    synth("d");
    {
        std::ofstream(root / "cfg.json") << R"({"epochs": 7, "no-monitor": true, "shots": 2, "lr": 0.001})";
    }
    ASSERT_EQ(run("train --config " + p("cfg.json") + " --data " + p("d") + " --out " + p("r")).code, 0);
    EXPECT_EQ(data_rows(root / "r" / "curves.csv"), 7u);
    ASSERT_EQ(run("train --config " + p("cfg.json") + " --data " + p("d") + " --out " + p("s") + " --epochs 4").code, 0);
    EXPECT_EQ(data_rows(root / "s" / "curves.csv"), 4u);
    const auto meta = nlohmann::json::parse(read_file(root / "s" / "run_meta.json"));
    EXPECT_EQ(meta["config"]["lr"].get<double>(), 0.001);
    {
        std::ofstream(root / "bad.json") << "{not json";
    }
    EXPECT_EQ(run("train --config " + p("bad.json") + " --data " + p("d") + " --out " + p("t")).code, 2);
}

TEST_F(Cli, ConfigHashStableUnderKeyReordering) {
    synth("d");
    {
        std::ofstream(root / "a.json") << R"({"epochs": 2, "shots": 1, "tau": 0.3})";
        std::ofstream(root / "b.json") << R"({"tau": 0.3, "shots": 1, "epochs": 2})";
    }
    ASSERT_EQ(run("train --config " + p("a.json") + " --data " + p("d") + " --out " + p("ra")).code, 0);
    ASSERT_EQ(run("train --config " + p("b.json") + " --data " + p("d") + " --out " + p("rb")).code, 0);
    const auto a = nlohmann::json::parse(read_file(root / "ra" / "run_meta.json"));
    const auto b = nlohmann::json::parse(read_file(root / "rb" / "run_meta.json"));
    EXPECT_EQ(a["config_hash"], b["config_hash"]);
}

TEST_F(Cli, ReportStoppedAtAndCompare) {
    synth("d");
    ASSERT_EQ(run("train --data " + p("d") + " --out " + p("mon") + " --shots 5 --theta 0.01 --lr 0.01").code, 0);
    ASSERT_EQ(run("train --data " + p("d") + " --out " + p("free") + " --shots 5 --no-monitor --epochs 10").code, 0);
    const auto r = run("report " + p("mon"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("stopped_at="), std::string::npos);
    EXPECT_EQ(r.out.find("stopped_at=none"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("delta_max="), std::string::npos);
    EXPECT_NE(r.out.find("final_accuracy[fused]="), std::string::npos);
    EXPECT_TRUE(fs::exists(root / "mon" / "report.csv"));
    EXPECT_EQ(run("report " + p("mon")).code, 6);

    const auto c = run("report --compare " + p("mon") + " " + p("free") + " --out " + p("cmp.csv"));
    ASSERT_EQ(c.code, 0) << c.err;
    std::istringstream in(read_file(root / "cmp.csv"));
    std::string header, row;
    std::getline(in, header);
    EXPECT_NE(header.find("gap_diff"), std::string::npos);
    ASSERT_TRUE(std::getline(in, row));
    EXPECT_NE(row.back(), ',');  // epoch 1 exists in both runs
    EXPECT_EQ(data_rows(root / "cmp.csv"), 10u);
}

TEST_F(Cli, ReportMissingCurvesNamesPath) {
    fs::create_directories(root / "empty");
    const auto r = run("report " + p("empty"));
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find((root / "empty" / "curves.csv").string()), std::string::npos) << r.err;
}

TEST_F(Cli, EvalAndProbe) {
    synth("d");
    ASSERT_EQ(run("train --data " + p("d") + " --out " + p("r") + " --shots 3 --epochs 3").code, 0);
    const auto e = run("eval --data " + p("d") + " --params " + p("r/params.json") + " --shots 3 --mode both --seeds 0,1 --out " + p("ev"));
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_EQ(data_rows(root / "ev" / "results.csv"), 4u);
    EXPECT_EQ(data_rows(root / "ev" / "summary.csv"), 2u);
    EXPECT_EQ(run("eval --data " + p("d") + " --params " + p("r/params.json") + " --mode fused").code, 2);

    const auto pr = run("probe --data " + p("d") + " --params " + p("r/params.json") + " --shots 3 --out " + p("probe.json"));
    ASSERT_EQ(pr.code, 0) << pr.err;
    const auto j = nlohmann::json::parse(read_file(root / "probe.json"));
    EXPECT_EQ(j["classifier"]["cols"].get<int>(), 3);
    EXPECT_TRUE(j.contains("perp_norm_fraction"));
    EXPECT_EQ(run("probe --data " + p("d") + " --params " + p("r/params.json") + " --out " + p("probe.json")).code, 6);
    EXPECT_EQ(run("eval --data " + p("d") + " --params " + p("nope.json")).code, 3);
}
