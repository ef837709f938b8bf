#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "hopac/cli.hpp"
#include "hopac/io.hpp"
#include "support.hpp"

namespace hopac {
namespace {

namespace fs = std::filesystem;

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "hopac");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("hopac_cli_" + std::string(
                                                ::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        write_text_file(dir_ / "tree.json", to_json(test::four_leaf_clayton()).dump());
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

TEST_F(Cli, ValidateConformingTree) {
    const Outcome r = run({"validate", "--model", path("tree.json")});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "valid\n");
}

TEST_F(Cli, ValidateReportsViolation) {
    const TreeShape shape(3, {{4, {1, 2}}, {5, {3, 4}}});
    const HacTree bad(shape, {Generator(Family::C, 2.0, 1.0), Generator(Family::C, 1.0, 1.5)});
    write_text_file(dir_ / "bad.json", to_json(bad).dump());
    const Outcome r = run({"validate", "--model", path("bad.json")});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.out.rfind("violation: fork 5 -> 4", 0), 0u) << r.out;
}

TEST_F(Cli, SampleFitRoundTrip) {
    ASSERT_EQ(run({"sample", "--model", path("tree.json"), "--n", "500", "--out", path("s.csv"), "--seed", "3"}).code,
              0);
    const Matrix s = read_matrix_csv(path("s.csv"));
    EXPECT_EQ(s.rows(), 500u);
    EXPECT_EQ(s.cols(), 4u);
    for (const char* est : {"td-ml", "td-sn", "bu-ml", "opac", "hac"}) {
        const Outcome r = run({"fit", "--data", path("s.csv"), "--family", "C", "--estimator", est, "--out", path("f.json")});
        ASSERT_EQ(r.code, 0) << est << r.err;
        const auto j = nlohmann::json::parse(read_text_file(path("f.json")));
        EXPECT_EQ(j.at("forks").size(), 3u) << est;
        EXPECT_EQ(j.at("estimator"), estimator_tag(parse_estimator(est)));
    }
}

TEST_F(Cli, TailgridMarksClaytonPoint) {
    ASSERT_EQ(run({"tailgrid", "--family", "C", "--grid", "10", "--out", path("g.csv")}).code, 0);
    std::istringstream in(read_text_file(path("g.csv")));
    std::string line;
    bool found = false;
    while (std::getline(in, line)) {
        if (line.rfind("0.3,0.3,", 0) == 0) {
            found = true;
            EXPECT_EQ(line.substr(8, 2), "1,");
            const double beta = std::stod(line.substr(line.rfind(',') + 1));
            EXPECT_NEAR(beta, 1.3063, 1e-4);
        }
    }
    EXPECT_TRUE(found);
}

TEST_F(Cli, ByteIdenticalReruns) {
    for (const char* name : {"a.csv", "b.csv"}) {
        ASSERT_EQ(run({"sample", "--model", path("tree.json"), "--n", "200", "--out", path(name), "--seed", "9",
                       "--jobs", "2"})
                      .code,
                  0);
    }
    EXPECT_EQ(read_text_file(path("a.csv")), read_text_file(path("b.csv")));
    for (const char* name : {"fa.json", "fb.json"}) {
        ASSERT_EQ(run({"fit", "--data", path("a.csv"), "--out", path(name)}).code, 0);
    }
    EXPECT_EQ(read_text_file(path("fa.json")), read_text_file(path("fb.json")));
}

TEST_F(Cli, SimstudyAndBacktestWriteOutputs) {
    write_text_file(dir_ / "cfg.json",
                    R"({"families": ["C"], "dims": [3], "sample_sizes": [100], "repetitions": 1,
                        "estimators": ["td-ml"], "retry_cap": 50})");
    const Outcome s = run({"simstudy", "--config", path("cfg.json"), "--out", path("study")});
    ASSERT_EQ(s.code, 0) << s.err;
    EXPECT_TRUE(fs::exists(dir_ / "study" / "summary.csv"));

    std::ostringstream csv;
    csv << "date,A,B,C\n";
    RngStream rng(4);
    double p[3] = {100, 50, 20};
    for (int t = 0; t < 140; ++t) {
        csv << "d" << t;
        const double common = 0.01 * rng.normal();
        for (double& x : p) {
            x *= std::exp(common + 0.01 * rng.normal());
            csv << ',' << format_double(x);
        }
        csv << '\n';
    }
    write_text_file(dir_ / "p.csv", csv.str());
    const Outcome b = run({"var-backtest", "--prices", path("p.csv"), "--model", "independence,hopac", "--alpha",
                       "0.95,0.99", "--window", "126", "--simulations", "200", "--out", path("bt")});
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_TRUE(fs::exists(dir_ / "bt" / "hopac_a0.99_w126.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "bt" / "summary.json"));
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"bogus"}).code, 2);
    EXPECT_EQ(run({"validate", "--model", path("tree.json"), "--unknown"}).code, 2);
    EXPECT_EQ(run({"fit", "--data", path("x.csv"), "--family", "Q", "--out", path("f.json")}).code, 2);
    EXPECT_EQ(run({"tailgrid", "--family", "G", "--out", path("g.csv")}).code, 2);
    EXPECT_EQ(run({"var-backtest", "--prices", path("p.csv"), "--window", "100", "--out", path("o")}).code, 2);
    EXPECT_EQ(run({"validate", "--model", path("missing.json")}).code, 1);
    const Outcome help = run({"sample", "--help"});
    EXPECT_EQ(help.code, 0);
    EXPECT_NE(help.out.find("--model"), std::string::npos);
}

}  // namespace
}  // namespace hopac
