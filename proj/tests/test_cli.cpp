#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include <incomever/text.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kCli = INCV_CLI;
const std::string kData = INCV_DATA_DIR;

struct Result {
    int code = -1;
    std::string out;
};

Result run(const std::string& args) {
    Result r;
    FILE* p = popen((kCli + " " + args + " 2>/dev/null").c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Small run config rooted in a scratch directory; shared tables come from data/.
class CliTest : public ::testing::Test {
protected:
    static inline fs::path root;
    static inline fs::path config;

    static void SetUpTestSuite() {
        root = fs::temp_directory_path() / ("incv-cli-test-" + std::to_string(getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
        auto j = json::parse(slurp(fs::path(INCV_CONFIG_DIR) / "smoke.json"));
        j["out_dir"] = (root / "out").string();
        j["paths"]["data_dir"] = (root / "data").string();
        for (const auto* k : {"alias_table", "industry_table"}) j["paths"][k] = kData + "/" + k + ".csv";
        for (const auto* k : {"patterns", "path_specs"}) j["paths"][k] = kData + "/" + k + ".json";
        config = root / "config.json";
        std::ofstream(config) << j.dump(2);
        ASSERT_EQ(run("synth --config " + q(config)).code, 0);
    }

    static void TearDownTestSuite() { fs::remove_all(root); }

    static std::string cfg() { return "--config " + q(config); }
};

}  // namespace

TEST_F(CliTest, SynthIsByteReproducible) {
    const auto a = root / "synth-a", b = root / "synth-b";
    ASSERT_EQ(run("synth " + cfg() + " --seed 42 --out-dir " + q(a)).code, 0);
    ASSERT_EQ(run("synth " + cfg() + " --seed 42 --out-dir " + q(b)).code, 0);
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        ++files;
        const auto rel = fs::relative(e.path(), a);
        EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
    }
    EXPECT_GE(files, 8u);
    EXPECT_TRUE(fs::exists(a / "synth_manifest.json"));
    ASSERT_EQ(run("synth " + cfg() + " --seed 43 --out-dir " + q(b)).code, 0);
    EXPECT_NE(slurp(a / "train.csv"), slurp(b / "train.csv"));
}

TEST_F(CliTest, TrainPredictVerify) {
    const auto out = root / "tpv";
    const auto data = root / "data";
    const std::string before = slurp(data / "train.csv");
    ASSERT_EQ(run("train " + cfg() + " --variant bow_gbt --out-dir " + q(out)).code, 0);
    EXPECT_EQ(slurp(data / "train.csv"), before);
    ASSERT_TRUE(fs::exists(out / "model.json"));
    const auto manifest = json::parse(slurp(out / "train_manifest.json"));
    EXPECT_EQ(manifest.at("command"), "train");
    EXPECT_TRUE(manifest.at("inputs").contains("train"));

    const auto person = kData + "/fixtures/person.json";
    const auto p1 = run("predict " + cfg() + " --model " + q(out / "model.json") + " --input " + q(person));
    const auto p2 = run("predict " + cfg() + " --model " + q(out / "model.json") + " --input " + q(person));
    ASSERT_EQ(p1.code, 0);
    EXPECT_EQ(p1.out, p2.out);
    const double predicted = json::parse(p1.out).at("predicted_income").get<double>();
    EXPECT_GT(predicted, 0.0);

    auto id = json::parse(slurp(person));
    id["stated_income"] = predicted;
    const auto same = root / "same.json";
    std::ofstream(same) << id.dump();
    const auto v = run("verify " + cfg() + " --model " + q(out / "model.json") + " --input " + q(same) + " --tau 0");
    ASSERT_EQ(v.code, 0);
    EXPECT_TRUE(json::parse(v.out).at("verified").get<bool>());

    id["stated_income"] = 2.0 * predicted;
    std::ofstream(same) << id.dump();
    const auto v2 = run("verify " + cfg() + " --model " + q(out / "model.json") + " --input " + q(same));
    ASSERT_EQ(v2.code, 0);
    EXPECT_FALSE(json::parse(v2.out).at("verified").get<bool>());
}

TEST_F(CliTest, EvaluateWritesReport) {
    const auto out = root / "eval";
    const auto r = run("evaluate " + cfg() + " --variant bow_gbt --no-cv --out-dir " + q(out));
    ASSERT_EQ(r.code, 0);
    const auto csv = slurp(out / "evaluation.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "Model,CV MAE,Test Set MAE,Test Set MRE");
    EXPECT_TRUE(fs::exists(out / "verification.csv"));
    EXPECT_TRUE(fs::exists(out / "evaluate_manifest.json"));
}

TEST_F(CliTest, ExitCodes) {
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
    EXPECT_EQ(run("train " + cfg() + " --bogus-flag").code, 1);
    EXPECT_EQ(run("train --config " + q(root / "missing.json")).code, 1);
    EXPECT_EQ(run("train " + cfg() + " --variant svm").code, 1);
    EXPECT_EQ(run("predict " + cfg() + " --model " + q(root / "config.json") + " --input " + q(kData + "/fixtures/person.json")).code, 1);
    const auto blocker = root / "blocker";
    std::ofstream(blocker) << "x";
    EXPECT_EQ(run("train " + cfg() + " --variant bow_gbt --out-dir " + q(blocker / "sub")).code, 2);
}
