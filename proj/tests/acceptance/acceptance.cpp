#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sys/wait.h>
#include <sstream>
#include <unistd.h>

#include <incomever/cli.hpp>

#include "../support/oracles.hpp"
#include "../support/samples.hpp"

using namespace incv;
namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

std::set<int> failed;

void report(int n, bool ok, const std::string& name, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " [" << n << "] " << name << ": " << detail << std::endl;
    if (!ok) failed.insert(n);
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double x, int prec = 3) {
    std::ostringstream o;
    o.precision(prec);
    o << std::fixed << x;
    return o.str();
}

std::string slurp(const fs::path& p) { return csv::read_file(p.string()); }

// ---------------------------------------------------------------------------

void gradients() {
    const auto t = Clock::now();
    const auto ffn = samples::ffn_gradient_errors(20, 2024);
    const auto lstm = samples::lstm_gradient_errors(20, 77);
    const double secs = seconds_since(t);
    const double worst_ffn = *std::max_element(ffn.begin(), ffn.end());
    const double worst_lstm = *std::max_element(lstm.begin(), lstm.end());
    report(1, worst_ffn < 1e-4 && worst_lstm < 1e-4 && secs < 60.0, "gradient oracle",
           "max rel err FFN " + std::to_string(worst_ffn) + ", LSTM " + std::to_string(worst_lstm) + " over 20 instances each, " +
               fmt(secs) + " s");
}

void gbt_oracle() {
    std::size_t mismatches = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const auto n = 2 + rng.below(29);
        const auto d = 1 + rng.below(4);
        std::vector<std::vector<double>> rows(n, std::vector<double>(d));
        std::vector<double> y(n);
        Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t f = 0; f < d; ++f) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = rows[i][f] = rng.uniform(0, 10);
            y[i] = rng.uniform(0, 1000);
        }
        const auto e = learners::gbt_train(X, y, {1, 1, 1.0, 1});
        const auto best = oracle::best_regression_split(rows, y);
        bool ok = best ? e.trees.size() == 1 && e.trees[0].nodes[0].feature == best->feature &&
                             e.trees[0].nodes[0].threshold == best->threshold
                       : e.trees.empty();
        if (ok && best)
            for (std::size_t i = 0; i < n; ++i) {
                const double want = rows[i][static_cast<std::size_t>(best->feature)] <= best->threshold ? best->left_mean : best->right_mean;
                ok = ok && std::abs(e.raw(rows[i]) - want) <= 1e-9 * std::max(1.0, std::abs(want));
            }
        mismatches += !ok;
    }
    Rng rng(5);
    const Eigen::MatrixXd X = samples::normal_matrix(rng, 200, 4);
    std::vector<double> y;
    for (Eigen::Index i = 0; i < 200; ++i) y.push_back(100.0 + 30.0 * X(i, 0) - 10.0 * X(i, 1) * X(i, 2) + 5.0 * rng.normal());
    double mean = 0.0;
    for (double v : y) mean += v / static_cast<double>(y.size());
    learners::GbtTrace trace{0.0};
    for (double v : y) trace[0] += (v - mean) * (v - mean) / static_cast<double>(y.size());
    learners::gbt_train(X, y, {50, 3, 0.1, 1}, &trace);
    std::size_t increases = 0;
    for (std::size_t r = 1; r < trace.size(); ++r) increases += trace[r] > trace[r - 1];
    report(2, mismatches == 0 && increases == 0 && trace.size() == 51, "GBT oracle",
           std::to_string(100 - mismatches) + "/100 seeds match the exhaustive split; " + std::to_string(increases) +
               " MSE increases over " + std::to_string(trace.size() - 1) + " rounds at eta 0.1");
}

void levenshtein_oracle() {
    const auto strings = oracle::all_strings("abc", 6);
    std::size_t pairs = 0, bad = 0;
    for (const auto& a : strings) {
        const auto dist = oracle::edit_bfs(a, "abc", 6);
        for (const auto& b : strings) {
            ++pairs;
            bad += text::levenshtein(a, b) != static_cast<std::size_t>(dist.at(b));
        }
    }
    report(3, bad == 0, "Levenshtein oracle", std::to_string(pairs - bad) + "/" + std::to_string(pairs) + " pairs agree");
}

void buckets() {
    bool ok = true;
    int last = 0;
    for (int i = 0; i <= 10000; ++i) {
        const double s = i / 10000.0;
        const auto b = static_cast<int>(match::bucket_of(s));
        ok = ok && b >= last && ((s > 0.8) == (match::bucket_of(s) == match::Bucket::high));
        last = b;
    }
    report(5, ok, "match bucketing", "10001-point sweep, high iff score > 0.8, monotone");
}

void canonicalization(const canon::AliasTable& t) {
    using canon::Kind;
    const std::vector<std::tuple<std::string, Kind, std::string>> rows = {
        {"U.S.P.S", Kind::employer, "United States Postal Service"}, {"U.S. Postal Service", Kind::employer, "United States Postal Service"},
        {"GE", Kind::employer, "General Electric"},                 {"G.E", Kind::employer, "General Electric"},
        {"Acc. Manager", Kind::title, "Account Manager"},           {"Sr. Manager", Kind::title, "Senior Manager"},
        {"Snr. Manager", Kind::title, "Senior Manager"}};
    std::size_t exact = 0;
    for (const auto& [raw, kind, want] : rows) exact += canon::canonicalize(raw, kind, t) == want;
    Rng rng(17);
    std::size_t stable = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto s = samples::alias_text(rng);
        bool ok = true;
        for (auto k : {Kind::employer, Kind::title}) {
            const auto once = canon::canonicalize(s, k, t);
            ok = ok && canon::canonicalize(once, k, t) == once;
        }
        stable += ok;
    }
    report(6, exact == rows.size() && stable == 10000, "canonicalization",
           std::to_string(exact) + "/7 Table 4 rows exact; idempotent on " + std::to_string(stable) + "/10000 random strings");
}

void query_templates() {
    const auto q = retrieval::build_queries("XYZ Company", "Software Engineer", std::string("Travel"));
    const bool ok = q.size() == 3 && q[0].text == "XYZ Company Software Engineer Salary" && q[1].text == "Software Engineer Salary" &&
                    q[2].text == "Travel Software Engineer Salary";
    std::string got;
    for (const auto& x : q) got += (got.empty() ? "" : " | ") + x.text;
    report(7, ok, "query templates", got);
}

void moments(const datagen::SynthConfig& base) {
    auto c = base;
    c.n_rows = 3108;
    const auto s = datagen::generate_synthetic(c);
    const auto st = dataset_stats(datagen::true_incomes(s.train));
    const double dm = std::abs(st.mean - 77571.760) / 77571.760, ds = std::abs(st.stddev - 57979.323) / 57979.323;
    report(8, st.size == 3108 && dm < 0.02 && ds < 0.05, "synthetic moments",
           "n " + std::to_string(st.size) + ", mean " + fmt(st.mean) + " (" + fmt(100 * dm, 2) + "%), sd " + fmt(st.stddev) + " (" +
               fmt(100 * ds, 2) + "%)");
}

// ---------------------------------------------------------------------------
// Shipped benchmark: synthesised to disk and read back through the CLI loaders.

struct Bench {
    cli::RunConfig cfg;
    datagen::Dataset train, test;
    std::vector<datagen::TextRow> outside;
    std::optional<pipeline::ExternalContext> ctx;
    std::optional<match::PairDecisionTree> matcher;
    std::optional<pipeline::Benchmark> bench;
    std::size_t corpus_records = 0;
    double setup_seconds = 0.0;
};

Bench load_benchmark(const fs::path& dir) {
    const auto t = Clock::now();
    Bench b;
    b.cfg = cli::RunConfig::load(std::string(INCV_CONFIG_DIR) + "/benchmark.json");
    b.cfg.paths.data_dir = dir.string();
    b.cfg.pipeline.threads = 1;
    datagen::write_synthetic(datagen::generate_synthetic(b.cfg.synth), dir.string());
    cli::Manifest m("acceptance");
    b.train = cli::load_dataset(b.cfg, m, "train");
    b.test = cli::load_dataset(b.cfg, m, "test");
    b.outside = cli::load_outside(b.cfg, m, false);
    b.ctx.emplace(cli::load_context(b.cfg, m, ""));
    b.corpus_records = b.ctx->records().size();
    b.matcher = cli::obtain_matcher(b.cfg, m, *b.ctx, b.train);
    b.bench.emplace(b.train, b.test, *b.ctx, *b.matcher, b.outside, b.cfg.pipeline);
    b.setup_seconds = seconds_since(t);
    return b;
}

void end_to_end(const Bench& b) {
    const auto t = Clock::now();
    const auto internal = b.bench->internal_score(b.cfg.pipeline.combined.internal, b.cfg.cv);
    const auto external = b.bench->external_score(b.cfg.cv);
    const auto combined = b.bench->combined_score(b.cfg.cv);
    const double secs = b.setup_seconds + seconds_since(t);
    report(9, combined.test_mae < internal.test_mae && combined.test_mae < external.test_mae && secs < 600.0, "end-to-end ordering",
           "test MAE combined " + fmt(combined.test_mae) + " < internal " + fmt(internal.test_mae) + " and external " +
               fmt(external.test_mae) + "; " + std::to_string(b.train.size()) + " train rows, " + std::to_string(b.corpus_records) +
               " corpus records, " + fmt(secs, 1) + " s with " + (b.cfg.cv ? "" : "no ") + "CV");
}

void source_ablation(const Bench& b) {
    const auto rows = b.bench->ablate(pipeline::Study::sources_count, false);
    const double m1 = rows[0].test_mae, m4 = rows[3].test_mae, m5 = rows[4].test_mae;
    const double rel = std::abs(m5 - m4) / m4;
    report(10, m1 > m4 && rel < 0.02, "source-count ablation",
           "MAE(1) " + fmt(m1) + " > MAE(4) " + fmt(m4) + "; |MAE(5) - MAE(4)| / MAE(4) = " + fmt(100 * rel, 2) + "%");
}

void salary_ablation(const Bench& b) {
    const auto rows = b.bench->ablate(pipeline::Study::salary_features, false);
    const double all = rows[0].test_mae, low = rows[1].test_mae, med = rows[2].test_mae, high = rows[3].test_mae;
    report(11, med > low && med > high, "salary-feature ablation",
           "all " + fmt(all) + ", -low " + fmt(low) + ", -median " + fmt(med) + ", -high " + fmt(high));
}

void input_ablation(const Bench& b) {
    const auto rows = b.bench->ablate(pipeline::Study::input_features, false);
    const double title = rows[1].test_mae;
    const bool ok = title > rows[2].test_mae && title > rows[3].test_mae && title > rows[4].test_mae;
    report(12, ok, "input-feature ablation",
           "all " + fmt(rows[0].test_mae) + ", -title " + fmt(title) + ", -employer " + fmt(rows[2].test_mae) + ", -state " +
               fmt(rows[3].test_mae) + ", -city " + fmt(rows[4].test_mae));
}

Identity mutated(Identity id, Rng& rng) {
    static const std::array<const char*, 6> firsts = {"Avery", "Jordan", "Quinn", "Rowan", "Sage", "Emery"};
    static const std::array<const char*, 6> lasts = {"Okafor", "Lindqvist", "Moreau", "Tanaka", "Alvarez", "Novak"};
    id.name = PersonName{firsts[rng.below(firsts.size())], std::nullopt, lasts[rng.below(lasts.size())]};
    id.dob = Date::parse("19" + std::to_string(40 + rng.below(60)) + "-0" + std::to_string(1 + rng.below(9)) + "-1" +
                         std::to_string(rng.below(10)));
    id.address.street = std::to_string(1 + rng.below(9999)) + " Elsewhere Ave";
    return id;
}

void redaction(const Bench& b) {
    // Internal: the BOW and mean-vector featurizations of every test identity.
    auto icfg = b.cfg.pipeline.internal;
    icfg.bow_gbt.rounds = 1;
    icfg.mean_ffn.epochs = 1;
    const auto bow = pipeline::train_internal(b.bench->train(), pipeline::Variant::bow_gbt, icfg, 1);
    const auto wv = pipeline::train_internal(b.bench->train(), pipeline::Variant::mean_wv_nn, icfg, 1);
    // External: every test identity through retrieval, matching and assembly.
    const auto ratios = b.ctx->ratio_table();
    Rng rng(13);
    std::size_t internal_changed = 0, external_changed = 0, score_only = 0, n = 0;
    for (const auto& e : b.bench->test()) {
        ++n;
        const auto m = mutated(e.identity, rng);
        internal_changed += bow.features(e.identity) != bow.features(m) || wv.features(e.identity) != wv.features(m);
        const auto v0 = pipeline::external_features(*b.ctx, e.identity, *b.matcher, ratios);
        const auto v1 = pipeline::external_features(*b.ctx, m, *b.matcher, ratios);
        bool non_score = false, any = false;
        for (std::size_t i = 0; i < extfeat::kExternalDim; ++i) {
            if (v0[i] == v1[i]) continue;
            any = true;
            bool is_score = false;
            for (std::size_t slot = 0; slot < extfeat::kSources; ++slot) is_score = is_score || i == extfeat::score_index(slot);
            non_score = non_score || !is_score;
        }
        external_changed += non_score;
        score_only += any && !non_score;
    }
    report(13, internal_changed == 0 && external_changed == 0, "redaction invariant",
           std::to_string(n) + " test identities with name/dob/street mutated: internal features changed for " +
               std::to_string(internal_changed) + "; external salary coordinates changed for " + std::to_string(external_changed) +
               " (re-ranked sources), score coordinates only for " + std::to_string(score_only));
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& args) {
    const int st = std::system((std::string(INCV_CLI) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

void determinism(const fs::path& scratch) {
    auto j = json::parse(slurp(fs::path(INCV_CONFIG_DIR) / "smoke.json"));
    for (const auto* k : {"alias_table", "industry_table"}) j["paths"][k] = std::string(INCV_DATA_DIR) + "/" + k + ".csv";
    for (const auto* k : {"patterns", "path_specs"}) j["paths"][k] = std::string(INCV_DATA_DIR) + "/" + k + ".json";
    std::vector<std::map<std::string, std::string>> runs;
    int bad_exit = 0;
    const auto root = scratch / "run";
    j["paths"]["data_dir"] = (root / "data").string();
    j["out_dir"] = (root / "out").string();
    for (int r = 0; r < 2; ++r) {
        fs::remove_all(root);
        fs::create_directories(root);
        const auto cfg = root / "config.json";
        csv::write_file(cfg.string(), j.dump(2));
        const std::string c = "--config '" + cfg.string() + "' --seed 42";
        bad_exit += run_cli("synth " + c) != 0;
        bad_exit += run_cli("train " + c + " --variant combined") != 0;
        bad_exit += run_cli("evaluate " + c + " --variant all") != 0;
        auto files = tree(root / "data");
        for (auto& [k, v] : tree(root / "out")) files["out/" + k] = std::move(v);
        runs.push_back(std::move(files));
    }
    std::size_t differing = 0;
    for (const auto& [name, content] : runs[0]) {
        auto it = runs[1].find(name);
        differing += it == runs[1].end() || it->second != content;
    }
    const bool ok = bad_exit == 0 && differing == 0 && runs[0].size() == runs[1].size() && runs[0].size() >= 10;
    report(14, ok, "determinism",
           std::to_string(runs[0].size()) + " files from synth, train and evaluate; " + std::to_string(differing) +
               " differ across two invocations; " + std::to_string(bad_exit) + " non-zero exits");
}

void schema(const Bench& b) {
    auto icfg = b.cfg.pipeline.internal;
    icfg.bow_gbt.rounds = 1;
    icfg.mean_ffn.epochs = 1;
    const auto bow = pipeline::train_internal(b.bench->train(), pipeline::Variant::bow_gbt, icfg, 1);
    const auto wv = pipeline::train_internal(b.bench->train(), pipeline::Variant::mean_wv_nn, icfg, 1);
    std::size_t n = 0, bad = 0;
    for (const auto* ds : {&b.bench->train(), &b.bench->test()})
        for (const auto& e : *ds) {
            ++n;
            bad += bow.features(e.identity).size() != 402 || wv.features(e.identity).size() != 650;
        }
    const auto d = b.bench->external_design({}, 5);
    std::size_t ext = 0;
    for (const auto* xs : {&d.train_x, &d.test_x})
        for (const auto& v : *xs) {
            ++ext;
            bad += v.size() != 35;
        }
    report(4, bad == 0, "feature schema",
           std::to_string(n) + " BOW (402) and mean-WV (650) inputs, " + std::to_string(ext) + " external vectors (35); " +
               std::to_string(bad) + " off-schema");
}

}  // namespace

// --expect-fail N (repeatable) declares known failures: the exit status is 0
// only when the failing set is exactly the declared set.
int main(int argc, char** argv) {
    std::set<int> expected;
    for (int i = 1; i + 1 < argc; i += 2)
        if (std::string(argv[i]) == "--expect-fail") expected.insert(std::stoi(argv[i + 1]));
    const auto scratch = fs::temp_directory_path() / ("incv-acceptance-" + std::to_string(getpid()));
    fs::remove_all(scratch);
    fs::create_directories(scratch);
    try {
        gradients();
        gbt_oracle();
        levenshtein_oracle();
        const auto bench = load_benchmark(scratch / "bench");
        schema(bench);
        buckets();
        canonicalization(canon::AliasTable::load(std::string(INCV_DATA_DIR) + "/alias_table.csv"));
        query_templates();
        moments(bench.cfg.synth);
        end_to_end(bench);
        source_ablation(bench);
        salary_ablation(bench);
        input_ablation(bench);
        redaction(bench);
        determinism(scratch / "determinism");
    } catch (const std::exception& e) {
        std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
        failed.insert(0);
    }
    fs::remove_all(scratch);
    auto list = [](const std::set<int>& s) {
        std::string out;
        for (int n : s) out += (out.empty() ? "" : ",") + std::to_string(n);
        return out.empty() ? std::string("none") : out;
    };
    std::cout << (14 - failed.size()) << "/14 criteria passed; failed: " << list(failed) << "; declared known failures: " << list(expected)
              << std::endl;
    return failed == expected ? 0 : 1;
}
