#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "core.hpp"
#include "datagen.hpp"
#include "pipeline.hpp"
#include "text.hpp"

namespace incv::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

inline constexpr std::array<std::string_view, 6> kModelVariants = {"bow_gbt",        "mean_wv_nn",   "external_wv_nn",
                                                                  "tuned_wv_nn",    "external_gbt", "combined"};

struct Paths {
    std::string data_dir;
    std::string train, test, corpus, match_labels, external_text;
    std::string alias_table, industry_table, patterns, path_specs;
    std::string matcher, model, index, column_map;
};

/// Run configuration: a JSON file plus flag overrides. Relative paths resolve
/// against the config file's directory.
struct RunConfig {
    fs::path base = ".";
    Paths paths;
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    std::string variant = "combined";
    datagen::SynthConfig synth;
    pipeline::PipelineConfig pipeline;
    bool cv = true;
    std::vector<std::string> studies = {"sources_count", "input_features", "salary_features"};
    std::size_t sample_n = 0;  // 0 = keep every ingested row
    std::uint64_t sample_seed = 1;
    double test_fraction = 0.25;

    std::string resolve(const std::string& p) const {
        if (p.empty()) return p;
        const fs::path q(p);
        return q.is_absolute() ? q.string() : (base / q).lexically_normal().string();
    }

    /// Path of a data file: the explicit entry, else data_dir/default_name.
    std::string data_file(const std::string& explicit_path, const std::string& default_name) const {
        if (!explicit_path.empty()) return resolve(explicit_path);
        if (paths.data_dir.empty()) return "";
        return resolve((fs::path(paths.data_dir) / default_name).string());
    }

    static RunConfig from_json(const json& j, fs::path base) {
        RunConfig c;
        c.base = std::move(base);
        try {
            c.seed = j.value("seed", c.seed);
            c.out_dir = j.value("out_dir", c.out_dir);
            c.variant = j.value("variant", c.variant);
            c.cv = j.value("cv", c.cv);
            c.studies = j.value("studies", c.studies);
            c.sample_n = j.value("sample_n", c.sample_n);
            c.sample_seed = j.value("sample_seed", c.sample_seed);
            c.test_fraction = j.value("test_fraction", c.test_fraction);
            if (j.contains("paths")) {
                const auto& p = j.at("paths");
                auto get = [&](const char* k, std::string& dst) { dst = p.value(k, dst); };
                get("data_dir", c.paths.data_dir);
                get("train", c.paths.train);
                get("test", c.paths.test);
                get("corpus", c.paths.corpus);
                get("match_labels", c.paths.match_labels);
                get("external_text", c.paths.external_text);
                get("alias_table", c.paths.alias_table);
                get("industry_table", c.paths.industry_table);
                get("patterns", c.paths.patterns);
                get("path_specs", c.paths.path_specs);
                get("matcher", c.paths.matcher);
                get("model", c.paths.model);
                get("index", c.paths.index);
                get("column_map", c.paths.column_map);
            }
            if (j.contains("synth")) c.synth = datagen::SynthConfig::from_json(j.at("synth"));
            if (j.contains("pipeline")) c.pipeline = pipeline::PipelineConfig::from_json(j.at("pipeline"));
        } catch (const json::exception& e) {
            throw ConfigError(std::string("run config: ") + e.what());
        }
        if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw ConfigError("run config: test_fraction must be in (0,1)");
        return c;
    }

    static RunConfig load(const std::string& path) {
        if (!fs::exists(path)) throw ConfigError("config file '" + path + "' does not exist");
        json j;
        try {
            j = json::parse(csv::read_file(path));
        } catch (const json::parse_error& e) {
            throw ConfigError("config file '" + path + "': " + e.what());
        }
        return from_json(j, fs::path(path).parent_path());
    }

    /// Seeds follow the single top-level seed.
    void apply_seed(std::uint64_t s) {
        seed = s;
        synth.seed = s;
        pipeline.seed = s;
    }

    json to_json() const {
        json p = json::object();
        auto put = [&](const char* k, const std::string& v) {
            if (!v.empty()) p[k] = v;
        };
        put("data_dir", paths.data_dir);
        put("train", paths.train);
        put("test", paths.test);
        put("corpus", paths.corpus);
        put("match_labels", paths.match_labels);
        put("external_text", paths.external_text);
        put("alias_table", paths.alias_table);
        put("industry_table", paths.industry_table);
        put("patterns", paths.patterns);
        put("path_specs", paths.path_specs);
        put("matcher", paths.matcher);
        put("model", paths.model);
        put("index", paths.index);
        put("column_map", paths.column_map);
        return {{"seed", seed},       {"variant", variant}, {"cv", cv},
                {"studies", studies}, {"sample_n", sample_n}, {"sample_seed", sample_seed},
                {"test_fraction", test_fraction}, {"paths", p}, {"synth", synth.to_json()}, {"pipeline", pipeline.to_json()}};
    }
};

/// Records what a run read and wrote. Input paths are kept as configured and
/// outputs relative to the output directory, so reruns match byte for byte.
class Manifest {
public:
    explicit Manifest(std::string command) : command_(std::move(command)) {}

    void input(const std::string& label, const std::string& path) {
        if (path.empty()) return;
        std::uint64_t h = text::fnv1a("");
        if (fs::is_directory(path)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(path))
                if (e.is_regular_file()) files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) {
                h = text::fnv1a(f.filename().string(), h);
                h = text::fnv1a(csv::read_file(f.string()), h);
            }
        } else if (fs::exists(path)) {
            h = text::fnv1a(csv::read_file(path));
        }
        inputs_[label] = text::hex64(h);
    }

    void output(const std::string& name, const std::string& content) { outputs_[name] = text::hex64(text::fnv1a(content)); }
    void note(const std::string& key, json value) { notes_[key] = std::move(value); }

    json to_json(const RunConfig& cfg) const {
        return {{"format", "incomever-manifest"}, {"version", 1}, {"command", command_}, {"config", cfg.to_json()},
                {"seeds", {{"run", cfg.seed}, {"synth", cfg.synth.seed}, {"pipeline", cfg.pipeline.seed}}},
                {"inputs", inputs_}, {"outputs", outputs_}, {"notes", notes_}};
    }

private:
    std::string command_;
    std::map<std::string, std::string> inputs_, outputs_;
    json notes_ = json::object();
};

inline void write_output(const std::string& dir, const std::string& name, const std::string& content, Manifest& m) {
    fs::create_directories(fs::path(dir) / fs::path(name).parent_path());
    csv::write_file((fs::path(dir) / name).string(), content);
    m.output(name, content);
}

inline void write_manifest(const std::string& dir, const std::string& name, const Manifest& m, const RunConfig& cfg) {
    fs::create_directories(dir);
    csv::write_file((fs::path(dir) / name).string(), m.to_json(cfg).dump(2) + "\n");
}

inline std::string require_path(const std::string& p, const std::string& what) {
    if (p.empty()) throw ConfigError(what + " path is not configured");
    if (!fs::exists(p)) throw ConfigError(what + " '" + p + "' does not exist");
    return p;
}

// ---------------------------------------------------------------------------
// Shared loaders

struct Loaded {
    std::optional<pipeline::ExternalContext> ctx;
    std::vector<datagen::LoadIssue> corpus_errors;
};

inline canon::AliasTable load_aliases(const RunConfig& c, Manifest& m) {
    const auto p = require_path(c.data_file(c.paths.alias_table, "alias_table.csv"), "alias table");
    m.input("alias_table", p);
    return canon::AliasTable::load(p);
}

inline retrieval::IndustryTable load_industries(const RunConfig& c, Manifest& m) {
    const auto p = require_path(c.data_file(c.paths.industry_table, "industry_table.csv"), "industry table");
    m.input("industry_table", p);
    return retrieval::IndustryTable::load(p);
}

inline pipeline::ExternalContext load_context(const RunConfig& c, Manifest& m, const std::string& index_in) {
    const auto corpus_dir = require_path(c.data_file(c.paths.corpus, "corpus"), "corpus directory");
    m.input("corpus", corpus_dir);
    auto loaded = datagen::load_corpus(corpus_dir);
    if (!loaded.errors.empty()) {
        std::string msg = "corpus has " + std::to_string(loaded.errors.size()) + " malformed line(s); first: " +
                          loaded.errors.front().file + ":" + std::to_string(loaded.errors.front().line) + ": " +
                          loaded.errors.front().message;
        throw InputError(msg);
    }
    const auto specs_path = require_path(c.resolve(c.paths.path_specs), "path spec file");
    const auto pat_path = require_path(c.resolve(c.paths.patterns), "pattern file");
    m.input("path_specs", specs_path);
    m.input("patterns", pat_path);
    std::optional<retrieval::CorpusIndex> index;
    const auto idx_path = !index_in.empty() ? index_in : c.resolve(c.paths.index);
    if (!idx_path.empty()) {
        require_path(idx_path, "index file");
        m.input("index", idx_path);
        index = retrieval::CorpusIndex::from_json(json::parse(csv::read_file(idx_path)));
        if (index->size() != loaded.corpus.records.size())
            throw InputError("index '" + idx_path + "' covers " + std::to_string(index->size()) + " records but the corpus has " +
                             std::to_string(loaded.corpus.records.size()));
    }
    return pipeline::ExternalContext(loaded.corpus, load_aliases(c, m), load_industries(c, m), extract::PathSpecs::load(specs_path),
                                     extract::PatternSet::load(pat_path), c.pipeline.external.retrieval, std::move(index),
                                     c.pipeline.external.penalty);
}

inline datagen::Dataset load_dataset(const RunConfig& c, Manifest& m, const std::string& which) {
    const auto p = require_path(c.data_file(which == "train" ? c.paths.train : c.paths.test, which + ".csv"), which + " dataset");
    m.input(which, p);
    return datagen::read_dataset(p);
}

inline std::vector<datagen::MatchLabel> load_labels(const RunConfig& c, Manifest& m) {
    const auto p = require_path(c.data_file(c.paths.match_labels, "match_labels.csv"), "match labels");
    m.input("match_labels", p);
    return datagen::labels_from_csv(csv::read_file(p));
}

inline std::vector<datagen::TextRow> load_outside(const RunConfig& c, Manifest& m, bool required) {
    const auto p = c.data_file(c.paths.external_text, "external_text.csv");
    if (p.empty() || !fs::exists(p)) {
        if (required) require_path(p, "outside text corpus");
        return {};
    }
    m.input("external_text", p);
    return datagen::text_rows_from_csv(csv::read_file(p));
}

inline match::PairDecisionTree obtain_matcher(const RunConfig& c, Manifest& m, const pipeline::ExternalContext& ctx,
                                              const datagen::Dataset& train) {
    const auto p = c.resolve(c.paths.matcher);
    if (!p.empty()) {
        require_path(p, "matcher");
        m.input("matcher", p);
        return match::PairDecisionTree::from_json(json::parse(csv::read_file(p)));
    }
    return pipeline::train_matcher(ctx, train, load_labels(c, m), c.pipeline.external, Rng(c.seed).fork(300).next_u64());
}

inline bool is_model_variant(std::string_view v) {
    return std::find(kModelVariants.begin(), kModelVariants.end(), v) != kModelVariants.end();
}

inline bool needs_outside(std::string_view v) { return v == "external_wv_nn" || v == "tuned_wv_nn"; }

// ---------------------------------------------------------------------------
// Subcommands

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<double> tau;
    std::string variant;
    std::string alias_table;
    std::string index_in, index_out;
    std::string out_dir;
    std::size_t threads = 1;
    std::string input;
    std::string model;
    std::string study;
    std::optional<std::size_t> sample_n;
    std::optional<std::uint64_t> sample_seed;
    std::string column_map;
    bool no_cv = false;
};

inline RunConfig effective_config(const Flags& f) {
    RunConfig c = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
    // A config section may carry its own seeds; the top-level seed wins.
    c.apply_seed(f.seed.value_or(c.seed));
    if (f.tau) c.pipeline.tau = *f.tau;
    if (!f.variant.empty()) c.variant = f.variant;
    if (!f.alias_table.empty()) c.paths.alias_table = fs::absolute(f.alias_table).string();
    if (!f.out_dir.empty()) c.out_dir = f.out_dir;
    else c.out_dir = c.resolve(c.out_dir);
    if (!f.model.empty()) c.paths.model = fs::absolute(f.model).string();
    if (!f.column_map.empty()) c.paths.column_map = fs::absolute(f.column_map).string();
    if (f.sample_n) c.sample_n = *f.sample_n;
    if (f.sample_seed) c.sample_seed = *f.sample_seed;
    if (f.no_cv) c.cv = false;
    c.pipeline.threads = f.threads;
    c.pipeline.validate();
    return c;
}

inline int cmd_synth(const RunConfig& c, const Flags& flags) {
    Manifest m("synth");
    // Without --out-dir the data lands where the other subcommands look for it.
    const auto dir = flags.out_dir.empty() && !c.paths.data_dir.empty() ? c.resolve(c.paths.data_dir) : c.out_dir;
    const auto out = datagen::generate_synthetic(c.synth);
    const auto files = datagen::write_synthetic(out, dir);
    for (const auto& f : files) m.output(f, csv::read_file((fs::path(dir) / f).string()));
    const auto st = dataset_stats(datagen::true_incomes(out.train));
    m.note("train_stats", {{"n", st.size}, {"mean", st.mean}, {"stddev", st.stddev}, {"skew", st.skew}});
    m.note("corpus_records", out.corpus.records.size());
    write_manifest(dir, "synth_manifest.json", m, c);
    std::cout << "wrote " << files.size() << " files to " << dir << " (train mean " << st.mean << ", stddev " << st.stddev
              << ", corpus " << out.corpus.records.size() << " records)\n";
    return kExitOk;
}

inline int cmd_ingest(const RunConfig& c, const Flags& f) {
    Manifest m("ingest");
    const auto in = require_path(f.input.empty() ? "" : fs::absolute(f.input).string(), "H-1B input (--input)");
    const auto cmap_path = require_path(c.resolve(c.paths.column_map), "column map");
    m.input("hib_csv", f.input);
    m.input("column_map", cmap_path);
    auto res = datagen::ingest_hib(in, datagen::ColumnMap::load(cmap_path));
    if (res.examples.empty()) throw InputError("ingest: no usable rows in '" + f.input + "'");
    auto rows = c.sample_n ? datagen::sample_examples(res.examples, c.sample_n, c.sample_seed) : res.examples;
    // Seeded train/test split.
    std::vector<std::size_t> idx(rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(c.seed);
    rng.shuffle(idx);
    const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(c.test_fraction * static_cast<double>(rows.size()))));
    if (n_test >= rows.size()) throw InputError("ingest: too few rows to split");
    std::vector<std::size_t> test_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train_idx(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    write_output(c.out_dir, "train.csv", datagen::dataset_to_csv(pipeline::take(rows, train_idx)), m);
    write_output(c.out_dir, "test.csv", datagen::dataset_to_csv(pipeline::take(rows, test_idx)), m);
    json report = {{"data_rows", res.data_rows}, {"usable", res.examples.size()}, {"skipped", res.skipped},
                   {"skip_reasons", res.skip_reasons}, {"sampled", rows.size()}, {"train", train_idx.size()}, {"test", test_idx.size()}};
    write_output(c.out_dir, "ingest_report.json", report.dump(2) + "\n", m);
    write_manifest(c.out_dir, "ingest_manifest.json", m, c);
    std::cout << "ingested " << res.examples.size() << " of " << res.data_rows << " rows (" << res.skipped << " skipped)\n";
    return kExitOk;
}

inline int cmd_index(const RunConfig& c, const Flags& f) {
    Manifest m("index");
    const auto corpus_dir = require_path(c.data_file(c.paths.corpus, "corpus"), "corpus directory");
    m.input("corpus", corpus_dir);
    auto loaded = datagen::load_corpus(corpus_dir);
    for (const auto& e : loaded.errors) std::cerr << "warning: " << e.file << ":" << e.line << ": " << e.message << "\n";
    const auto idx = retrieval::CorpusIndex::build(loaded.corpus);
    const auto out = f.index_out.empty() ? (fs::path(c.out_dir) / "index.json").string() : f.index_out;
    const auto content = idx.to_json().dump() + "\n";
    fs::create_directories(fs::absolute(out).parent_path());
    csv::write_file(out, content);
    m.output(fs::path(out).filename().string(), content);
    m.note("documents", idx.size());
    m.note("malformed_lines", loaded.errors.size());
    write_manifest(fs::absolute(out).parent_path().string(), "index_manifest.json", m, c);
    std::cout << "indexed " << idx.size() << " records into " << out << "\n";
    return kExitOk;
}

inline int cmd_train_matcher(const RunConfig& c, const Flags& f) {
    Manifest m("train-matcher");
    const auto ctx = load_context(c, m, f.index_in);
    const auto train = load_dataset(c, m, "train");
    const auto labels = load_labels(c, m);
    const auto pairs = pipeline::matcher_training_pairs(ctx, train, labels, c.pipeline.external.matcher_pairs,
                                                        Rng(c.seed).fork(300).next_u64());
    if (pairs.empty()) throw InputError("train-matcher: no usable labeled pairs");
    const auto tree = match::train_matcher(pairs, c.pipeline.external.matcher);
    write_output(c.out_dir, "matcher.json", tree.to_json().dump(2) + "\n", m);
    m.note("pairs", pairs.size());
    write_manifest(c.out_dir, "train_matcher_manifest.json", m, c);
    std::cout << "trained matcher on " << pairs.size() << " pairs (depth " << tree.depth() << ")\n";
    return kExitOk;
}

inline int cmd_train(const RunConfig& c, const Flags& f) {
    if (!is_model_variant(c.variant)) throw ConfigError("unknown variant '" + c.variant + "'");
    Manifest m("train");
    const auto train = load_dataset(c, m, "train");
    const auto model_seed = Rng(c.seed).fork(400).next_u64();
    json model;
    if (c.variant != "external_gbt" && c.variant != "combined") {
        const auto outside = load_outside(c, m, needs_outside(c.variant));
        model = pipeline::train_internal(train, pipeline::parse_variant(c.variant), c.pipeline.internal, model_seed, &outside).to_json();
    } else {
        const auto ctx = load_context(c, m, f.index_in);
        const auto matcher = obtain_matcher(c, m, ctx, train);
        const auto outside = load_outside(c, m, needs_outside(pipeline::to_string(c.pipeline.combined.internal)));
        // The benchmark's test split is not used for fitting; the training set doubles as its test side.
        pipeline::Benchmark bench(train, train, ctx, matcher, outside, c.pipeline);
        if (c.variant == "external_gbt") {
            const auto d = bench.external_design({}, c.pipeline.external.max_sources);
            std::vector<std::size_t> all(bench.train().size());
            std::iota(all.begin(), all.end(), 0);
            model = bench.fit_external(d, all, {}, c.pipeline.external.max_sources).to_json();
        } else {
            model = bench.train_combined_model().to_json();
        }
        m.note("excluded_without_stated_income", bench.excluded());
    }
    write_output(c.out_dir, "model.json", model.dump() + "\n", m);
    write_manifest(c.out_dir, "train_manifest.json", m, c);
    std::cout << "trained " << c.variant << " model on " << train.size() << " rows -> " << (fs::path(c.out_dir) / "model.json").string()
              << "\n";
    return kExitOk;
}

inline Identity read_identity(const Flags& f) {
    if (f.input.empty()) throw ConfigError("--input identity JSON is required");
    require_path(f.input, "identity input");
    try {
        return datagen::identity_from_json(json::parse(csv::read_file(f.input)));
    } catch (const json::parse_error& e) {
        throw InputError("identity input '" + f.input + "': " + e.what());
    }
}

inline Money run_prediction(const RunConfig& c, const Flags& f, const Identity& id, Manifest& m) {
    const auto model_path = require_path(c.resolve(c.paths.model), "model file");
    m.input("model", model_path);
    const auto model = pipeline::AnyModel::from_json(json::parse(csv::read_file(model_path)));
    std::optional<pipeline::ExternalContext> ctx;
    if (model.needs_corpus()) ctx.emplace(load_context(c, m, f.index_in));
    return pipeline::predict_income(model, id, ctx ? &*ctx : nullptr);
}

inline int cmd_predict(const RunConfig& c, const Flags& f) {
    Manifest m("predict");
    const auto id = read_identity(f);
    m.input("identity", f.input);
    const auto p = run_prediction(c, f, id, m);
    const json out = {{"id", id.id}, {"predicted_income", p.dollars()}};
    std::cout << out.dump() << "\n";
    if (!f.out_dir.empty()) {
        write_output(c.out_dir, "prediction.json", out.dump(2) + "\n", m);
        write_manifest(c.out_dir, "predict_manifest.json", m, c);
    }
    return kExitOk;
}

inline int cmd_verify(const RunConfig& c, const Flags& f) {
    Manifest m("verify");
    const auto id = read_identity(f);
    m.input("identity", f.input);
    if (!pipeline::has_stated(id)) throw InputError("verify: the identity needs a positive stated_income");
    const auto p = run_prediction(c, f, id, m);
    if (p.is_zero()) throw InputError("verify: the model predicted zero income; nothing to verify against");
    auto out = pipeline::verify_income(p, *id.stated_income, c.pipeline.tau).to_json();
    out["id"] = id.id;
    std::cout << out.dump() << "\n";
    if (!f.out_dir.empty()) {
        write_output(c.out_dir, "decision.json", out.dump(2) + "\n", m);
        write_manifest(c.out_dir, "verify_manifest.json", m, c);
    }
    return kExitOk;
}

struct BenchmarkInputs {
    datagen::Dataset train, test;
    std::vector<datagen::TextRow> outside;
};

inline int cmd_evaluate(const RunConfig& c, const Flags& f) {
    const std::vector<std::string> variants =
        c.variant == "all" ? std::vector<std::string>(kModelVariants.begin(), kModelVariants.end()) : std::vector<std::string>{c.variant};
    for (const auto& v : variants)
        if (!is_model_variant(v)) throw ConfigError("unknown variant '" + v + "'");
    Manifest m("evaluate");
    const auto train = load_dataset(c, m, "train");
    const auto test = load_dataset(c, m, "test");
    bool outside_needed = false;
    for (const auto& v : variants)
        outside_needed = outside_needed || needs_outside(v) || (v == "combined" && needs_outside(pipeline::to_string(c.pipeline.combined.internal)));
    const auto outside = load_outside(c, m, outside_needed);
    const auto ctx = load_context(c, m, f.index_in);
    const auto matcher = obtain_matcher(c, m, ctx, train);
    pipeline::Benchmark bench(train, test, ctx, matcher, outside, c.pipeline);
    std::vector<pipeline::ModelScore> rows;
    std::vector<pipeline::VerificationRow> ver;
    for (const auto& v : variants) {
        pipeline::ModelScore s;
        if (v == "external_gbt")
            s = bench.external_score(c.cv);
        else if (v == "combined")
            s = bench.combined_score(c.cv);
        else
            s = bench.internal_score(pipeline::parse_variant(v), c.cv);
        ver.push_back(bench.verification(s));
        std::cerr << s.model << ": test MAE " << s.test_mae << "\n";
        rows.push_back(std::move(s));
    }
    write_output(c.out_dir, "evaluation.csv", pipeline::report_csv("Model", rows), m);
    write_output(c.out_dir, "verification.csv", pipeline::verification_csv(ver), m);
    m.note("excluded_without_stated_income", bench.excluded());
    m.note("extraction", ctx.extraction_stats().to_json());
    write_manifest(c.out_dir, "evaluate_manifest.json", m, c);
    std::cout << pipeline::report_csv("Model", rows);
    return kExitOk;
}

inline int cmd_ablate(const RunConfig& c, const Flags& f) {
    std::vector<pipeline::Study> studies;
    if (!f.study.empty()) {
        studies.push_back(pipeline::parse_study(f.study));
    } else {
        for (const auto& s : c.studies) studies.push_back(pipeline::parse_study(s));
    }
    Manifest m("ablate");
    const auto train = load_dataset(c, m, "train");
    const auto test = load_dataset(c, m, "test");
    const auto ctx = load_context(c, m, f.index_in);
    const auto matcher = obtain_matcher(c, m, ctx, train);
    pipeline::Benchmark bench(train, test, ctx, matcher, {}, c.pipeline);
    for (auto s : studies) {
        const auto rows = bench.ablate(s, c.cv);
        const auto content = pipeline::report_csv(std::string(pipeline::Benchmark::first_header(s)), rows);
        write_output(c.out_dir, "ablation_" + std::string(pipeline::to_string(s)) + ".csv", content, m);
        std::cout << content;
    }
    write_manifest(c.out_dir, "ablate_manifest.json", m, c);
    return kExitOk;
}

// ---------------------------------------------------------------------------

/// Entry point: parses arguments, dispatches, maps failures to exit codes
/// (1 validation or usage, 2 runtime).
inline int run(int argc, const char* const* argv) {
    CLI::App app{"Income prediction and verification from identity input and a local salary-record corpus", "incomever"};
    app.require_subcommand(1, 1);
    Flags f;
    auto common = [&](CLI::App* s) {
        s->add_option("--config", f.config, "Run configuration JSON");
        s->add_option("--seed", f.seed, "Seed for every random choice");
        s->add_option("--out-dir", f.out_dir, "Output directory");
        s->add_option("--threads", f.threads, "Worker threads for cross-validation folds")->check(CLI::PositiveNumber);
        s->add_option("--alias-table", f.alias_table, "Alias table CSV");
        s->add_option("--index-in", f.index_in, "Prebuilt corpus index");
    };
    auto* synth = app.add_subcommand("synth", "Generate the synthetic datasets and corpus");
    auto* ingest = app.add_subcommand("ingest", "Convert an H-1B disclosure CSV into train/test datasets");
    auto* index = app.add_subcommand("index", "Build the corpus index");
    auto* train_matcher = app.add_subcommand("train-matcher", "Train the record-matching tree");
    auto* train = app.add_subcommand("train", "Train a model variant");
    auto* predict = app.add_subcommand("predict", "Predict the income of one identity");
    auto* verify = app.add_subcommand("verify", "Verify the stated income of one identity");
    auto* evaluate = app.add_subcommand("evaluate", "Cross-validate and test model variants");
    auto* ablate = app.add_subcommand("ablate", "Run the ablation studies");
    for (auto* s : {synth, ingest, index, train_matcher, train, predict, verify, evaluate, ablate}) common(s);
    index->add_option("--index-out", f.index_out, "Where to write the index");
    ingest->add_option("--input", f.input, "H-1B CSV file");
    ingest->add_option("--column-map", f.column_map, "Column map JSON");
    ingest->add_option("--sample-n", f.sample_n, "Keep a seeded sample of this many rows");
    ingest->add_option("--sample-seed", f.sample_seed, "Seed for --sample-n");
    for (auto* s : {train, evaluate}) s->add_option("--variant", f.variant, "bow_gbt, mean_wv_nn, external_wv_nn, tuned_wv_nn, external_gbt, combined (evaluate also: all)");
    for (auto* s : {predict, verify}) {
        s->add_option("--input", f.input, "Identity JSON")->required();
        s->add_option("--model", f.model, "Trained model JSON");
    }
    for (auto* s : {verify, evaluate}) s->add_option("--tau", f.tau, "Verification tolerance")->check(CLI::NonNegativeNumber);
    for (auto* s : {evaluate, ablate}) s->add_flag("--no-cv", f.no_cv, "Skip cross-validation");
    ablate->add_option("--study", f.study, "sources_count, input_features or salary_features (default: all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        const auto cfg = effective_config(f);
        if (synth->parsed()) return cmd_synth(cfg, f);
        if (ingest->parsed()) return cmd_ingest(cfg, f);
        if (index->parsed()) return cmd_index(cfg, f);
        if (train_matcher->parsed()) return cmd_train_matcher(cfg, f);
        if (train->parsed()) return cmd_train(cfg, f);
        if (predict->parsed()) return cmd_predict(cfg, f);
        if (verify->parsed()) return cmd_verify(cfg, f);
        if (evaluate->parsed()) return cmd_evaluate(cfg, f);
        if (ablate->parsed()) return cmd_ablate(cfg, f);
    } catch (const ContractViolation& e) {
        std::cerr << "error: internal contract violated: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitValidation;
}

}  // namespace incv::cli
