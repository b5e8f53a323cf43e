#include "isa/cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "isa/annotation.hpp"
#include "isa/core.hpp"
#include "isa/dataset_ops.hpp"
#include "isa/discriminator.hpp"
#include "isa/extraction.hpp"
#include "isa/logging.hpp"
#include "isa/metrics.hpp"
#include "isa/selection.hpp"

namespace isa::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// config file + flag merging

struct FileConfig {
    json root = json::object();

    void load(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read config file: " + path.string());
        try {
            in >> root;
        } catch (const json::exception& e) {
            throw InvalidInput("bad config file " + path.string() + ": " + e.what());
        }
        if (!root.is_object()) throw InvalidInput("config file must hold a JSON object");
    }

    const json* find(std::initializer_list<const char*> path) const {
        const json* node = &root;
        for (const char* key : path) {
            if (!node->is_object() || !node->contains(key)) return nullptr;
            node = &(*node)[key];
        }
        return node;
    }

    template <typename T>
    std::optional<T> get(std::initializer_list<const char*> path) const {
        const json* node = find(path);
        if (!node || node->is_null()) return std::nullopt;
        try {
            return node->get<T>();
        } catch (const json::exception&) {
            std::string where;
            for (const char* key : path) where += std::string(where.empty() ? "" : ".") + key;
            throw InvalidInput("config value has the wrong type at '" + where + "'");
        }
    }
};

struct Context {
    std::string config_path;
    bool json_logs = false;
    std::string log_level = "info";
    bool prepared = false;
    FileConfig config;
    int exit_code = 0;

    void prepare() {
        if (prepared) return;
        prepared = true;
        log::set_json(json_logs);
        if (log_level == "debug") log::set_level(log::Level::debug);
        else if (log_level == "info") log::set_level(log::Level::info);
        else if (log_level == "warn") log::set_level(log::Level::warn);
        else log::set_level(log::Level::error);
        if (!config_path.empty()) config.load(config_path);
    }
};

// flag wins over a conflicting config value, with a logged note
template <typename T>
void merge(const CLI::Option* opt, T& value, const Context& ctx, std::initializer_list<const char*> path,
           const char* flag) {
    const std::optional<T> from_file = ctx.config.get<T>(path);
    if (opt != nullptr && opt->count() > 0) {
        if (from_file && *from_file != value)
            log::info("flag overrides config value", {{"flag", flag}});
        return;
    }
    if (from_file) value = *from_file;
}

void merge_optional(const CLI::Option* opt, std::optional<double>& value, const Context& ctx,
                    std::initializer_list<const char*> path, const char* flag) {
    const std::optional<double> from_file = ctx.config.get<double>(path);
    if (opt != nullptr && opt->count() > 0) {
        if (from_file && (!value || *from_file != *value))
            log::info("flag overrides config value", {{"flag", flag}});
        return;
    }
    if (from_file) value = from_file;
}

// ---------------------------------------------------------------------------
// small shared helpers

fs::path required_path(const std::string& value, const char* what) {
    if (value.empty())
        throw InvalidInput(std::string("no ") + what + " given (flag or config)");
    return {value};
}

std::vector<ImageRecord> manifest_subset(const fs::path& file, const std::string& split) {
    std::vector<ImageRecord> records = read_manifest(file);
    if (split == "all") return records;
    const Split want = split_from_string(split);
    std::vector<ImageRecord> subset;
    for (ImageRecord& record : records)
        if (record.split && *record.split == want) subset.push_back(std::move(record));
    if (subset.empty())
        throw InvalidInput("no records in split '" + split + "' of " + file.string());
    return subset;
}

// bundles of one (mode, prompt_version, extractor) out of the cache; an
// empty extractor_id is allowed when the cache holds exactly one
std::vector<extraction::FeatureBundle> select_bundles(const fs::path& cache_file, extraction::Mode mode,
                                                      int prompt_version, const std::string& extractor_id) {
    if (!fs::exists(cache_file)) throw IoError("feature cache not found: " + cache_file.string());
    const extraction::FeatureCache cache(cache_file);

    std::vector<extraction::FeatureBundle> filtered;
    std::set<std::string> extractors;
    for (extraction::FeatureBundle& bundle : cache.all()) {
        if (bundle.mode != mode || bundle.prompt_version != prompt_version) continue;
        if (!extractor_id.empty() && bundle.extractor_id != extractor_id) continue;
        extractors.insert(bundle.extractor_id);
        filtered.push_back(std::move(bundle));
    }
    if (filtered.empty())
        throw InvalidInput("no cached bundles for mode '" + std::string(to_string(mode)) + "' in " +
                           cache_file.string());
    if (extractors.size() > 1) {
        std::string names;
        for (const std::string& name : extractors) names += (names.empty() ? "" : ", ") + name;
        throw InvalidInput("cache holds bundles from several extractors (" + names +
                           "); pick one with --extractor-id");
    }
    return filtered;
}

// the cache usually spans the whole dataset; training on one split needs the
// bundles narrowed to those records before pairing
std::vector<extraction::FeatureBundle> bundles_for(std::vector<extraction::FeatureBundle> bundles,
                                                   std::span<const ImageRecord> records) {
    std::set<std::string_view> ids;
    for (const ImageRecord& record : records) ids.insert(record.id);
    std::erase_if(bundles,
                  [&](const extraction::FeatureBundle& bundle) { return !ids.count(bundle.image_id); });
    return bundles;
}

void write_text_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

json summary_to_json(const metrics::RunSummary& summary) {
    json j;
    j["runs"] = summary.runs;
    const auto stat = [](const metrics::RunStat& s) { return json{{"mean", s.mean}, {"std", s.std}}; };
    j["rmse"] = stat(summary.rmse);
    j["rmae"] = stat(summary.rmae);
    if (summary.pcc) j["pcc"] = stat(*summary.pcc);
    if (summary.srcc) j["srcc"] = stat(*summary.srcc);
    if (summary.kendall) j["kendall"] = stat(*summary.kendall);
    return j;
}

// ---------------------------------------------------------------------------
// ingest / dedup / split

struct IngestArgs {
    std::string dir, out, exclude;
    CLI::Option *dir_opt = nullptr, *out_opt = nullptr;
};

void run_ingest(Context& ctx, IngestArgs& args) {
    merge(args.out_opt, args.out, ctx, {"manifest"}, "--out");
    const fs::path root = required_path(args.dir, "--dir");
    const fs::path out = required_path(args.out, "--out manifest path");

    dataset::IngestResult result = dataset::ingest(root);
    for (const std::string& line : result.skipped) log::warn("skipped during ingest", {{"file", line}});

    std::size_t excluded = 0;
    if (!args.exclude.empty()) {
        auto [kept, dropped] =
            dataset::apply_exclusions(result.records, dataset::read_exclusion_list(args.exclude));
        excluded = dropped.size();
        result.records = std::move(kept);
    }
    write_manifest(out, result.records);
    std::cout << "ingested " << result.records.size() << " records into " << out.string() << " ("
              << result.skipped.size() << " skipped, " << excluded << " excluded)\n";
}

struct DedupArgs {
    std::string manifest, out, report, exclude;
    int max_distance = 8;
    CLI::Option *manifest_opt = nullptr, *distance_opt = nullptr;
};

void run_dedup(Context& ctx, DedupArgs& args) {
    merge(args.manifest_opt, args.manifest, ctx, {"manifest"}, "--manifest");
    merge(args.distance_opt, args.max_distance, ctx, {"dedup", "max_distance"}, "--max-distance");
    const fs::path in = required_path(args.manifest, "--manifest");
    const fs::path out = required_path(args.out.empty() ? args.manifest : args.out, "--out");

    std::vector<ImageRecord> records = read_manifest(in);
    std::size_t excluded = 0;
    if (!args.exclude.empty()) {
        auto [kept, dropped] =
            dataset::apply_exclusions(records, dataset::read_exclusion_list(args.exclude));
        excluded = dropped.size();
        records = std::move(kept);
    }
    const dataset::DedupResult result = dataset::dedup(records, args.max_distance);
    for (const std::string& line : result.flagged) log::warn("kept but unhashable", {{"record", line}});

    write_manifest(out, result.kept);
    if (!args.report.empty()) {
        json j;
        j["config"] = {{"manifest", in.string()}, {"max_distance", args.max_distance}};
        j["dropped"] = json::array();
        for (const auto& [dropped, kept] : result.dropped)
            j["dropped"].push_back({{"dropped", dropped}, {"kept", kept}});
        j["flagged"] = result.flagged;
        j["kept"] = result.kept.size();
        write_text_file(args.report, j.dump(2) + "\n");
    }
    std::cout << "kept " << result.kept.size() << " of " << records.size() << " records ("
              << result.dropped.size() << " near-duplicates dropped, " << result.flagged.size()
              << " flagged, " << excluded << " excluded)\n";
}

struct SplitArgs {
    std::string manifest, out;
    dataset::SplitSpec spec;
    bool force = false;
    CLI::Option *manifest_opt = nullptr, *seed_opt = nullptr, *train_opt = nullptr, *val_opt = nullptr,
                *test_opt = nullptr;
};

void run_split(Context& ctx, SplitArgs& args) {
    merge(args.manifest_opt, args.manifest, ctx, {"manifest"}, "--manifest");
    merge(args.seed_opt, args.spec.seed, ctx, {"split", "seed"}, "--seed");
    merge(args.train_opt, args.spec.train_ratio, ctx, {"split", "train_ratio"}, "--train-ratio");
    merge(args.val_opt, args.spec.val_ratio, ctx, {"split", "val_ratio"}, "--val-ratio");
    merge(args.test_opt, args.spec.test_ratio, ctx, {"split", "test_ratio"}, "--test-ratio");
    const fs::path in = required_path(args.manifest, "--manifest");
    const fs::path out = required_path(args.out.empty() ? args.manifest : args.out, "--out");

    std::vector<ImageRecord> records =
        dataset::assign_splits(read_manifest(in), args.spec, args.force);
    const dataset::SplitCounts counts = dataset::split_sizes(records.size(), args.spec);
    write_manifest(out, records);
    std::cout << "assigned splits (seed " << args.spec.seed << "): train " << counts.train << ", val "
              << counts.val << ", test " << counts.test << "\n";
}

// ---------------------------------------------------------------------------
// annotation commands

struct AggregateArgs {
    std::string annotations, manifest, out, kind = "both";
    CLI::Option *annotations_opt = nullptr, *manifest_opt = nullptr;
};

void run_aggregate(Context& ctx, AggregateArgs& args) {
    merge(args.annotations_opt, args.annotations, ctx, {"annotations"}, "--annotations");
    merge(args.manifest_opt, args.manifest, ctx, {"manifest"}, "--manifest");
    const fs::path annotations_file = required_path(args.annotations, "--annotations");
    const fs::path manifest_file = required_path(args.manifest, "--manifest");
    const fs::path out = required_path(args.out.empty() ? args.manifest : args.out, "--out");

    std::vector<ImageRecord> records = read_manifest(manifest_file);
    const std::vector<annotation::AnnotationRecord> raw = annotation::read_annotations(annotations_file);

    std::map<std::pair<std::string, ScoreKind>, double> labels;
    for (const annotation::AnnotationRecord& record : raw) {
        if (args.kind != "both" && record.kind != score_kind_from_string(args.kind)) continue;
        const auto key = std::make_pair(record.id, record.kind);
        if (labels.count(key))
            throw InvalidInput("duplicate annotation for " + record.id + "/" +
                               std::string(to_string(record.kind)));
        labels.emplace(key, annotation::aggregate_label(record.ratings));
    }

    std::set<std::string> known;
    std::size_t applied = 0;
    for (ImageRecord& record : records) {
        known.insert(record.id);
        if (const auto it = labels.find({record.id, ScoreKind::entity}); it != labels.end()) {
            record.entity_score = it->second;
            ++applied;
        }
        if (const auto it = labels.find({record.id, ScoreKind::semantic}); it != labels.end()) {
            record.semantic_score = it->second;
            ++applied;
        }
    }
    std::size_t orphaned = 0;
    for (const auto& [key, label] : labels) {
        if (!known.count(key.first)) {
            ++orphaned;
            log::warn("annotation without manifest record", {{"id", key.first}});
        }
    }
    write_manifest(out, records);
    std::cout << "applied " << applied << " aggregated labels to " << out.string() << " (" << orphaned
              << " annotations without record)\n";
}

struct ConsistencyArgs {
    std::string annotations, kind = "entity", icc_variant = "ck", out;
    CLI::Option *annotations_opt = nullptr, *variant_opt = nullptr;
};

void run_consistency(Context& ctx, ConsistencyArgs& args) {
    merge(args.annotations_opt, args.annotations, ctx, {"annotations"}, "--annotations");
    merge(args.variant_opt, args.icc_variant, ctx, {"consistency", "icc_variant"}, "--icc-variant");
    const fs::path file = required_path(args.annotations, "--annotations");

    const ScoreKind kind = score_kind_from_string(args.kind);
    const annotation::IccVariant variant = annotation::icc_variant_from_string(args.icc_variant);
    const AnnotationMatrix matrix =
        annotation::matrix_from_records(annotation::read_annotations(file), kind);
    const annotation::ConsistencyReport report = annotation::build_consistency_report(matrix, variant);

    std::cout << annotation::render_consistency_table(report);
    if (!args.out.empty()) {
        json j = json::parse(annotation::consistency_to_json(report));
        j["config"] = {{"annotations", file.string()},
                       {"kind", std::string(to_string(kind))},
                       {"icc_variant", std::string(annotation::to_string(variant))}};
        write_text_file(args.out, j.dump(2) + "\n");
    }
}

struct DistributionArgs {
    std::string manifest, kind = "both", out;
    CLI::Option* manifest_opt = nullptr;
};

void run_distribution(Context& ctx, DistributionArgs& args) {
    merge(args.manifest_opt, args.manifest, ctx, {"manifest"}, "--manifest");
    const fs::path file = required_path(args.manifest, "--manifest");
    const std::vector<ImageRecord> records = read_manifest(file);

    json out_json;
    out_json["config"] = {{"manifest", file.string()}};
    std::vector<ScoreKind> kinds;
    if (args.kind == "both") kinds = {ScoreKind::entity, ScoreKind::semantic};
    else kinds = {score_kind_from_string(args.kind)};

    for (const ScoreKind kind : kinds) {
        std::vector<double> scores;
        for (const ImageRecord& record : records)
            if (const auto score = record.score(kind)) scores.push_back(*score);
        if (scores.empty()) {
            log::warn("no scores in manifest", {{"kind", std::string(to_string(kind))}});
            continue;
        }
        const annotation::BinDistribution dist = annotation::bin_distribution(scores);
        std::cout << annotation::render_distribution_table(to_string(kind), dist);
        out_json[std::string(to_string(kind))] = json::parse(annotation::distribution_to_json(dist));
    }
    if (!args.out.empty()) write_text_file(args.out, out_json.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// extraction

struct ExtractorArgs {
    extraction::ExtractorConfig config;
    std::string fixture_dir; // string mirror of config.fixture_dir for CLI11
    CLI::Option *backend_opt = nullptr, *endpoint_opt = nullptr, *model_opt = nullptr,
                *timeout_opt = nullptr, *retries_opt = nullptr, *temperature_opt = nullptr,
                *max_tokens_opt = nullptr, *api_key_env_opt = nullptr, *fixtures_opt = nullptr,
                *parallelism_opt = nullptr, *version_opt = nullptr;

    void add_options(CLI::App* cmd) {
        backend_opt = cmd->add_option("--backend", config.backend, "extractor backend")
                          ->check(CLI::IsMember({"http", "mock"}));
        endpoint_opt = cmd->add_option("--endpoint", config.endpoint, "chat-completions URL");
        model_opt = cmd->add_option("--model", config.model, "model name");
        timeout_opt = cmd->add_option("--timeout", config.timeout_s, "request timeout in seconds");
        retries_opt = cmd->add_option("--max-retries", config.max_retries, "retries after the first attempt");
        temperature_opt = cmd->add_option("--temperature", config.temperature, "sampling temperature");
        max_tokens_opt = cmd->add_option("--max-output-tokens", config.max_output_tokens,
                                         "response length limit");
        api_key_env_opt = cmd->add_option("--api-key-env", config.api_key_env,
                                          "env var holding the API key");
        fixtures_opt = cmd->add_option("--fixtures", fixture_dir, "mock backend fixture directory");
        parallelism_opt = cmd->add_option("--parallelism", config.parallelism, "concurrent requests");
        version_opt = cmd->add_option("--prompt-version", config.prompt_version, "cache key version");
    }

    extraction::ExtractorConfig merged(Context& ctx) {
        merge(backend_opt, config.backend, ctx, {"extractor", "backend"}, "--backend");
        merge(endpoint_opt, config.endpoint, ctx, {"extractor", "endpoint"}, "--endpoint");
        merge(model_opt, config.model, ctx, {"extractor", "model"}, "--model");
        merge(timeout_opt, config.timeout_s, ctx, {"extractor", "timeout_s"}, "--timeout");
        merge(retries_opt, config.max_retries, ctx, {"extractor", "max_retries"}, "--max-retries");
        merge(temperature_opt, config.temperature, ctx, {"extractor", "temperature"}, "--temperature");
        merge(max_tokens_opt, config.max_output_tokens, ctx, {"extractor", "max_output_tokens"},
              "--max-output-tokens");
        merge(api_key_env_opt, config.api_key_env, ctx, {"extractor", "api_key_env"}, "--api-key-env");
        merge(fixtures_opt, fixture_dir, ctx, {"extractor", "fixture_dir"}, "--fixtures");
        merge(parallelism_opt, config.parallelism, ctx, {"extractor", "parallelism"}, "--parallelism");
        merge(version_opt, config.prompt_version, ctx, {"extractor", "prompt_version"},
              "--prompt-version");
        config.fixture_dir = fixture_dir;
        return config;
    }
};

struct ExtractArgs {
    std::string manifest, cache, mode, split = "all";
    ExtractorArgs extractor;
    CLI::Option *manifest_opt = nullptr, *cache_opt = nullptr;
};

void run_extract(Context& ctx, ExtractArgs& args) {
    merge(args.manifest_opt, args.manifest, ctx, {"manifest"}, "--manifest");
    merge(args.cache_opt, args.cache, ctx, {"feature_cache"}, "--cache");
    const fs::path manifest_file = required_path(args.manifest, "--manifest");
    const fs::path cache_file = required_path(args.cache, "--cache");
    const extraction::ExtractorConfig config = args.extractor.merged(ctx);
    const extraction::Mode mode = extraction::mode_from_string(args.mode);

    const std::vector<ImageRecord> records = manifest_subset(manifest_file, args.split);
    extraction::FeatureCache cache(cache_file);
    const extraction::BatchResult result = extraction::extract_batch(records, mode, config, cache);

    for (const std::string& warning : result.warnings) log::warn("extraction warning", {{"detail", warning}});
    for (const extraction::BatchFailure& failure : result.failures)
        log::error("extraction failed", {{"image", failure.image_id}, {"error", failure.error}});

    std::cout << "extracted " << result.bundles.size() << " bundles (" << result.cache_hits
              << " cache hits, " << result.upstream_requests << " upstream requests, "
              << result.failures.size() << " failures) -> " << cache_file.string() << "\n";
    if (!result.failures.empty()) ctx.exit_code = 1;
}

// ---------------------------------------------------------------------------
// train / eval / protocol

struct TrainOpts {
    discriminator::TrainConfig config;
    std::string kind = "entity", ablation = "full";
    CLI::Option *adapter_opt = nullptr, *seed_opt = nullptr, *dim_opt = nullptr, *l2_opt = nullptr,
                *batch_opt = nullptr, *tokens_opt = nullptr, *kind_opt = nullptr, *ablation_opt = nullptr;

    void add_options(CLI::App* cmd) {
        kind_opt = cmd->add_option("--kind", kind, "score kind")
                       ->check(CLI::IsMember({"entity", "semantic"}));
        ablation_opt = cmd->add_option("--ablation", ablation, "discriminator input composition")
                           ->check(CLI::IsMember({"full", "no_cors", "no_description"}));
        adapter_opt = cmd->add_option("--adapter", config.adapter, "regression backend");
        seed_opt = cmd->add_option("--seed", config.seed, "training seed");
        dim_opt = cmd->add_option("--feature-dim", config.feature_dim, "hashed feature buckets");
        l2_opt = cmd->add_option("--l2", config.l2, "ridge strength");
        batch_opt = cmd->add_option("--batch-size", config.batch_size, "batch size");
        tokens_opt = cmd->add_option("--max-text-tokens", config.max_text_tokens, "input truncation");
    }

    discriminator::TrainConfig merged(Context& ctx) {
        merge(kind_opt, kind, ctx, {"train", "kind"}, "--kind");
        merge(ablation_opt, ablation, ctx, {"train", "ablation"}, "--ablation");
        merge(adapter_opt, config.adapter, ctx, {"train", "adapter"}, "--adapter");
        merge(seed_opt, config.seed, ctx, {"train", "seed"}, "--seed");
        merge(dim_opt, config.feature_dim, ctx, {"train", "feature_dim"}, "--feature-dim");
        merge(l2_opt, config.l2, ctx, {"train", "l2"}, "--l2");
        merge(batch_opt, config.batch_size, ctx, {"train", "batch_size"}, "--batch-size");
        merge(tokens_opt, config.max_text_tokens, ctx, {"train", "max_text_tokens"}, "--max-text-tokens");
        config.score_kind = score_kind_from_string(kind);
        config.ablation = extraction::ablation_from_string(ablation);
        return config;
    }
};

struct FeatureSource {
    std::string cache, mode = "cot", extractor_id;
    int prompt_version = 1;
    CLI::Option *cache_opt = nullptr, *mode_opt = nullptr, *version_opt = nullptr;

    void add_options(CLI::App* cmd) {
        cache_opt = cmd->add_option("--cache", cache, "feature cache file");
        mode_opt = cmd->add_option("--mode", mode, "extraction mode of the features")
                       ->check(CLI::IsMember({"naive", "cot"}));
        cmd->add_option("--extractor-id", extractor_id, "disambiguate multi-extractor caches");
        version_opt = cmd->add_option("--prompt-version", prompt_version, "cache key version");
    }

    std::vector<extraction::FeatureBundle> load(Context& ctx) {
        merge(cache_opt, cache, ctx, {"feature_cache"}, "--cache");
        merge(mode_opt, mode, ctx, {"train", "mode"}, "--mode");
        merge(version_opt, prompt_version, ctx, {"extractor", "prompt_version"}, "--prompt-version");
        return select_bundles(required_path(cache, "--cache"), extraction::mode_from_string(mode),
                              prompt_version, extractor_id);
    }
};

struct TrainArgs {
    std::string manifest, split = "train", out;
    TrainOpts train;
    FeatureSource features;
    CLI::Option *manifest_opt = nullptr, *out_opt = nullptr;
};

fs::path model_out_path(Context& ctx, const std::string& flag_value, CLI::Option* opt,
                        const discriminator::TrainConfig& config) {
    if (opt != nullptr && opt->count() > 0) return {flag_value};
    if (const auto dir = ctx.config.get<std::string>({"model_dir"}))
        return fs::path(*dir) / (std::string(to_string(config.score_kind)) + ".model");
    return required_path(flag_value, "--out model path");
}

void run_train(Context& ctx, TrainArgs& args) {
    merge(args.manifest_opt, args.manifest, ctx, {"manifest"}, "--manifest");
    const fs::path manifest_file = required_path(args.manifest, "--manifest");
    const discriminator::TrainConfig config = args.train.merged(ctx);
    const fs::path out = model_out_path(ctx, args.out, args.out_opt, config);

    const std::vector<ImageRecord> records = manifest_subset(manifest_file, args.split);
    const std::vector<extraction::FeatureBundle> bundles = args.features.load(ctx);

    std::vector<std::string> skipped;
    const std::vector<discriminator::Example> examples = discriminator::build_examples(
        records, bundles_for(bundles, records), config.score_kind, config.ablation, &skipped);
    for (const std::string& note : skipped) log::debug("skipped unlabeled record", {{"detail", note}});

    const discriminator::RegressorModel model = discriminator::RegressorModel::train(examples, config);
    model.save(out);
    std::cout << "trained " << config.adapter << " on " << model.example_count() << " "
              << to_string(config.score_kind) << " examples (seed " << config.seed << ") -> "
              << out.string() << "\n";
}

struct EvalArgs {
    std::string manifest, model, split = "test", report;
    FeatureSource features;
    CLI::Option *manifest_opt = nullptr, *report_opt = nullptr;
};

void run_eval(Context& ctx, EvalArgs& args) {
    merge(args.manifest_opt, args.manifest, ctx, {"manifest"}, "--manifest");
    const fs::path manifest_file = required_path(args.manifest, "--manifest");
    const fs::path model_file = required_path(args.model, "--model");

    const discriminator::RegressorModel model = discriminator::RegressorModel::load(model_file);
    const std::vector<ImageRecord> records = manifest_subset(manifest_file, args.split);
    const std::vector<extraction::FeatureBundle> bundles = args.features.load(ctx);

    const discriminator::EvalRun run =
        discriminator::evaluate(model, records, bundles, model.config().ablation, true);
    for (const std::string& note : run.notes) log::warn("eval note", {{"detail", note}});

    std::cout << metrics::report_to_json(run.report) << "\n";

    std::string report_path = args.report;
    if (report_path.empty()) {
        if (const auto dir = ctx.config.get<std::string>({"reports_dir"}))
            report_path =
                (fs::path(*dir) / ("eval_" + std::string(to_string(model.kind())) + ".json")).string();
    }
    if (!report_path.empty()) {
        json j;
        j["config"] = {{"manifest", manifest_file.string()},
                       {"model", model_file.string()},
                       {"split", args.split},
                       {"mode", args.features.mode},
                       {"ablation", std::string(extraction::to_string(model.config().ablation))},
                       {"kind", std::string(to_string(model.kind()))}};
        j["excluded"] = run.excluded;
        j["metrics"] = json::parse(metrics::report_to_json(run.report));
        j["notes"] = run.notes;
        j["seed"] = run.seed;
        write_text_file(report_path, j.dump(2) + "\n");
    }
}

struct ProtocolArgs {
    std::string manifest, train_split = "train", eval_split = "test", report;
    std::vector<std::uint64_t> seeds;
    int repeats = 3;
    TrainOpts train;
    FeatureSource features;
    CLI::Option *manifest_opt = nullptr, *repeats_opt = nullptr;
};

void run_protocol(Context& ctx, ProtocolArgs& args) {
    merge(args.manifest_opt, args.manifest, ctx, {"manifest"}, "--manifest");
    merge(args.repeats_opt, args.repeats, ctx, {"protocol", "repeats"}, "--repeats");
    const fs::path manifest_file = required_path(args.manifest, "--manifest");
    const discriminator::TrainConfig config = args.train.merged(ctx);

    std::vector<std::uint64_t> seeds = args.seeds;
    if (seeds.empty()) {
        if (args.repeats < 1) throw InvalidInput("--repeats must be >= 1");
        for (int r = 0; r < args.repeats; ++r) seeds.push_back(config.seed + static_cast<std::uint64_t>(r));
    }

    const std::vector<ImageRecord> train_records = manifest_subset(manifest_file, args.train_split);
    const std::vector<ImageRecord> eval_records = manifest_subset(manifest_file, args.eval_split);
    const std::vector<extraction::FeatureBundle> bundles = args.features.load(ctx);

    const std::vector<discriminator::Example> train_examples = discriminator::build_examples(
        train_records, bundles_for(bundles, train_records), config.score_kind, config.ablation);
    const std::vector<discriminator::Example> eval_examples = discriminator::build_examples(
        eval_records, bundles_for(bundles, eval_records), config.score_kind, config.ablation);

    std::string report_path = args.report;
    if (report_path.empty()) {
        if (const auto dir = ctx.config.get<std::string>({"reports_dir"}))
            report_path =
                (fs::path(*dir) / ("protocol_" + std::string(to_string(config.score_kind)) + ".json"))
                    .string();
    }
    // per-run persistence: a crashed later run leaves earlier results on disk
    const auto persist_run = [&](std::uint64_t seed, const metrics::MetricReport& report) {
        if (report_path.empty()) return;
        write_text_file(report_path + ".seed" + std::to_string(seed),
                        metrics::report_to_json(report) + "\n");
    };

    const discriminator::ProtocolResult result = discriminator::run_protocol(
        train_examples, eval_examples, config, seeds, true, persist_run);

    const std::pair<std::string, metrics::RunSummary> row{std::string(to_string(config.score_kind)),
                                                          result.summary};
    std::cout << metrics::render_summary_table({&row, 1});

    if (!report_path.empty()) {
        json j;
        j["config"] = {{"manifest", manifest_file.string()},
                       {"train_split", args.train_split},
                       {"eval_split", args.eval_split},
                       {"mode", args.features.mode},
                       {"ablation", std::string(extraction::to_string(config.ablation))},
                       {"kind", std::string(to_string(config.score_kind))},
                       {"adapter", config.adapter},
                       {"feature_dim", config.feature_dim},
                       {"l2", config.l2},
                       {"batch_size", config.batch_size},
                       {"max_text_tokens", config.max_text_tokens}};
        j["seeds"] = result.seeds;
        j["runs"] = json::array();
        for (const metrics::MetricReport& run : result.runs)
            j["runs"].push_back(json::parse(metrics::report_to_json(run)));
        j["summary"] = summary_to_json(result.summary);
        write_text_file(report_path, j.dump(2) + "\n");
    }
}

// ---------------------------------------------------------------------------
// rank

struct RankArgs {
    std::string manifest, entity_model, semantic_model, out;
    bool use_labels = false;
    selection::SelectionCriteria criteria;
    FeatureSource features;
    CLI::Option *manifest_opt = nullptr, *low_opt = nullptr, *high_opt = nullptr, *topk_opt = nullptr,
                *minsem_opt = nullptr;
};

void run_rank(Context& ctx, RankArgs& args) {
    merge(args.manifest_opt, args.manifest, ctx, {"manifest"}, "--manifest");
    merge(args.low_opt, args.criteria.entity_low, ctx, {"selection", "entity_low"}, "--entity-low");
    merge(args.high_opt, args.criteria.entity_high, ctx, {"selection", "entity_high"}, "--entity-high");
    merge(args.topk_opt, args.criteria.top_k, ctx, {"selection", "top_k"}, "--top-k");
    merge_optional(args.minsem_opt, args.criteria.min_semantic, ctx, {"selection", "min_semantic"},
                   "--min-semantic");
    const fs::path manifest_file = required_path(args.manifest, "--manifest");
    const std::vector<ImageRecord> records = read_manifest(manifest_file);

    std::vector<selection::ScoredRecord> scored;
    std::size_t skipped = 0;
    if (args.use_labels) {
        for (const ImageRecord& record : records) {
            if (record.entity_score && record.semantic_score)
                scored.emplace_back(record, ScorePair(*record.entity_score, *record.semantic_score));
            else
                ++skipped;
        }
    } else {
        const auto model_path = [&](std::string value, const char* kind, const char* what) {
            if (value.empty()) {
                if (const auto dir = ctx.config.get<std::string>({"model_dir"}))
                    value = (fs::path(*dir) / (std::string(kind) + ".model")).string();
            }
            return required_path(value, what);
        };
        const discriminator::RegressorModel entity_model = discriminator::RegressorModel::load(
            model_path(args.entity_model, "entity", "--entity-model"));
        const discriminator::RegressorModel semantic_model = discriminator::RegressorModel::load(
            model_path(args.semantic_model, "semantic", "--semantic-model"));
        const std::vector<extraction::FeatureBundle> bundles = args.features.load(ctx);
        std::map<std::string, const extraction::FeatureBundle*> by_id;
        for (const extraction::FeatureBundle& bundle : bundles) by_id.emplace(bundle.image_id, &bundle);

        for (const ImageRecord& record : records) {
            const auto it = by_id.find(record.id);
            if (it == by_id.end()) {
                ++skipped;
                continue;
            }
            const double entity = entity_model.predict(
                extraction::compose_input(*it->second, entity_model.config().ablation));
            const double semantic = semantic_model.predict(
                extraction::compose_input(*it->second, semantic_model.config().ablation));
            scored.emplace_back(record, ScorePair(entity, semantic));
        }
    }
    if (skipped > 0)
        log::warn("records without scores skipped", {{"count", std::to_string(skipped)}});

    const std::vector<selection::ScoredRecord> shortlist =
        selection::rank_and_filter(scored, args.criteria);
    std::cout << selection::render_shortlist(shortlist);
    if (!args.out.empty()) write_text_file(args.out, selection::shortlist_to_json_lines(shortlist));
}

} // namespace

// ---------------------------------------------------------------------------

int run(int argc, const char* const* argv) {
    CLI::App app{"image semantic assessment toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    auto ctx = std::make_shared<Context>();
    app.add_option("--config", ctx->config_path, "JSON config file; flags override it");
    app.add_flag("--json-logs", ctx->json_logs, "emit one JSON object per log line");
    app.add_option("--log-level", ctx->log_level, "stderr log threshold")
        ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

    // ingest
    auto ingest_args = std::make_shared<IngestArgs>();
    {
        CLI::App* cmd = app.add_subcommand("ingest", "scan an image directory into a manifest");
        ingest_args->dir_opt = cmd->add_option("--dir", ingest_args->dir, "image directory")->required();
        ingest_args->out_opt = cmd->add_option("--out", ingest_args->out, "manifest to write");
        cmd->add_option("--exclude", ingest_args->exclude, "exclusion list (one id per line)");
        cmd->callback([ctx, ingest_args] {
            ctx->prepare();
            run_ingest(*ctx, *ingest_args);
        });
    }

    // dedup
    auto dedup_args = std::make_shared<DedupArgs>();
    {
        CLI::App* cmd = app.add_subcommand("dedup", "drop near-duplicate images from a manifest");
        dedup_args->manifest_opt = cmd->add_option("--manifest", dedup_args->manifest, "input manifest");
        cmd->add_option("--out", dedup_args->out, "output manifest (default: in place)");
        dedup_args->distance_opt =
            cmd->add_option("--max-distance", dedup_args->max_distance, "Hamming threshold");
        cmd->add_option("--report", dedup_args->report, "write a dedup report JSON");
        cmd->add_option("--exclude", dedup_args->exclude, "exclusion list applied first");
        cmd->callback([ctx, dedup_args] {
            ctx->prepare();
            run_dedup(*ctx, *dedup_args);
        });
    }

    // split
    auto split_args = std::make_shared<SplitArgs>();
    {
        CLI::App* cmd = app.add_subcommand("split", "assign train/val/test splits");
        split_args->manifest_opt = cmd->add_option("--manifest", split_args->manifest, "input manifest");
        cmd->add_option("--out", split_args->out, "output manifest (default: in place)");
        split_args->seed_opt = cmd->add_option("--seed", split_args->spec.seed, "shuffle seed");
        split_args->train_opt =
            cmd->add_option("--train-ratio", split_args->spec.train_ratio, "train fraction");
        split_args->val_opt = cmd->add_option("--val-ratio", split_args->spec.val_ratio, "val fraction");
        split_args->test_opt =
            cmd->add_option("--test-ratio", split_args->spec.test_ratio, "test fraction");
        cmd->add_flag("--force", split_args->force, "reassign even if splits exist");
        cmd->callback([ctx, split_args] {
            ctx->prepare();
            run_split(*ctx, *split_args);
        });
    }

    // annotate-aggregate
    auto aggregate_args = std::make_shared<AggregateArgs>();
    {
        CLI::App* cmd =
            app.add_subcommand("annotate-aggregate", "fold raw ratings into manifest labels");
        aggregate_args->annotations_opt =
            cmd->add_option("--annotations", aggregate_args->annotations, "raw annotations JSONL");
        aggregate_args->manifest_opt =
            cmd->add_option("--manifest", aggregate_args->manifest, "manifest to label");
        cmd->add_option("--out", aggregate_args->out, "output manifest (default: in place)");
        cmd->add_option("--kind", aggregate_args->kind, "which score kinds to apply")
            ->check(CLI::IsMember({"entity", "semantic", "both"}));
        cmd->callback([ctx, aggregate_args] {
            ctx->prepare();
            run_aggregate(*ctx, *aggregate_args);
        });
    }

    // consistency
    auto consistency_args = std::make_shared<ConsistencyArgs>();
    {
        CLI::App* cmd = app.add_subcommand("consistency", "inter-annotator agreement report");
        consistency_args->annotations_opt =
            cmd->add_option("--annotations", consistency_args->annotations, "raw annotations JSONL");
        cmd->add_option("--kind", consistency_args->kind, "score kind")
            ->check(CLI::IsMember({"entity", "semantic"}));
        consistency_args->variant_opt =
            cmd->add_option("--icc-variant", consistency_args->icc_variant, "ICC flavor")
                ->check(CLI::IsMember({"c1", "ck", "a1", "ak"}));
        cmd->add_option("--out", consistency_args->out, "write the report as JSON");
        cmd->callback([ctx, consistency_args] {
            ctx->prepare();
            run_consistency(*ctx, *consistency_args);
        });
    }

    // distribution
    auto distribution_args = std::make_shared<DistributionArgs>();
    {
        CLI::App* cmd = app.add_subcommand("distribution", "score histogram over five bins");
        distribution_args->manifest_opt =
            cmd->add_option("--manifest", distribution_args->manifest, "labeled manifest");
        cmd->add_option("--kind", distribution_args->kind, "score kind(s)")
            ->check(CLI::IsMember({"entity", "semantic", "both"}));
        cmd->add_option("--out", distribution_args->out, "write the distribution as JSON");
        cmd->callback([ctx, distribution_args] {
            ctx->prepare();
            run_distribution(*ctx, *distribution_args);
        });
    }

    // extract
    auto extract_args = std::make_shared<ExtractArgs>();
    {
        CLI::App* cmd = app.add_subcommand("extract", "fetch features for every manifest image");
        cmd->add_option("--mode", extract_args->mode, "extraction mode")
            ->required()
            ->check(CLI::IsMember({"naive", "cot"}));
        extract_args->manifest_opt =
            cmd->add_option("--manifest", extract_args->manifest, "input manifest");
        extract_args->cache_opt = cmd->add_option("--cache", extract_args->cache, "feature cache file");
        cmd->add_option("--split", extract_args->split, "restrict to one split")
            ->check(CLI::IsMember({"train", "val", "test", "all"}));
        extract_args->extractor.add_options(cmd);
        cmd->callback([ctx, extract_args] {
            ctx->prepare();
            run_extract(*ctx, *extract_args);
        });
    }

    // train
    auto train_args = std::make_shared<TrainArgs>();
    {
        CLI::App* cmd = app.add_subcommand("train", "fit a discriminator on a split");
        train_args->manifest_opt = cmd->add_option("--manifest", train_args->manifest, "labeled manifest");
        cmd->add_option("--split", train_args->split, "training split")
            ->check(CLI::IsMember({"train", "val", "test", "all"}));
        train_args->out_opt = cmd->add_option("--out", train_args->out, "model file to write");
        train_args->train.add_options(cmd);
        train_args->features.add_options(cmd);
        cmd->callback([ctx, train_args] {
            ctx->prepare();
            run_train(*ctx, *train_args);
        });
    }

    // eval
    auto eval_args = std::make_shared<EvalArgs>();
    {
        CLI::App* cmd = app.add_subcommand("eval", "evaluate a trained model on a split");
        eval_args->manifest_opt = cmd->add_option("--manifest", eval_args->manifest, "labeled manifest");
        cmd->add_option("--model", eval_args->model, "model file")->required();
        cmd->add_option("--split", eval_args->split, "evaluation split")
            ->check(CLI::IsMember({"train", "val", "test", "all"}));
        eval_args->report_opt = cmd->add_option("--report", eval_args->report, "write a report JSON");
        eval_args->features.add_options(cmd);
        cmd->callback([ctx, eval_args] {
            ctx->prepare();
            run_eval(*ctx, *eval_args);
        });
    }

    // protocol
    auto protocol_args = std::make_shared<ProtocolArgs>();
    {
        CLI::App* cmd = app.add_subcommand("protocol", "repeated train/eval runs with mean (std)");
        protocol_args->manifest_opt =
            cmd->add_option("--manifest", protocol_args->manifest, "labeled manifest");
        cmd->add_option("--train-split", protocol_args->train_split, "training split")
            ->check(CLI::IsMember({"train", "val", "test", "all"}));
        cmd->add_option("--eval-split", protocol_args->eval_split, "evaluation split")
            ->check(CLI::IsMember({"train", "val", "test", "all"}));
        cmd->add_option("--seeds", protocol_args->seeds, "explicit seeds")->delimiter(',');
        protocol_args->repeats_opt =
            cmd->add_option("--repeats", protocol_args->repeats, "seed count when --seeds is absent");
        cmd->add_option("--report", protocol_args->report, "write a summary JSON");
        protocol_args->train.add_options(cmd);
        protocol_args->features.add_options(cmd);
        cmd->callback([ctx, protocol_args] {
            ctx->prepare();
            run_protocol(*ctx, *protocol_args);
        });
    }

    // rank
    auto rank_args = std::make_shared<RankArgs>();
    {
        CLI::App* cmd = app.add_subcommand("rank", "shortlist images by score band and ranking");
        rank_args->manifest_opt = cmd->add_option("--manifest", rank_args->manifest, "input manifest");
        cmd->add_flag("--use-labels", rank_args->use_labels, "rank by manifest labels, not models");
        cmd->add_option("--entity-model", rank_args->entity_model, "entity score model");
        cmd->add_option("--semantic-model", rank_args->semantic_model, "semantic score model");
        rank_args->low_opt =
            cmd->add_option("--entity-low", rank_args->criteria.entity_low, "entity band lower edge");
        rank_args->high_opt =
            cmd->add_option("--entity-high", rank_args->criteria.entity_high, "entity band upper edge");
        rank_args->topk_opt = cmd->add_option("--top-k", rank_args->criteria.top_k, "shortlist size");
        rank_args->minsem_opt =
            cmd->add_option("--min-semantic", rank_args->criteria.min_semantic, "semantic floor");
        cmd->add_option("--out", rank_args->out, "write the shortlist as JSONL");
        rank_args->features.add_options(cmd);
        cmd->callback([ctx, rank_args] {
            ctx->prepare();
            run_rank(*ctx, *rank_args);
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        ctx->prepare();
        log::error(e.what());
        return 1;
    } catch (const std::exception& e) {
        ctx->prepare();
        log::error(e.what());
        return 1;
    }
    return ctx->exit_code;
}

} // namespace isa::cli
