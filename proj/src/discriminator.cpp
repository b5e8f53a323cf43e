#include "isa/discriminator.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <unordered_map>

#include <json.hpp>

#include "isa/kernels.hpp"
#include "isa/logging.hpp"

namespace isa::discriminator {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Tokenization helpers

std::size_t count_tokens(std::string_view text) {
    std::size_t n = 0;
    bool in_token = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_token = false;
        } else if (!in_token) {
            ++n;
            in_token = true;
        }
    }
    return n;
}

std::string truncate_tokens(std::string_view text, int max_tokens) {
    if (max_tokens <= 0) return std::string(text);
    std::size_t n = 0;
    bool in_token = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            in_token = false;
        } else if (!in_token) {
            if (n == static_cast<std::size_t>(max_tokens)) return std::string(text.substr(0, i));
            ++n;
            in_token = true;
        }
    }
    return std::string(text);
}

// ---------------------------------------------------------------------------
// Example assembly

std::vector<Example> build_examples(std::span<const ImageRecord> records,
                                    std::span<const extraction::FeatureBundle> bundles, ScoreKind kind,
                                    extraction::Ablation ablation, std::vector<std::string>* skipped) {
    std::unordered_map<std::string_view, const ImageRecord*> by_id;
    by_id.reserve(records.size());
    for (const ImageRecord& record : records) by_id.emplace(record.id, &record);

    std::vector<Example> examples;
    examples.reserve(bundles.size());
    for (const extraction::FeatureBundle& bundle : bundles) {
        const auto it = by_id.find(bundle.image_id);
        if (it == by_id.end())
            throw InvalidInput("feature bundle without manifest record: " + bundle.image_id);
        const std::optional<double> label = it->second->score(kind);
        if (!label) {
            if (skipped)
                skipped->push_back(bundle.image_id + ": no " + std::string(to_string(kind)) + " label");
            continue;
        }
        Example example;
        example.image_id = bundle.image_id;
        example.text = extraction::compose_input(bundle, ablation);
        example.image_path = it->second->path;
        example.label = *label;
        examples.push_back(std::move(example));
    }
    return examples;
}

// ---------------------------------------------------------------------------
// Hashed bag-of-tokens ridge adapter
//
// Tokens are whitespace-separated, ASCII-lowercased, hashed into
// `feature_dim` count buckets with a seeded FNV-1a, plus a bias column.
// The ridge system (X'X + l2*I) w = X'y is solved by Cholesky; everything
// is closed-form and deterministic.

namespace {

std::uint64_t hash_token(std::string_view token, std::uint64_t seed) {
    std::uint64_t h = 14695981039346656037ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
    for (unsigned char c : token) {
        if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// sparse count vector over the first max_text_tokens tokens: sorted
// (bucket, count) pairs
std::vector<std::pair<std::uint32_t, double>> hash_counts(std::string_view text, const TrainConfig& config) {
    std::map<std::uint32_t, double> counts;
    std::size_t start = 0;
    int taken = 0;
    while (start < text.size()) {
        while (start < text.size() && std::isspace(static_cast<unsigned char>(text[start]))) ++start;
        std::size_t end = start;
        while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
        if (end > start) {
            if (config.max_text_tokens > 0 && taken >= config.max_text_tokens) break;
            ++taken;
            const std::uint32_t bucket = static_cast<std::uint32_t>(
                hash_token(text.substr(start, end - start), config.seed) % config.feature_dim);
            counts[bucket] += 1.0;
        }
        start = end;
    }
    return {counts.begin(), counts.end()};
}

// in-place Cholesky factorization of the lower triangle, then solve
void cholesky_solve(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double* row_i = a.data() + i * n;
        for (std::size_t j = 0; j < i; ++j) {
            const double* row_j = a.data() + j * n;
            row_i[j] = (row_i[j] - kernels::dot({row_i, j}, {row_j, j})) / row_j[j];
        }
        const double diag = row_i[i] - kernels::dot({row_i, i}, {row_i, i});
        if (!(diag > 0.0))
            throw DegenerateInput("ridge system is not positive definite (diagonal " +
                                  std::to_string(diag) + " at " + std::to_string(i) + ")");
        row_i[i] = std::sqrt(diag);
    }
    // forward: L z = b
    for (std::size_t i = 0; i < n; ++i) {
        const double* row_i = a.data() + i * n;
        b[i] = (b[i] - kernels::dot({row_i, i}, {b.data(), i})) / row_i[i];
    }
    // backward: L' w = z
    for (std::size_t ii = n; ii-- > 0;) {
        double sum = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) sum -= a[k * n + ii] * b[k];
        b[ii] = sum / a[ii * n + ii];
    }
}

class HashedRidgeAdapter final : public Adapter {
public:
    std::string id() const override { return "hashed_ridge"; }

    std::vector<double> fit(std::span<const Example> examples, const TrainConfig& config) const override {
        const std::size_t d = config.feature_dim;
        const std::size_t n = d + 1; // + bias column
        std::vector<double> gram(n * n, 0.0);
        std::vector<double> rhs(n, 0.0);

        for (const Example& example : examples) {
            auto counts = hash_counts(example.text, config);
            counts.emplace_back(static_cast<std::uint32_t>(d), 1.0); // bias
            for (const auto& [i, ci] : counts) {
                rhs[i] += ci * example.label;
                double* row = gram.data() + static_cast<std::size_t>(i) * n;
                for (const auto& [j, cj] : counts) row[j] += ci * cj;
            }
        }
        for (std::size_t i = 0; i < n; ++i) gram[i * n + i] += config.l2;

        cholesky_solve(gram, rhs, n);
        return rhs;
    }

    double predict_raw(std::string_view text, std::span<const double> blob,
                       const TrainConfig& config) const override {
        if (blob.size() != config.feature_dim + 1)
            throw InvalidInput("model blob size " + std::to_string(blob.size()) +
                               " does not match feature_dim " + std::to_string(config.feature_dim));
        double score = blob[config.feature_dim]; // bias
        for (const auto& [bucket, count] : hash_counts(text, config)) score += blob[bucket] * count;
        return score;
    }
};

using Factory = std::function<std::unique_ptr<Adapter>()>;

std::map<std::string, Factory>& registry() {
    static std::map<std::string, Factory> factories = {
        {"hashed_ridge", [] { return std::make_unique<HashedRidgeAdapter>(); }},
    };
    return factories;
}

std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

void register_adapter(const std::string& name, Factory factory) {
    std::lock_guard<std::mutex> lock(registry_mutex());
    registry()[name] = std::move(factory);
}

std::unique_ptr<Adapter> make_adapter(const std::string& name) {
    std::lock_guard<std::mutex> lock(registry_mutex());
    const auto it = registry().find(name);
    if (it == registry().end()) throw InvalidInput("unknown discriminator adapter: '" + name + "'");
    return it->second();
}

std::vector<std::string> adapter_names() {
    std::lock_guard<std::mutex> lock(registry_mutex());
    std::vector<std::string> names;
    for (const auto& [name, factory] : registry()) names.push_back(name);
    return names;
}

// ---------------------------------------------------------------------------
// Model artifact

RegressorModel RegressorModel::train(std::vector<Example> examples, const TrainConfig& config) {
    if (examples.empty()) throw InvalidInput("cannot train on an empty example set");
    if (config.feature_dim == 0) throw InvalidInput("feature_dim must be positive");
    if (!(config.l2 > 0.0)) throw InvalidInput("l2 must be positive");
    if (config.batch_size < 1) throw InvalidInput("batch_size must be >= 1");
    if (config.max_text_tokens < 1) throw InvalidInput("max_text_tokens must be >= 1");
    for (const Example& example : examples) {
        if (!(example.label >= 0.0 && example.label <= 1.0))
            throw InvalidInput("label out of [0,1] for " + example.image_id + ": " +
                               std::to_string(example.label));
    }
    // canonical order: the fit must not depend on how callers shuffled the set
    std::sort(examples.begin(), examples.end(), [](const Example& a, const Example& b) {
        return std::tie(a.text, a.label, a.image_id) < std::tie(b.text, b.label, b.image_id);
    });

    RegressorModel model;
    model.adapter_ = make_adapter(config.adapter);
    model.config_ = config;
    model.example_count_ = examples.size();
    model.blob_ = model.adapter_->fit(examples, config);
    return model;
}

double RegressorModel::predict(std::string_view text, std::string_view image_path) const {
    if (!image_path.empty() && !adapter_->supports_image())
        log::warn("adapter is text-only; image input ignored",
                  {{"adapter", config_.adapter}, {"image", std::string(image_path)}});
    const double raw = adapter_->predict_raw(text, blob_, config_);
    return std::clamp(raw, 0.0, 1.0);
}

std::vector<double> RegressorModel::predict(std::span<const Example> examples) const {
    std::vector<double> out;
    out.reserve(examples.size());
    for (const Example& example : examples) out.push_back(predict(example.text));
    return out;
}

namespace {

constexpr char kMagic[8] = {'I', 'S', 'A', 'M', 'D', 'L', '0', '1'};

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& data, std::size_t pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    return v;
}

} // namespace

void RegressorModel::save(const std::filesystem::path& path) const {
    json header;
    header["ablation"] = std::string(extraction::to_string(config_.ablation));
    header["adapter"] = config_.adapter;
    header["batch_size"] = config_.batch_size;
    header["epochs"] = config_.epochs;
    header["example_count"] = example_count_;
    header["feature_dim"] = config_.feature_dim;
    header["kind"] = std::string(to_string(config_.score_kind));
    header["l2"] = config_.l2;
    header["lr"] = config_.lr;
    header["max_text_tokens"] = config_.max_text_tokens;
    header["schema_version"] = 1;
    header["seed"] = config_.seed;
    const std::string header_text = header.dump();

    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u64(out, header_text.size());
    out += header_text;
    put_u64(out, blob_.size());
    for (double v : blob_) put_u64(out, std::bit_cast<std::uint64_t>(v));

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write model: " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("model write failed: " + path.string());
}

RegressorModel RegressorModel::load(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot read model: " + path.string());
    std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

    if (data.size() < sizeof(kMagic) + 8 || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0)
        throw InvalidInput("not a model file: " + path.string());
    std::size_t pos = sizeof(kMagic);
    const std::uint64_t header_len = get_u64(data, pos);
    pos += 8;
    if (pos + header_len + 8 > data.size()) throw InvalidInput("truncated model file: " + path.string());

    json header;
    try {
        header = json::parse(data.substr(pos, header_len));
    } catch (const json::exception& e) {
        throw InvalidInput("bad model header: " + std::string(e.what()));
    }
    pos += header_len;
    const std::uint64_t blob_len = get_u64(data, pos);
    pos += 8;
    if (pos + blob_len * 8 != data.size()) throw InvalidInput("truncated model file: " + path.string());

    RegressorModel model;
    try {
        if (header.at("schema_version").get<int>() != 1)
            throw InvalidInput("unsupported model schema_version");
        model.config_.ablation = extraction::ablation_from_string(header.at("ablation").get<std::string>());
        model.config_.adapter = header.at("adapter").get<std::string>();
        model.config_.batch_size = header.at("batch_size").get<int>();
        model.config_.epochs = header.at("epochs").get<int>();
        model.config_.feature_dim = header.at("feature_dim").get<std::size_t>();
        model.config_.l2 = header.at("l2").get<double>();
        model.config_.lr = header.at("lr").get<double>();
        model.config_.max_text_tokens = header.at("max_text_tokens").get<int>();
        model.config_.score_kind = score_kind_from_string(header.at("kind").get<std::string>());
        model.config_.seed = header.at("seed").get<std::uint64_t>();
        model.example_count_ = header.at("example_count").get<std::size_t>();
    } catch (const json::exception& e) {
        throw InvalidInput("bad model header field: " + std::string(e.what()));
    }
    model.adapter_ = make_adapter(model.config_.adapter);
    model.blob_.reserve(blob_len);
    for (std::uint64_t i = 0; i < blob_len; ++i)
        model.blob_.push_back(std::bit_cast<double>(get_u64(data, pos + i * 8)));
    return model;
}

// ---------------------------------------------------------------------------
// Evaluation and repeated-runs protocol

metrics::MetricReport evaluate(const RegressorModel& model, std::span<const Example> examples,
                               bool with_kendall, std::vector<std::string>* notes) {
    if (examples.empty()) throw InvalidInput("cannot evaluate on an empty example set");
    std::vector<double> labels;
    labels.reserve(examples.size());
    for (const Example& example : examples) labels.push_back(example.label);
    const std::vector<double> preds = model.predict(examples);
    if (notes && !preds.empty() &&
        std::all_of(preds.begin(), preds.end(), [&](double p) { return p == preds.front(); }))
        notes->push_back("degenerate predictor: constant output " + std::to_string(preds.front()));
    return metrics::compute_report(labels, preds, with_kendall, notes);
}

EvalRun evaluate(const RegressorModel& model, std::span<const ImageRecord> records,
                 std::span<const extraction::FeatureBundle> bundles, extraction::Ablation ablation,
                 bool with_kendall) {
    std::unordered_map<std::string_view, const extraction::FeatureBundle*> by_id;
    by_id.reserve(bundles.size());
    for (const extraction::FeatureBundle& bundle : bundles) by_id.emplace(bundle.image_id, &bundle);

    EvalRun run;
    run.seed = model.config().seed;
    std::vector<Example> examples;
    for (const ImageRecord& record : records) {
        const std::optional<double> label = record.score(model.kind());
        if (!label) continue;
        const auto it = by_id.find(record.id);
        if (it == by_id.end()) {
            ++run.excluded;
            run.notes.push_back("no feature bundle for " + record.id + "; excluded");
            continue;
        }
        Example example;
        example.image_id = record.id;
        example.text = extraction::compose_input(*it->second, ablation);
        example.image_path = record.path;
        example.label = *label;
        examples.push_back(std::move(example));
    }
    run.report = evaluate(model, examples, with_kendall, &run.notes);
    return run;
}

ProtocolResult run_protocol(const std::vector<Example>& train_set, const std::vector<Example>& test_set,
                            const TrainConfig& base, std::span<const std::uint64_t> seeds, bool with_kendall,
                            const std::function<void(std::uint64_t, const metrics::MetricReport&)>& on_run) {
    if (seeds.empty()) throw InvalidInput("protocol needs at least one seed");
    ProtocolResult result;
    for (const std::uint64_t seed : seeds) {
        TrainConfig run_config = base;
        run_config.seed = seed;
        const RegressorModel model = RegressorModel::train(train_set, run_config);
        metrics::MetricReport report = evaluate(model, test_set, with_kendall);
        if (on_run) on_run(seed, report);
        result.seeds.push_back(seed);
        result.runs.push_back(std::move(report));
    }
    result.summary = metrics::summarize_runs(result.runs);
    return result;
}

} // namespace isa::discriminator
