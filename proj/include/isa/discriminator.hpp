#pragma once
// Regression discriminators: map extracted text features to complexity
// scores in [0, 1]. A small adapter contract keeps the training/eval
// plumbing independent of the concrete regression backend.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "isa/core.hpp"
#include "isa/extraction.hpp"
#include "isa/metrics.hpp"

namespace isa::discriminator {

// one training/eval example: composed text input plus its label; the image
// path is carried along for adapters that can consume pixels
struct Example {
    std::string image_id;
    std::string text;
    std::string image_path; // may be empty
    double label = 0.0;
};

struct TrainConfig {
    std::string adapter = "hashed_ridge";
    ScoreKind score_kind = ScoreKind::entity;
    extraction::Ablation ablation = extraction::Ablation::full;
    std::uint64_t seed = 17;
    std::size_t feature_dim = 1024; // hashed_ridge bucket count
    double l2 = 1e-3;
    int batch_size = 16;
    int max_text_tokens = 1024; // truncation budget, counted by the adapter's tokenizer
    double lr = 2e-5;           // recorded for gradient adapters; unused by the closed-form fit
    int epochs = 10;
};

// Pairs manifest records with their feature bundles for one score kind and
// composes the discriminator input text. Records without a label for `kind`
// are skipped with a note in `skipped`; a bundle whose image_id has no
// manifest record is an error.
std::vector<Example> build_examples(std::span<const ImageRecord> records,
                                    std::span<const extraction::FeatureBundle> bundles, ScoreKind kind,
                                    extraction::Ablation ablation = extraction::Ablation::full,
                                    std::vector<std::string>* skipped = nullptr);

// whitespace-delimited tokens — the reference adapter's tokenizer
std::size_t count_tokens(std::string_view text);
std::string truncate_tokens(std::string_view text, int max_tokens); // max_tokens <= 0: no-op

// Backend contract. fit() returns an opaque flat blob of doubles that
// predict_raw() consumes; the artifact writer stores it verbatim. Adapters
// own tokenization and the max_text_tokens truncation.
class Adapter {
public:
    virtual ~Adapter() = default;
    virtual std::string id() const = 0;
    virtual bool supports_image() const { return false; }
    virtual std::vector<double> fit(std::span<const Example> examples, const TrainConfig& config) const = 0;
    virtual double predict_raw(std::string_view text, std::span<const double> blob,
                               const TrainConfig& config) const = 0;
};

// Adapters are looked up by name; register_adapter lets alternate backends
// plug in without touching the trainer.
void register_adapter(const std::string& name, std::function<std::unique_ptr<Adapter>()> factory);
std::unique_ptr<Adapter> make_adapter(const std::string& name);
std::vector<std::string> adapter_names();

// Trained artifact. Training sorts examples into a canonical order first,
// so the fit is invariant to shuffling of the input set, and is fully
// deterministic for a given (examples, config) pair: saving twice yields
// byte-identical files.
class RegressorModel {
public:
    static RegressorModel train(std::vector<Example> examples, const TrainConfig& config);

    // clamped to [0, 1]; an image passed to a text-only adapter is ignored
    // with a logged warning
    double predict(std::string_view text, std::string_view image_path = {}) const;
    std::vector<double> predict(std::span<const Example> examples) const;

    void save(const std::filesystem::path& path) const;
    static RegressorModel load(const std::filesystem::path& path);

    const TrainConfig& config() const { return config_; }
    ScoreKind kind() const { return config_.score_kind; }
    std::size_t example_count() const { return example_count_; }
    std::span<const double> blob() const { return blob_; }

private:
    RegressorModel() = default;

    TrainConfig config_;
    std::size_t example_count_ = 0;
    std::vector<double> blob_;
    std::shared_ptr<const Adapter> adapter_;
};

// metrics over pre-composed examples
metrics::MetricReport evaluate(const RegressorModel& model, std::span<const Example> examples,
                               bool with_kendall = true, std::vector<std::string>* notes = nullptr);

// record-level evaluation: labeled records lacking a feature bundle are
// excluded and counted, not fatal
struct EvalRun {
    metrics::MetricReport report;
    std::size_t excluded = 0;
    std::vector<std::string> notes;
    std::uint64_t seed = 0;
};

EvalRun evaluate(const RegressorModel& model, std::span<const ImageRecord> records,
                 std::span<const extraction::FeatureBundle> bundles, extraction::Ablation ablation,
                 bool with_kendall = true);

// Repeated-runs protocol: one training per seed, each evaluated on the same
// test set, summarized as mean (std). `on_run` (if set) fires after every
// completed run so callers can persist partial results; a failed run then
// aborts with the earlier runs already persisted.
struct ProtocolResult {
    std::vector<std::uint64_t> seeds;
    std::vector<metrics::MetricReport> runs;
    metrics::RunSummary summary;
};

ProtocolResult run_protocol(const std::vector<Example>& train_set, const std::vector<Example>& test_set,
                            const TrainConfig& base, std::span<const std::uint64_t> seeds,
                            bool with_kendall = true,
                            const std::function<void(std::uint64_t, const metrics::MetricReport&)>& on_run = {});

} // namespace isa::discriminator
