#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "isa/core.hpp"

namespace isa::extraction {

// The single-shot description prompt. Fixed byte-for-byte; the cache key
// versioning assumes it never changes.
inline constexpr std::string_view kNaivePrompt = "Describe this image in detail.";

enum class CoRCategory {
    special_time,
    special_location,
    character_role,
    character_relationship,
    high_level_event,
    event_causal_relationship,
    mental_state,
};

inline constexpr std::array<CoRCategory, 7> kAllCategories = {
    CoRCategory::special_time,          CoRCategory::special_location,
    CoRCategory::character_role,        CoRCategory::character_relationship,
    CoRCategory::high_level_event,      CoRCategory::event_causal_relationship,
    CoRCategory::mental_state,
};

std::string_view to_string(CoRCategory category);            // snake_case id
std::string_view display_name(CoRCategory category);         // "Special Time"
CoRCategory category_from_string(std::string_view s);
std::optional<CoRCategory> category_from_display(std::string_view heading);

// One reasoning step: observed visual clues and the conclusion they support.
struct CoR {
    std::vector<std::string> clues;
    std::string conclusion;

    bool operator==(const CoR&) const = default;
};

using CoRMap = std::map<CoRCategory, std::vector<CoR>>;

enum class Mode { naive, cot };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view s);

struct FeatureBundle {
    std::string image_id;
    Mode mode = Mode::naive;
    std::string description;
    std::optional<CoRMap> cors; // present iff mode == cot; all 7 keys, lists may be empty
    std::string extractor_id;
    int prompt_version = 1;
    std::string raw_response; // verbatim model output, for audit

    bool operator==(const FeatureBundle&) const = default;
};

struct ExtractorConfig {
    std::string backend = "mock"; // "http" | "mock"
    std::string endpoint;         // http(s)://host[:port]/path, e.g. .../v1/chat/completions
    std::string model = "mock";
    double timeout_s = 60.0;
    int max_retries = 2;          // attempts = max_retries + 1
    double temperature = 0.0;
    int max_output_tokens = 1024;
    std::string api_key_env = "ISA_API_KEY";
    std::filesystem::path fixture_dir; // mock backend: canned responses
    int parallelism = 4;
    int prompt_version = 1;
};

class ExtractionError : public Error {
public:
    ExtractionError(std::string image_id, const std::string& what, std::string raw_response = {})
        : Error(what), image_id_(std::move(image_id)), raw_response_(std::move(raw_response)) {}

    const std::string& image_id() const { return image_id_; }
    const std::string& raw_response() const { return raw_response_; }

private:
    std::string image_id_;
    std::string raw_response_;
};

// What a request is for; the HTTP backend ignores it, the mock backend uses
// it to pick the fixture file.
enum class RequestKind { naive, cor, cor_reformat, description };

struct VlmRequest {
    std::string image_id;
    std::string image_path; // empty when the request carries no image
    std::string prompt;
    RequestKind kind = RequestKind::naive;
};

// A vision-language endpoint. complete() returns the model text or throws
// ExtractionError. Implementations must be safe to call from several
// threads at once.
class VlmClient {
public:
    virtual ~VlmClient() = default;

    virtual std::string complete(const VlmRequest& request) = 0;
    virtual std::string id() const = 0;

    std::size_t request_count() const { return requests_.load(); }

protected:
    void count_request() { requests_.fetch_add(1); }

private:
    std::atomic<std::size_t> requests_{0};
};

// Picks the backend named in the config: "http" or "mock".
std::unique_ptr<VlmClient> make_client(const ExtractorConfig& config);

// Reads fixture files from a directory: <id>.naive.txt, <id>.cors.txt,
// <id>.cors.reformat.txt, <id>.desc.txt. Missing file -> ExtractionError.
std::unique_ptr<VlmClient> make_mock_client(const std::filesystem::path& fixture_dir);

struct ExtractionOutcome {
    FeatureBundle bundle;
    std::vector<std::string> warnings;
};

ExtractionOutcome extract_naive(const ImageRecord& image, const ExtractorConfig& config, VlmClient& client);

// Two stages: a structured CoR request for all seven categories, then a
// description conditioned on the parsed CoRs (the image is sent again).
// An unparseable CoR response gets one reformat retry before failing.
ExtractionOutcome extract_cot(const ImageRecord& image, const ExtractorConfig& config, VlmClient& client);

// Prompt texts of the CoT stages, exposed so fixtures and docs stay in sync.
std::string cor_prompt();
std::string reformat_prompt(std::string_view previous_response);
std::string description_prompt(const CoRMap& cors);

// Structured CoR layout parser. ok=false means no usable structure at all;
// missing categories are filled with empty lists and noted in warnings.
struct CorParseResult {
    bool ok = false;
    CoRMap cors;
    std::vector<std::string> warnings;
    std::string error;
};

CorParseResult parse_cor_response(std::string_view text);

// Canonical text form of a CoR map: category-headed, clue list then
// conclusion, fixed seven-category order.
std::string render_cors(const CoRMap& cors);

enum class Ablation { full, no_cors, no_description };

std::string_view to_string(Ablation ablation);
Ablation ablation_from_string(std::string_view s);

// Discriminator input text. full = CoRs then description; the reduced forms
// require a cot bundle.
std::string compose_input(const FeatureBundle& bundle, Ablation ablation);

std::string bundle_to_json_line(const FeatureBundle& bundle);
FeatureBundle bundle_from_json_line(std::string_view line);

// Append-only JSON-lines cache of FeatureBundles, keyed by
// (image_id, mode, extractor_id, prompt_version). Loading tolerates
// malformed lines; on duplicate keys the last line wins.
class FeatureCache {
public:
    explicit FeatureCache(std::filesystem::path file);

    const std::filesystem::path& file() const { return file_; }
    std::size_t size() const;
    const FeatureBundle* find(const std::string& image_id, Mode mode, const std::string& extractor_id,
                              int prompt_version) const;
    void append(const FeatureBundle& bundle);
    std::vector<FeatureBundle> all() const; // key order (deterministic)

private:
    std::filesystem::path file_;
    std::map<std::string, FeatureBundle> entries_;
    mutable std::mutex mutex_;
};

struct BatchFailure {
    std::string image_id;
    std::string error;
};

struct BatchResult {
    std::vector<FeatureBundle> bundles; // manifest order; failed images omitted
    std::vector<BatchFailure> failures;
    std::vector<std::string> warnings;
    std::size_t upstream_requests = 0;
    std::size_t cache_hits = 0;
};

// Fetches every image not already cached, with bounded parallelism. Cache
// appends happen in manifest order so the cache file is byte-stable across
// reruns. Per-image failures are collected; the rest of the batch proceeds.
BatchResult extract_batch(std::span<const ImageRecord> manifest, Mode mode, const ExtractorConfig& config,
                          FeatureCache& cache, VlmClient* injected_client = nullptr);

} // namespace isa::extraction
