#include "isa/extraction.hpp"

// Text-side half of the extraction module: prompts, CoR parsing, input
// composition, bundle serialization, the feature cache, and the mock
// client. The HTTP client and the batch driver live in extraction_http.cpp
// so that targets without network needs stay free of TLS dependencies.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "isa/logging.hpp"

namespace isa::extraction {

using nlohmann::json;

namespace {

struct CategoryNames {
    CoRCategory category;
    std::string_view id;
    std::string_view display;
};

constexpr std::array<CategoryNames, 7> kCategoryNames = {{
    {CoRCategory::special_time, "special_time", "Special Time"},
    {CoRCategory::special_location, "special_location", "Special Location"},
    {CoRCategory::character_role, "character_role", "Character Role"},
    {CoRCategory::character_relationship, "character_relationship", "Character Relationship"},
    {CoRCategory::high_level_event, "high_level_event", "High-level Event"},
    {CoRCategory::event_causal_relationship, "event_causal_relationship", "Event Causal Relationship"},
    {CoRCategory::mental_state, "mental_state", "Mental State"},
}};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

} // namespace

std::string_view to_string(CoRCategory category) {
    for (const auto& names : kCategoryNames)
        if (names.category == category) return names.id;
    throw InvalidInput("corrupt CoR category");
}

std::string_view display_name(CoRCategory category) {
    for (const auto& names : kCategoryNames)
        if (names.category == category) return names.display;
    throw InvalidInput("corrupt CoR category");
}

CoRCategory category_from_string(std::string_view s) {
    for (const auto& names : kCategoryNames)
        if (names.id == s) return names.category;
    throw InvalidInput("unknown CoR category: '" + std::string(s) + "'");
}

std::optional<CoRCategory> category_from_display(std::string_view heading) {
    const std::string needle = lower(trim(heading));
    for (const auto& names : kCategoryNames) {
        if (needle == lower(names.display) || needle == names.id) return names.category;
    }
    return std::nullopt;
}

std::string_view to_string(Mode mode) { return mode == Mode::naive ? "naive" : "cot"; }

Mode mode_from_string(std::string_view s) {
    if (s == "naive") return Mode::naive;
    if (s == "cot") return Mode::cot;
    throw InvalidInput("unknown extraction mode: '" + std::string(s) + "' (expected naive|cot)");
}

std::string_view to_string(Ablation ablation) {
    switch (ablation) {
        case Ablation::full: return "full";
        case Ablation::no_cors: return "no_cors";
        case Ablation::no_description: return "no_description";
    }
    throw InvalidInput("corrupt ablation value");
}

Ablation ablation_from_string(std::string_view s) {
    if (s == "full") return Ablation::full;
    if (s == "no_cors") return Ablation::no_cors;
    if (s == "no_description") return Ablation::no_description;
    throw InvalidInput("unknown ablation: '" + std::string(s) + "' (expected full|no_cors|no_description)");
}

// ---------------------------------------------------------------------------
// Prompts and CoR text layout

std::string cor_prompt() {
    std::string prompt =
        "Look at this image and extract chains of reasoning. A chain of reasoning pairs the "
        "visual clues you can observe with the conclusion those clues support.\n"
        "Cover these seven categories, in this order: ";
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
        if (i) prompt += ", ";
        prompt += kCategoryNames[i].display;
    }
    prompt +=
        ".\n"
        "Answer in exactly this layout, one block per category:\n"
        "\n"
        "[Special Time]\n"
        "Clues: first clue; second clue\n"
        "Conclusion: what the clues imply\n"
        "\n"
        "Write None instead of the Clues/Conclusion lines when a category does not apply to the "
        "image. Repeat the Clues/Conclusion pair inside a category for each separate finding. "
        "Do not add any other text.";
    return prompt;
}

std::string reformat_prompt(std::string_view previous_response) {
    std::string prompt =
        "Your previous answer could not be parsed. Rewrite it in exactly this layout, one block "
        "per category, with no other text:\n"
        "\n"
        "[Special Time]\n"
        "Clues: first clue; second clue\n"
        "Conclusion: what the clues imply\n"
        "\n"
        "Use every category heading in this order: ";
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
        if (i) prompt += ", ";
        prompt += "[";
        prompt += kCategoryNames[i].display;
        prompt += "]";
    }
    prompt += ". Write None under a heading when the category does not apply.\n\nPrevious answer:\n";
    prompt += previous_response;
    return prompt;
}

std::string render_cors(const CoRMap& cors) {
    std::string out;
    bool first = true;
    for (CoRCategory category : kAllCategories) {
        if (!first) out += '\n';
        first = false;
        out += '[';
        out += display_name(category);
        out += "]\n";
        const auto it = cors.find(category);
        if (it == cors.end() || it->second.empty()) {
            out += "None\n";
            continue;
        }
        for (const CoR& cor : it->second) {
            out += "Clues: ";
            for (std::size_t i = 0; i < cor.clues.size(); ++i) {
                if (i) out += "; ";
                out += cor.clues[i];
            }
            out += "\nConclusion: ";
            out += cor.conclusion;
            out += '\n';
        }
    }
    return out;
}

std::string description_prompt(const CoRMap& cors) {
    std::string prompt = "Here are chains of reasoning already extracted from this image:\n\n";
    prompt += render_cors(cors);
    prompt += "\nBased on these chains of reasoning, describe this image in detail.";
    return prompt;
}

CorParseResult parse_cor_response(std::string_view text) {
    CorParseResult result;
    std::optional<CoRCategory> current;
    std::optional<CoR> pending;       // has clues, waiting for a conclusion
    CoR* last_complete = nullptr;     // target for continuation lines

    auto flush_pending = [&](bool warn) {
        if (pending) {
            if (warn)
                result.warnings.push_back("clues without conclusion dropped in category '" +
                                          std::string(current ? display_name(*current) : "?") + "'");
            pending.reset();
        }
    };

    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = trim(text.substr(pos, eol == std::string_view::npos ? text.size() - pos
                                                                                    : eol - pos));
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        if (line.empty()) continue;

        if (line.front() == '[' && line.back() == ']') {
            flush_pending(true);
            last_complete = nullptr;
            const auto category = category_from_display(line.substr(1, line.size() - 2));
            if (category) {
                current = category;
                result.cors[*category]; // materialize the key
            } else {
                current.reset();
                result.warnings.push_back("unknown category heading ignored: " + std::string(line));
            }
            continue;
        }
        if (!current) continue; // prose before the first heading

        const std::string low = lower(line.substr(0, std::min<std::size_t>(line.size(), 11)));
        if (low.rfind("clues:", 0) == 0) {
            flush_pending(true);
            pending = CoR{};
            std::string_view rest = trim(line.substr(6));
            std::size_t start = 0;
            while (start <= rest.size()) {
                std::size_t sep = rest.find(';', start);
                std::string_view clue =
                    trim(rest.substr(start, sep == std::string_view::npos ? rest.size() - start : sep - start));
                if (!clue.empty()) pending->clues.push_back(std::string(clue));
                if (sep == std::string_view::npos) break;
                start = sep + 1;
            }
            continue;
        }
        if (low.rfind("conclusion:", 0) == 0) {
            std::string conclusion(trim(line.substr(11)));
            if (conclusion.empty()) {
                result.warnings.push_back("empty conclusion dropped in category '" +
                                          std::string(display_name(*current)) + "'");
                pending.reset();
                continue;
            }
            CoR cor = pending ? std::move(*pending) : CoR{};
            pending.reset();
            if (cor.clues.empty())
                result.warnings.push_back("conclusion without clues in category '" +
                                          std::string(display_name(*current)) + "'");
            cor.conclusion = std::move(conclusion);
            result.cors[*current].push_back(std::move(cor));
            last_complete = &result.cors[*current].back();
            continue;
        }
        if (lower(line) == "none") {
            flush_pending(true);
            last_complete = nullptr;
            continue;
        }
        // continuation text: extend the open clue list or the last conclusion
        if (pending && !pending->clues.empty()) {
            pending->clues.back() += ' ';
            pending->clues.back() += line;
        } else if (last_complete) {
            last_complete->conclusion += ' ';
            last_complete->conclusion += line;
        }
    }
    flush_pending(true);

    if (result.cors.empty()) {
        result.ok = false;
        result.error = "no category headings found";
        return result;
    }
    for (CoRCategory category : kAllCategories) {
        if (!result.cors.count(category)) {
            result.cors[category] = {};
            result.warnings.push_back("category '" + std::string(display_name(category)) +
                                      "' missing from response; stored empty");
        }
    }
    result.ok = true;
    return result;
}

std::string compose_input(const FeatureBundle& bundle, Ablation ablation) {
    if (bundle.mode == Mode::naive) {
        if (ablation != Ablation::full)
            throw InvalidInput("ablation '" + std::string(to_string(ablation)) +
                               "' requires a cot bundle, got naive");
        return bundle.description;
    }
    if (!bundle.cors) throw InvalidInput("cot bundle without cors: " + bundle.image_id);
    switch (ablation) {
        case Ablation::no_cors: return bundle.description;
        case Ablation::no_description: return render_cors(*bundle.cors);
        case Ablation::full: return render_cors(*bundle.cors) + "\n" + bundle.description;
    }
    throw InvalidInput("corrupt ablation value");
}

// ---------------------------------------------------------------------------
// Bundle serialization

std::string bundle_to_json_line(const FeatureBundle& bundle) {
    json j;
    j["image_id"] = bundle.image_id;
    j["mode"] = std::string(to_string(bundle.mode));
    j["description"] = bundle.description;
    if (bundle.mode == Mode::cot) {
        if (!bundle.cors) throw InvalidInput("cot bundle without cors: " + bundle.image_id);
        json cors = json::object();
        for (CoRCategory category : kAllCategories) {
            json list = json::array();
            const auto it = bundle.cors->find(category);
            if (it != bundle.cors->end()) {
                for (const CoR& cor : it->second) {
                    json item;
                    item["clues"] = cor.clues;
                    item["conclusion"] = cor.conclusion;
                    list.push_back(std::move(item));
                }
            }
            cors[std::string(to_string(category))] = std::move(list);
        }
        j["cors"] = std::move(cors);
    } else if (bundle.cors) {
        throw InvalidInput("naive bundle must not carry cors: " + bundle.image_id);
    }
    j["extractor_id"] = bundle.extractor_id;
    j["prompt_version"] = bundle.prompt_version;
    j["raw_response"] = bundle.raw_response;
    return j.dump();
}

FeatureBundle bundle_from_json_line(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("malformed feature bundle: ") + e.what());
    }
    FeatureBundle bundle;
    try {
        bundle.image_id = j.at("image_id").get<std::string>();
        bundle.mode = mode_from_string(j.at("mode").get<std::string>());
        bundle.description = j.at("description").get<std::string>();
        bundle.extractor_id = j.at("extractor_id").get<std::string>();
        bundle.prompt_version = j.at("prompt_version").get<int>();
        bundle.raw_response = j.at("raw_response").get<std::string>();
        if (bundle.mode == Mode::cot) {
            if (!j.contains("cors")) throw InvalidInput("cot bundle without cors field");
            CoRMap cors;
            for (CoRCategory category : kAllCategories) cors[category] = {};
            for (const auto& [key, list] : j.at("cors").items()) {
                const CoRCategory category = category_from_string(key);
                for (const auto& item : list) {
                    CoR cor;
                    cor.clues = item.at("clues").get<std::vector<std::string>>();
                    cor.conclusion = item.at("conclusion").get<std::string>();
                    cors[category].push_back(std::move(cor));
                }
            }
            bundle.cors = std::move(cors);
        } else if (j.contains("cors") && !j.at("cors").is_null()) {
            throw InvalidInput("naive bundle must not carry cors");
        }
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("bad feature bundle field: ") + e.what());
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// Mock backend

namespace {

std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

class MockClient final : public VlmClient {
public:
    explicit MockClient(std::filesystem::path fixture_dir) : dir_(std::move(fixture_dir)) {
        if (dir_.empty()) throw InvalidInput("mock extractor needs a fixture directory");
    }

    std::string id() const override { return "mock"; }

    std::string complete(const VlmRequest& request) override {
        count_request();
        const char* suffix = nullptr;
        switch (request.kind) {
            case RequestKind::naive: suffix = ".naive.txt"; break;
            case RequestKind::cor: suffix = ".cors.txt"; break;
            case RequestKind::cor_reformat: suffix = ".cors.reformat.txt"; break;
            case RequestKind::description: suffix = ".desc.txt"; break;
        }
        const std::filesystem::path file = dir_ / (request.image_id + suffix);
        if (!std::filesystem::exists(file))
            throw ExtractionError(request.image_id, "mock fixture missing: " + file.string());
        return read_file_bytes(file);
    }

private:
    std::filesystem::path dir_;
};

} // namespace

std::unique_ptr<VlmClient> make_mock_client(const std::filesystem::path& fixture_dir) {
    return std::make_unique<MockClient>(fixture_dir);
}

// ---------------------------------------------------------------------------
// Extraction operations

namespace {

void require_readable_image(const ImageRecord& image) {
    std::error_code ec;
    if (image.path.empty() || !std::filesystem::is_regular_file(image.path, ec))
        throw ExtractionError(image.id, "image file not readable: " + image.path);
}

std::string require_non_empty(const ImageRecord& image, std::string text, const char* what) {
    if (trim(text).empty())
        throw ExtractionError(image.id, std::string("empty model response for ") + what);
    return text;
}

} // namespace

ExtractionOutcome extract_naive(const ImageRecord& image, const ExtractorConfig& config, VlmClient& client) {
    require_readable_image(image);
    VlmRequest request{image.id, image.path, std::string(kNaivePrompt), RequestKind::naive};
    std::string response = require_non_empty(image, client.complete(request), "description");

    ExtractionOutcome outcome;
    outcome.bundle.image_id = image.id;
    outcome.bundle.mode = Mode::naive;
    outcome.bundle.description = response;
    outcome.bundle.extractor_id = client.id();
    outcome.bundle.prompt_version = config.prompt_version;
    outcome.bundle.raw_response = std::move(response);
    return outcome;
}

ExtractionOutcome extract_cot(const ImageRecord& image, const ExtractorConfig& config, VlmClient& client) {
    require_readable_image(image);

    const std::string cor_text =
        require_non_empty(image, client.complete({image.id, image.path, cor_prompt(), RequestKind::cor}),
                          "chains of reasoning");
    std::string raw = cor_text;
    CorParseResult parsed = parse_cor_response(cor_text);
    if (!parsed.ok) {
        // one reformat retry; the model rewrites its own text, no image needed
        const std::string retry_text = client.complete(
            {image.id, std::string(), reformat_prompt(cor_text), RequestKind::cor_reformat});
        raw += "\n\n--- reformatted ---\n\n" + retry_text;
        parsed = parse_cor_response(retry_text);
        if (!parsed.ok)
            throw ExtractionError(image.id, "unparseable CoR response after reformat retry: " + parsed.error,
                                  raw);
    }

    const std::string desc_text = require_non_empty(
        image,
        client.complete({image.id, image.path, description_prompt(parsed.cors), RequestKind::description}),
        "description");
    raw += "\n\n--- description ---\n\n" + desc_text;

    ExtractionOutcome outcome;
    outcome.bundle.image_id = image.id;
    outcome.bundle.mode = Mode::cot;
    outcome.bundle.description = desc_text;
    outcome.bundle.cors = std::move(parsed.cors);
    outcome.bundle.extractor_id = client.id();
    outcome.bundle.prompt_version = config.prompt_version;
    outcome.bundle.raw_response = std::move(raw);
    outcome.warnings = std::move(parsed.warnings);
    return outcome;
}

// ---------------------------------------------------------------------------
// Cache

namespace {

std::string cache_key(const std::string& image_id, Mode mode, const std::string& extractor_id,
                      int prompt_version) {
    std::string key = image_id;
    key += '\x1f';
    key += to_string(mode);
    key += '\x1f';
    key += extractor_id;
    key += '\x1f';
    key += std::to_string(prompt_version);
    return key;
}

} // namespace

FeatureCache::FeatureCache(std::filesystem::path file) : file_(std::move(file)) {
    if (!std::filesystem::exists(file_)) return;
    std::ifstream in(file_);
    if (!in) throw IoError("cannot open feature cache: " + file_.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            FeatureBundle bundle = bundle_from_json_line(line);
            std::string key = cache_key(bundle.image_id, bundle.mode, bundle.extractor_id,
                                        bundle.prompt_version);
            entries_.insert_or_assign(std::move(key), std::move(bundle));
        } catch (const InvalidInput& e) {
            log::warn("skipping malformed cache line",
                      {{"file", file_.string()}, {"line", std::to_string(line_no)}, {"error", e.what()}});
        }
    }
}

std::size_t FeatureCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
}

const FeatureBundle* FeatureCache::find(const std::string& image_id, Mode mode,
                                        const std::string& extractor_id, int prompt_version) const {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = entries_.find(cache_key(image_id, mode, extractor_id, prompt_version));
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<FeatureBundle> FeatureCache::all() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<FeatureBundle> bundles;
    bundles.reserve(entries_.size());
    for (const auto& [key, bundle] : entries_) bundles.push_back(bundle);
    return bundles;
}

void FeatureCache::append(const FeatureBundle& bundle) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
    std::ofstream out(file_, std::ios::app);
    if (!out) throw IoError("cannot append to feature cache: " + file_.string());
    out << bundle_to_json_line(bundle) << '\n';
    if (!out) throw IoError("cache write failed: " + file_.string());
    entries_.insert_or_assign(cache_key(bundle.image_id, bundle.mode, bundle.extractor_id,
                                        bundle.prompt_version),
                              bundle);
}

} // namespace isa::extraction
