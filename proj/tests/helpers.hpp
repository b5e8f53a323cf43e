#pragma once
// Shared fixtures for the test binaries: temp directories, synthetic corpora
// with known structure, mock-backend fixture writers, and a subprocess runner
// for the CLI-level tests.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "isa/core.hpp"
#include "isa/extraction.hpp"

namespace helpers {

class TempDir {
public:
    TempDir() {
        std::mt19937_64 rng(std::random_device{}());
        for (int attempt = 0; attempt < 16; ++attempt) {
            auto candidate = std::filesystem::temp_directory_path() /
                             ("isa_test_" + std::to_string(rng()));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = std::move(candidate);
                return;
            }
        }
        throw std::runtime_error("cannot create temp directory");
    }

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }

    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

// ---------------------------------------------------------------------------
// Synthetic corpora. Labels are a clipped linear function of how often two
// signal tokens appear in otherwise-filler text, so a bag-of-tokens regressor
// can recover them almost exactly and any systematic failure shows up as a
// large, stable error rather than flakiness.

struct SyntheticCorpus {
    std::vector<isa::ImageRecord> records;
    std::vector<isa::extraction::FeatureBundle> bundles;
};

inline constexpr const char* kEntityToken = "lantern";
inline constexpr const char* kSemanticToken = "voyage";

namespace detail {

inline const std::vector<std::string>& filler_vocab() {
    static const std::vector<std::string> words = {
        "the", "scene", "shows", "a", "quiet", "street", "with", "several",
        "people", "walking", "under", "grey", "light", "near", "old", "walls",
    };
    return words;
}

inline std::string build_text(std::mt19937_64& rng, int n_entity, int n_semantic) {
    std::vector<std::string> tokens;
    for (int i = 0; i < n_entity; ++i) tokens.push_back(kEntityToken);
    for (int i = 0; i < n_semantic; ++i) tokens.push_back(kSemanticToken);
    const auto& vocab = filler_vocab();
    const int n_filler = 5 + static_cast<int>(rng() % 11);
    for (int i = 0; i < n_filler; ++i) tokens.push_back(vocab[rng() % vocab.size()]);
    // Fisher-Yates so the signal tokens sit at arbitrary positions
    for (std::size_t i = tokens.size(); i > 1; --i) std::swap(tokens[i - 1], tokens[rng() % i]);
    std::string text;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) text += ' ';
        text += tokens[i];
    }
    return text;
}

inline double clip01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

inline double label_for(int count, double noise) { return clip01(0.05 + 0.085 * count + noise); }

} // namespace detail

// naive-mode bundles; the signal tokens live in the description itself
inline SyntheticCorpus keyword_corpus(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.005);
    SyntheticCorpus corpus;
    for (std::size_t i = 0; i < n; ++i) {
        const int ce = static_cast<int>(rng() % 11);
        const int cs = static_cast<int>(rng() % 11);
        char id[32];
        std::snprintf(id, sizeof id, "img%04zu", i);

        isa::ImageRecord record;
        record.id = id;
        record.path = "/nonexistent/" + std::string(id) + ".png";
        record.entity_score = detail::label_for(ce, noise(rng));
        record.semantic_score = detail::label_for(cs, noise(rng));
        corpus.records.push_back(std::move(record));

        isa::extraction::FeatureBundle bundle;
        bundle.image_id = id;
        bundle.mode = isa::extraction::Mode::naive;
        bundle.description = detail::build_text(rng, ce, cs);
        bundle.extractor_id = "mock";
        bundle.raw_response = bundle.description;
        corpus.bundles.push_back(std::move(bundle));
    }
    return corpus;
}

// cot-mode bundles where the signal appears only inside CoR conclusions; the
// description is filler. Dropping the CoRs must therefore hurt the fit.
inline SyntheticCorpus cor_signal_corpus(std::size_t n, std::uint64_t seed) {
    using namespace isa::extraction;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.005);
    SyntheticCorpus corpus;
    for (std::size_t i = 0; i < n; ++i) {
        const int ce = static_cast<int>(rng() % 11);
        const int cs = static_cast<int>(rng() % 11);
        char id[32];
        std::snprintf(id, sizeof id, "img%04zu", i);

        isa::ImageRecord record;
        record.id = id;
        record.path = "/nonexistent/" + std::string(id) + ".png";
        record.entity_score = detail::label_for(ce, noise(rng));
        record.semantic_score = detail::label_for(cs, noise(rng));
        corpus.records.push_back(std::move(record));

        CoRMap cors;
        for (CoRCategory category : kAllCategories) cors[category] = {};
        CoR event;
        event.clues = {"something visible"};
        event.conclusion = detail::build_text(rng, ce, 0);
        cors[CoRCategory::high_level_event].push_back(std::move(event));
        CoR state;
        state.clues = {"an expression"};
        state.conclusion = detail::build_text(rng, 0, cs);
        cors[CoRCategory::mental_state].push_back(std::move(state));

        FeatureBundle bundle;
        bundle.image_id = id;
        bundle.mode = Mode::cot;
        bundle.description = detail::build_text(rng, 0, 0);
        bundle.cors = std::move(cors);
        bundle.extractor_id = "mock";
        bundle.raw_response = "synthetic";
        corpus.bundles.push_back(std::move(bundle));
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// Mock-backend fixtures

inline void write_naive_fixture(const std::filesystem::path& dir, const std::string& id,
                                std::string_view text) {
    write_file(dir / (id + ".naive.txt"), text);
}

inline void write_cot_fixtures(const std::filesystem::path& dir, const std::string& id,
                               std::string_view cors_text, std::string_view desc_text) {
    write_file(dir / (id + ".cors.txt"), cors_text);
    write_file(dir / (id + ".desc.txt"), desc_text);
}

// a parseable CoR response covering all seven categories
inline std::string simple_cor_response(std::string_view flavor = "a red lantern") {
    std::string text;
    text += "[Special Time]\nClues: evening light\nConclusion: it is dusk\n\n";
    text += "[Special Location]\nNone\n\n";
    text += "[Character Role]\nClues: uniform; badge\nConclusion: a guard is present\n\n";
    text += "[Character Relationship]\nNone\n\n";
    text += "[High-level Event]\nClues: ";
    text += flavor;
    text += "\nConclusion: a festival is underway\n\n";
    text += "[Event Causal Relationship]\nNone\n\n";
    text += "[Mental State]\nClues: relaxed posture\nConclusion: the crowd is calm\n";
    return text;
}

// ---------------------------------------------------------------------------
// CLI subprocess runner

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline std::string cli_binary() {
    const char* bin = std::getenv("ISA_CLI_BIN");
    if (!bin || !*bin) throw std::runtime_error("ISA_CLI_BIN not set");
    return bin;
}

// args is a pre-quoted shell fragment; the temp files keep streams separate
inline CliResult run_cli(const std::string& args, const std::filesystem::path& scratch) {
    const auto out_file = scratch / "cli_stdout.txt";
    const auto err_file = scratch / "cli_stderr.txt";
    const std::string cmd = cli_binary() + " " + args + " >" + out_file.string() + " 2>" +
                            err_file.string();
    const int rc = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = (rc >= 0 && WIFEXITED(rc)) ? WEXITSTATUS(rc) : -1;
    result.out = read_file(out_file);
    result.err = read_file(err_file);
    std::filesystem::remove(out_file);
    std::filesystem::remove(err_file);
    return result;
}

} // namespace helpers
