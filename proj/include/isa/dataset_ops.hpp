#pragma once
// Dataset assembly: ingest local images into a manifest, near-duplicate
// removal via perceptual hashing, and deterministic split assignment.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "isa/core.hpp"

namespace isa::dataset {

// --- ingest ----------------------------------------------------------------

struct IngestResult {
    std::vector<ImageRecord> records;        // ordered by id
    std::vector<std::string> skipped;        // "path: reason", not fatal
};

// Walks `root` recursively and emits one record (with decoded dimensions)
// per readable image file. Ids are derived from the path relative to root;
// undecodable files are listed as skipped.
IngestResult ingest(const std::filesystem::path& root);

// --- dedup -------------------------------------------------------------

// 64-bit difference hash: grayscale, resize to 9x8, one bit per horizontal
// neighbor comparison (left < right)
std::uint64_t dhash64(const std::filesystem::path& image_path);
int hamming_distance(std::uint64_t a, std::uint64_t b);

struct DedupResult {
    std::vector<ImageRecord> kept;                          // input order
    std::vector<std::pair<std::string, std::string>> dropped; // (dropped id, kept id)
    std::vector<std::string> flagged;                       // "id: reason" — unhashable, kept
};

// Clusters records whose hashes are within `max_distance` bits of some other
// cluster member and keeps the lexicographically smallest id per cluster.
// Files that cannot be hashed are kept and flagged.
DedupResult dedup(std::span<const ImageRecord> records, int max_distance = 8);

// --- split ---------------------------------------------------------

struct SplitSpec {
    double train_ratio = 0.6;
    double val_ratio = 0.2;
    double test_ratio = 0.2;
    std::uint64_t seed = 2024;
};

struct SplitCounts {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};

// floor(train_ratio*n) / floor(val_ratio*n) / remainder
SplitCounts split_sizes(std::size_t n, const SplitSpec& spec);

// Returns the records with splits assigned: ids are shuffled by seed, then
// cut into contiguous train/val/test blocks. Assignment is a pure function
// of (seed, id set) — input order does not matter. Records that already
// carry a split are an error unless `force` is set.
std::vector<ImageRecord> assign_splits(std::vector<ImageRecord> records, const SplitSpec& spec,
                                       bool force = false);

// --- exclusion lists ---------------------------------------------------

// plain text, one id per line; '#' lines and blanks ignored
std::vector<std::string> read_exclusion_list(const std::filesystem::path& path);

// drops records whose id is listed; returns (kept, dropped ids)
std::pair<std::vector<ImageRecord>, std::vector<std::string>>
apply_exclusions(std::span<const ImageRecord> records, std::span<const std::string> excluded_ids);

} // namespace isa::dataset
