#include "isa/dataset_ops.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace isa::dataset {

// ---------------------------------------------------------------------------
// ingest

namespace {

bool has_image_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp" || ext == ".gif" ||
           ext == ".webp";
}

// path relative to the ingest root, extension dropped, non-id characters
// replaced so the result satisfies the manifest id charset
std::string id_from_relative(const std::filesystem::path& rel) {
    std::filesystem::path stemmed = rel;
    stemmed.replace_extension();
    std::string id = stemmed.generic_string();
    for (char& c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '.' || c == '_' || c == '-';
        if (!ok) c = '_';
    }
    return id;
}

} // namespace

IngestResult ingest(const std::filesystem::path& root) {
    std::error_code ec;
    if (!std::filesystem::is_directory(root, ec))
        throw InvalidInput("ingest root is not a readable directory: " + root.string());

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end()); // directory iteration order is unspecified

    IngestResult result;
    std::unordered_set<std::string> taken;
    for (const auto& file : files) {
        const cv::Mat image = cv::imread(file.string(), cv::IMREAD_COLOR);
        if (image.empty()) {
            result.skipped.push_back(file.string() + ": not decodable as an image");
            continue;
        }
        std::string id = id_from_relative(std::filesystem::relative(file, root));
        if (taken.count(id)) { // sanitization collision: disambiguate deterministically
            int suffix = 2;
            while (taken.count(id + "_" + std::to_string(suffix))) ++suffix;
            id += "_" + std::to_string(suffix);
        }
        taken.insert(id);

        ImageRecord record;
        record.id = std::move(id);
        record.path = file.generic_string();
        record.width = image.cols;
        record.height = image.rows;
        result.records.push_back(std::move(record));
    }
    std::sort(result.records.begin(), result.records.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });
    return result;
}

// ---------------------------------------------------------------------------
// dedup

std::uint64_t dhash64(const std::filesystem::path& image_path) {
    const cv::Mat gray = cv::imread(image_path.string(), cv::IMREAD_GRAYSCALE);
    if (gray.empty()) throw IoError("cannot decode image: " + image_path.string());
    cv::Mat small;
    cv::resize(gray, small, cv::Size(9, 8), 0, 0, cv::INTER_AREA);
    std::uint64_t hash = 0;
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            if (small.at<std::uint8_t>(y, x) < small.at<std::uint8_t>(y, x + 1))
                hash |= std::uint64_t{1} << (y * 8 + x);
        }
    }
    return hash;
}

int hamming_distance(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }

namespace {

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

} // namespace

DedupResult dedup(std::span<const ImageRecord> records, int max_distance) {
    if (max_distance < 0) throw InvalidInput("dedup max_distance must be >= 0");

    DedupResult result;
    std::vector<std::size_t> hashable; // indices into records
    std::vector<std::uint64_t> hashes;
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            hashes.push_back(dhash64(records[i].path));
            hashable.push_back(i);
        } catch (const Error& e) {
            result.flagged.push_back(records[i].id + ": " + e.what());
        }
    }

    UnionFind clusters(hashable.size());
    for (std::size_t a = 0; a < hashable.size(); ++a) {
        for (std::size_t b = a + 1; b < hashable.size(); ++b) {
            if (hamming_distance(hashes[a], hashes[b]) <= max_distance) clusters.unite(a, b);
        }
    }

    // representative per cluster: lexicographically smallest id
    std::vector<std::size_t> keeper(hashable.size());
    std::iota(keeper.begin(), keeper.end(), 0);
    for (std::size_t a = 0; a < hashable.size(); ++a) {
        std::size_t& best = keeper[clusters.find(a)];
        if (records[hashable[a]].id < records[hashable[best]].id) best = a;
    }

    std::vector<bool> drop(records.size(), false);
    for (std::size_t a = 0; a < hashable.size(); ++a) {
        const std::size_t best = keeper[clusters.find(a)];
        if (best != a) {
            drop[hashable[a]] = true;
            result.dropped.emplace_back(records[hashable[a]].id, records[hashable[best]].id);
        }
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!drop[i]) result.kept.push_back(records[i]);
    }
    std::sort(result.dropped.begin(), result.dropped.end());
    return result;
}

// ---------------------------------------------------------------------------
// split

SplitCounts split_sizes(std::size_t n, const SplitSpec& spec) {
    if (spec.train_ratio < 0 || spec.val_ratio < 0 || spec.test_ratio < 0)
        throw InvalidInput("split ratios must be non-negative");
    if (std::abs(spec.train_ratio + spec.val_ratio + spec.test_ratio - 1.0) > 1e-9)
        throw InvalidInput("split ratios must sum to 1");
    SplitCounts counts;
    // epsilon guards floor against values like 0.6*5 = 2.9999999999999996
    counts.train = static_cast<std::size_t>(std::floor(spec.train_ratio * static_cast<double>(n) + 1e-9));
    counts.val = static_cast<std::size_t>(std::floor(spec.val_ratio * static_cast<double>(n) + 1e-9));
    counts.test = n - counts.train - counts.val;
    return counts;
}

namespace {

// uniform draw from [0, bound) with rejection — bit-stable across platforms,
// unlike std::uniform_int_distribution
std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound; // 2^64 mod bound
    for (;;) {
        const std::uint64_t r = rng();
        if (r >= threshold) return r % bound;
    }
}

} // namespace

std::vector<ImageRecord> assign_splits(std::vector<ImageRecord> records, const SplitSpec& spec,
                                       bool force) {
    if (records.size() < 3) throw InvalidInput("need at least 3 records to split");
    for (const ImageRecord& record : records) {
        if (record.split && !force)
            throw InvalidInput("record already assigned a split (use force): " + record.id);
    }

    std::vector<std::string> ids;
    ids.reserve(records.size());
    for (const ImageRecord& record : records) ids.push_back(record.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw InvalidInput("duplicate ids in split input");

    std::mt19937_64 rng(spec.seed);
    for (std::size_t i = ids.size() - 1; i > 0; --i)
        std::swap(ids[i], ids[bounded_draw(rng, i + 1)]);

    const SplitCounts counts = split_sizes(ids.size(), spec);
    std::unordered_map<std::string, Split> assignment;
    assignment.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const Split split = i < counts.train              ? Split::train
                            : i < counts.train + counts.val ? Split::val
                                                            : Split::test;
        assignment.emplace(std::move(ids[i]), split);
    }
    for (ImageRecord& record : records) record.split = assignment.at(record.id);
    return records;
}

// ---------------------------------------------------------------------------
// exclusion lists

std::vector<std::string> read_exclusion_list(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read exclusion list: " + path.string());
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos) continue;
        const std::size_t end = line.find_last_not_of(" \t\r");
        std::string id = line.substr(start, end - start + 1);
        if (id.empty() || id.front() == '#') continue;
        ids.push_back(std::move(id));
    }
    return ids;
}

std::pair<std::vector<ImageRecord>, std::vector<std::string>>
apply_exclusions(std::span<const ImageRecord> records, std::span<const std::string> excluded_ids) {
    const std::set<std::string> excluded(excluded_ids.begin(), excluded_ids.end());
    std::vector<ImageRecord> kept;
    std::vector<std::string> dropped;
    for (const ImageRecord& record : records) {
        if (excluded.count(record.id))
            dropped.push_back(record.id);
        else
            kept.push_back(record);
    }
    return {std::move(kept), std::move(dropped)};
}

} // namespace isa::dataset
