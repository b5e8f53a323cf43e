#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "image_helpers.hpp"
#include "isa/dataset_ops.hpp"

using namespace isa;
using namespace isa::dataset;

namespace {

ImageRecord make_record(std::string id, std::string path) {
    ImageRecord record;
    record.id = std::move(id);
    record.path = std::move(path);
    record.width = 9;
    record.height = 8;
    return record;
}

std::map<std::string, Split> split_map(const std::vector<ImageRecord>& records) {
    std::map<std::string, Split> out;
    for (const auto& record : records) out[record.id] = *record.split;
    return out;
}

} // namespace

TEST_CASE("ingest walks a tree, decodes dimensions, and sorts by id") {
    helpers::TempDir tmp;
    helpers::write_noise_image(tmp / "a.png", 1, 48, 32);
    helpers::write_gradient_image(tmp.path() / "sub" / "b.jpg", 64, 48);
    helpers::write_noise_image(tmp / "weird name!.png", 2);
    helpers::write_file(tmp / "notes.txt", "not an image, not even considered");
    helpers::write_file(tmp / "broken.png", "PNG in name only");

    const auto result = ingest(tmp.path());
    REQUIRE(result.records.size() == 3);
    CHECK(result.records[0].id == "a");
    CHECK(result.records[0].width == 48);
    CHECK(result.records[0].height == 32);
    CHECK(result.records[1].id == "sub_b"); // the path separator is not in the id charset
    CHECK(result.records[1].width == 64);
    CHECK(result.records[1].height == 48);
    CHECK(result.records[2].id == "weird_name_");
    CHECK(std::is_sorted(result.records.begin(), result.records.end(),
                         [](const ImageRecord& x, const ImageRecord& y) { return x.id < y.id; }));
    for (const auto& record : result.records) {
        CAPTURE(record.path);
        CHECK(std::filesystem::exists(record.path));
    }
    REQUIRE(result.skipped.size() == 1);
    CHECK(result.skipped[0].find("broken.png") != std::string::npos);

    CHECK_THROWS_AS(ingest(tmp / "no_such_subdir"), InvalidInput);
}

TEST_CASE("ingest disambiguates ids that sanitize to the same string") {
    helpers::TempDir tmp;
    helpers::write_noise_image(tmp / "x y.png", 3);
    helpers::write_noise_image(tmp / "x_y.png", 4);

    const auto result = ingest(tmp.path());
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0].id == "x_y");
    CHECK(result.records[1].id == "x_y_2");
    // the file that already spelled the sanitized id got renamed, because
    // "x y.png" sorts before it
    CHECK(result.records[1].path.find("x_y.png") != std::string::npos);
}

TEST_CASE("dhash64 reproduces a constructed bit pattern exactly") {
    helpers::TempDir tmp;
    for (std::uint64_t bits : {std::uint64_t{0}, ~std::uint64_t{0}, std::uint64_t{0xDEADBEEFCAFEBABE},
                               std::uint64_t{0x8000000000000001}}) {
        CAPTURE(bits);
        const auto path = tmp / ("h" + std::to_string(bits) + ".png");
        helpers::write_dhash_image(path, bits);
        CHECK(dhash64(path) == bits);
    }
    CHECK_THROWS_AS(dhash64(tmp / "missing.png"), IoError);
}

TEST_CASE("hamming_distance counts differing bits") {
    CHECK(hamming_distance(0, 0) == 0);
    CHECK(hamming_distance(0xFF, 0) == 8);
    CHECK(hamming_distance(~std::uint64_t{0}, 0) == 64);
    CHECK(hamming_distance(0b1010, 0b0101) == 4);
}

TEST_CASE("dedup clusters near-duplicates and keeps the smallest id") {
    helpers::TempDir tmp;
    const std::uint64_t base = 0x0123456789ABCDEF;
    helpers::write_dhash_image(tmp / "m_copy.png", base);
    helpers::write_dhash_image(tmp / "b_original.png", base);
    helpers::write_dhash_image(tmp / "c_near.png", base ^ 0x7); // 3 bits away
    helpers::write_dhash_image(tmp / "d_far.png", ~base);       // 64 bits away

    std::vector<ImageRecord> records = {
        make_record("m_copy", (tmp / "m_copy.png").string()),
        make_record("d_far", (tmp / "d_far.png").string()),
        make_record("b_original", (tmp / "b_original.png").string()),
        make_record("c_near", (tmp / "c_near.png").string()),
        make_record("ghost", (tmp / "ghost.png").string()), // unhashable
    };

    const auto result = dedup(records);
    std::vector<std::string> kept_ids;
    for (const auto& record : result.kept) kept_ids.push_back(record.id);
    // input order preserved; the cluster {m_copy, b_original, c_near} keeps b_original
    CHECK(kept_ids == std::vector<std::string>{"d_far", "b_original", "ghost"});
    REQUIRE(result.dropped.size() == 2);
    CHECK(result.dropped[0] == std::pair<std::string, std::string>{"c_near", "b_original"});
    CHECK(result.dropped[1] == std::pair<std::string, std::string>{"m_copy", "b_original"});
    REQUIRE(result.flagged.size() == 1);
    CHECK(result.flagged[0].find("ghost") == 0);

    CHECK_THROWS_AS(dedup(records, -1), InvalidInput);
}

TEST_CASE("dedup chains clusters transitively") {
    helpers::TempDir tmp;
    // a ~ b at 6 bits, b ~ c at 6 bits, but a vs c is 12 bits apart
    const std::uint64_t a_bits = 0;
    const std::uint64_t b_bits = 0x3F;           // 6 low bits set
    const std::uint64_t c_bits = 0x3F | 0xFC0;   // 6 more
    helpers::write_dhash_image(tmp / "a.png", a_bits);
    helpers::write_dhash_image(tmp / "b.png", b_bits);
    helpers::write_dhash_image(tmp / "c.png", c_bits);
    REQUIRE(hamming_distance(a_bits, c_bits) == 12);

    std::vector<ImageRecord> records = {
        make_record("c", (tmp / "c.png").string()),
        make_record("a", (tmp / "a.png").string()),
        make_record("b", (tmp / "b.png").string()),
    };
    const auto result = dedup(records, 8);
    REQUIRE(result.kept.size() == 1);
    CHECK(result.kept[0].id == "a");
    CHECK(result.dropped.size() == 2);

    // with a tighter threshold nothing merges
    const auto strict = dedup(records, 4);
    CHECK(strict.kept.size() == 3);
    CHECK(strict.dropped.empty());
}

TEST_CASE("split_sizes floors train and val and gives test the remainder") {
    const SplitSpec spec; // 0.6 / 0.2 / 0.2
    auto counts = split_sizes(10, spec);
    CHECK(counts.train == 6);
    CHECK(counts.val == 2);
    CHECK(counts.test == 2);

    counts = split_sizes(2946, spec);
    CHECK(counts.train == 1767);
    CHECK(counts.val == 589);
    CHECK(counts.test == 590);

    counts = split_sizes(5, spec); // 0.6*5 lands on 2.9999999999999996 without the guard
    CHECK(counts.train == 3);
    CHECK(counts.val == 1);
    CHECK(counts.test == 1);

    SplitSpec bad;
    bad.train_ratio = 0.5;
    CHECK_THROWS_AS(split_sizes(10, bad), InvalidInput);
    bad = SplitSpec{};
    bad.train_ratio = 1.4;
    bad.val_ratio = -0.2;
    CHECK_THROWS_AS(split_sizes(10, bad), InvalidInput);
}

TEST_CASE("assign_splits partitions with the requested proportions") {
    std::vector<ImageRecord> records;
    for (int i = 0; i < 10; ++i)
        records.push_back(make_record("img" + std::to_string(i), ""));
    const auto assigned = assign_splits(records, SplitSpec{});
    REQUIRE(assigned.size() == 10);

    SplitCounts seen;
    for (std::size_t i = 0; i < assigned.size(); ++i) {
        CHECK(assigned[i].id == records[i].id); // input order kept
        REQUIRE(assigned[i].split.has_value());
        switch (*assigned[i].split) {
        case Split::train: ++seen.train; break;
        case Split::val: ++seen.val; break;
        case Split::test: ++seen.test; break;
        }
    }
    CHECK(seen.train == 6);
    CHECK(seen.val == 2);
    CHECK(seen.test == 2);
}

TEST_CASE("assignment depends only on the seed and the id set") {
    std::vector<ImageRecord> records;
    for (int i = 0; i < 30; ++i)
        records.push_back(make_record("img" + std::to_string(i), "/somewhere/" + std::to_string(i)));

    SplitSpec spec;
    spec.seed = 7;
    const auto first = split_map(assign_splits(records, spec));

    auto reversed = records;
    std::reverse(reversed.begin(), reversed.end());
    for (auto& record : reversed) record.path = "elsewhere"; // paths must not matter
    CHECK(split_map(assign_splits(reversed, spec)) == first);

    spec.seed = 8;
    CHECK(split_map(assign_splits(records, spec)) != first);
}

TEST_CASE("assign_splits guards against clobbering and bad input") {
    std::vector<ImageRecord> records;
    for (int i = 0; i < 6; ++i)
        records.push_back(make_record("img" + std::to_string(i), ""));
    records[3].split = Split::val;

    CHECK_THROWS_WITH_AS(assign_splits(records, SplitSpec{}), doctest::Contains("img3"), InvalidInput);

    const auto forced = assign_splits(records, SplitSpec{}, true);
    for (const auto& record : forced) CHECK(record.split.has_value());

    std::vector<ImageRecord> tiny = {make_record("a", ""), make_record("b", "")};
    CHECK_THROWS_AS(assign_splits(tiny, SplitSpec{}), InvalidInput);

    std::vector<ImageRecord> dupes = {make_record("a", ""), make_record("a", ""),
                                      make_record("b", "")};
    CHECK_THROWS_AS(assign_splits(dupes, SplitSpec{}), InvalidInput);
}

TEST_CASE("exclusion lists are parsed and applied") {
    helpers::TempDir tmp;
    const auto path = tmp / "exclude.txt";
    helpers::write_file(path, "# manually reviewed rejects\n"
                              "\n"
                              "  img2  \n"
                              "img5\r\n"
                              "   # trailing comment line\n"
                              "img9\n");
    const auto ids = read_exclusion_list(path);
    CHECK(ids == std::vector<std::string>{"img2", "img5", "img9"});

    std::vector<ImageRecord> records;
    for (int i = 0; i < 6; ++i)
        records.push_back(make_record("img" + std::to_string(i), ""));
    const auto [kept, dropped] = apply_exclusions(records, ids);
    REQUIRE(kept.size() == 4);
    CHECK(kept[0].id == "img0");
    CHECK(kept[1].id == "img1");
    CHECK(kept[2].id == "img3");
    CHECK(kept[3].id == "img4");
    CHECK(dropped == std::vector<std::string>{"img2", "img5"});

    CHECK_THROWS_AS(read_exclusion_list(tmp / "missing.txt"), IoError);
}
