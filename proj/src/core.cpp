#include "isa/core.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace isa {

using nlohmann::json;

std::string_view to_string(ScoreKind kind) {
    return kind == ScoreKind::entity ? "entity" : "semantic";
}

ScoreKind score_kind_from_string(std::string_view s) {
    if (s == "entity") return ScoreKind::entity;
    if (s == "semantic") return ScoreKind::semantic;
    throw InvalidInput("unknown score kind: '" + std::string(s) + "'");
}

std::string_view to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    throw InvalidInput("corrupt split value");
}

Split split_from_string(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw InvalidInput("unknown split: '" + std::string(s) + "' (expected train|val|test)");
}

ScorePair::ScorePair(double entity, double semantic) : entity_(entity), semantic_(semantic) {
    if (!(entity >= 0.0 && entity <= 1.0))
        throw InvalidInput("entity score out of [0,1]: " + std::to_string(entity));
    if (!(semantic >= 0.0 && semantic <= 1.0))
        throw InvalidInput("semantic score out of [0,1]: " + std::to_string(semantic));
}

AnnotationMatrix AnnotationMatrix::from_rows(ScoreKind kind, const std::vector<std::vector<int>>& rows) {
    if (rows.empty()) throw InvalidInput("annotation matrix needs at least one image row");
    const std::size_t k = rows.front().size();
    if (k == 0) throw InvalidInput("annotation matrix needs at least one annotator column");
    std::vector<int> cells;
    cells.reserve(rows.size() * k);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != k)
            throw InvalidInput("ragged annotation matrix: row " + std::to_string(i) + " has " +
                               std::to_string(rows[i].size()) + " ratings, expected " + std::to_string(k));
        for (int v : rows[i]) {
            if (v < 1 || v > 5)
                throw InvalidInput("rating out of [1,5]: " + std::to_string(v) + " in row " + std::to_string(i));
            cells.push_back(v);
        }
    }
    return AnnotationMatrix(kind, rows.size(), k, std::move(cells));
}

std::vector<int> AnnotationMatrix::column(std::size_t annotator) const {
    if (annotator >= k_) throw InvalidInput("annotator index out of range");
    std::vector<int> col(n_);
    for (std::size_t i = 0; i < n_; ++i) col[i] = cells_[i * k_ + annotator];
    return col;
}

namespace {

bool well_formed_id(std::string_view id) {
    if (id.empty()) return false;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '.' || c == '_' || c == '-';
        if (!ok) return false;
    }
    return true;
}

void check_score_range(const char* name, const std::optional<double>& v, std::vector<std::string>& out) {
    if (v && !(*v >= 0.0 && *v <= 1.0))
        out.push_back(std::string(name) + " out of [0,1]: " + std::to_string(*v));
}

} // namespace

ValidationResult validate_record(const ImageRecord& record) {
    ValidationResult result;
    if (record.id.empty())
        result.violations.push_back("empty id");
    else if (!well_formed_id(record.id))
        result.violations.push_back("malformed id: '" + record.id + "'");
    if (record.path.empty())
        result.violations.push_back("empty path");
    else if (!std::filesystem::exists(record.path))
        result.violations.push_back("missing file: " + record.path);
    check_score_range("entity_score", record.entity_score, result.violations);
    check_score_range("semantic_score", record.semantic_score, result.violations);
    if (record.width && *record.width <= 0) result.violations.push_back("non-positive width");
    if (record.height && *record.height <= 0) result.violations.push_back("non-positive height");
    return result;
}

std::string record_to_json_line(const ImageRecord& record) {
    json j;
    j["id"] = record.id;
    j["path"] = record.path;
    if (record.width) j["width"] = *record.width;
    if (record.height) j["height"] = *record.height;
    if (record.split) j["split"] = to_string(*record.split);
    if (record.entity_score) j["entity_score"] = *record.entity_score;
    if (record.semantic_score) j["semantic_score"] = *record.semantic_score;
    return j.dump();
}

ImageRecord record_from_json_line(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("malformed manifest line: ") + e.what());
    }
    if (!j.is_object()) throw InvalidInput("manifest line is not a JSON object");
    ImageRecord record;
    try {
        record.id = j.at("id").get<std::string>();
        record.path = j.at("path").get<std::string>();
        if (j.contains("width")) record.width = j.at("width").get<int>();
        if (j.contains("height")) record.height = j.at("height").get<int>();
        if (j.contains("split") && !j.at("split").is_null())
            record.split = split_from_string(j.at("split").get<std::string>());
        if (j.contains("entity_score") && !j.at("entity_score").is_null())
            record.entity_score = j.at("entity_score").get<double>();
        if (j.contains("semantic_score") && !j.at("semantic_score").is_null())
            record.semantic_score = j.at("semantic_score").get<double>();
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("bad manifest field: ") + e.what());
    }
    return record;
}

std::vector<ImageRecord> read_manifest(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open manifest: " + file.string());
    std::vector<ImageRecord> records;
    std::vector<std::string> seen_check;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ImageRecord record;
        try {
            record = record_from_json_line(line);
        } catch (const InvalidInput& e) {
            throw InvalidInput(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        records.push_back(std::move(record));
    }
    // ids must be unique within a manifest
    std::vector<std::string_view> ids;
    ids.reserve(records.size());
    for (const auto& r : records) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());
    auto dup = std::adjacent_find(ids.begin(), ids.end());
    if (dup != ids.end())
        throw InvalidInput(file.string() + ": duplicate id '" + std::string(*dup) + "'");
    return records;
}

void write_manifest(const std::filesystem::path& file, std::span<const ImageRecord> records) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + file.string());
    for (const auto& record : records) out << record_to_json_line(record) << '\n';
    if (!out) throw IoError("write failed: " + file.string());
}

} // namespace isa
