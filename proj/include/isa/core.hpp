#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace isa {

// Base error type. Callers that need to distinguish bad arguments from
// statistically undefined results catch the subclasses.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Violated precondition: wrong sizes, out-of-range values, malformed input.
class InvalidInput : public Error {
public:
    using Error::Error;
};

// Input is structurally fine but the requested quantity is undefined on it
// (constant vector, zero variance, all-tied ranks).
class DegenerateInput : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

enum class ScoreKind { entity, semantic };

std::string_view to_string(ScoreKind kind);
ScoreKind score_kind_from_string(std::string_view s);

enum class Split { train, val, test };

std::string_view to_string(Split split);
Split split_from_string(std::string_view s);

// Final labels for one image. Both scores live in [0,1]; the constructor
// enforces it.
class ScorePair {
public:
    ScorePair(double entity, double semantic);

    double entity() const { return entity_; }
    double semantic() const { return semantic_; }
    double get(ScoreKind kind) const { return kind == ScoreKind::entity ? entity_ : semantic_; }

private:
    double entity_;
    double semantic_;
};

// One image of the dataset. Scores and split are filled in as the pipeline
// progresses; ids are filename stems unless a manifest says otherwise.
struct ImageRecord {
    std::string id;
    std::string path;
    std::optional<int> width;
    std::optional<int> height;
    std::optional<Split> split;
    std::optional<double> entity_score;
    std::optional<double> semantic_score;

    std::optional<double> score(ScoreKind kind) const {
        return kind == ScoreKind::entity ? entity_score : semantic_score;
    }

    bool operator==(const ImageRecord&) const = default;
};

// n images x k annotators of raw ratings in {1..5}, for one score kind.
class AnnotationMatrix {
public:
    static AnnotationMatrix from_rows(ScoreKind kind, const std::vector<std::vector<int>>& rows);

    ScoreKind kind() const { return kind_; }
    std::size_t n_images() const { return n_; }
    std::size_t n_annotators() const { return k_; }
    int at(std::size_t image, std::size_t annotator) const { return cells_[image * k_ + annotator]; }
    std::vector<int> column(std::size_t annotator) const;

private:
    AnnotationMatrix(ScoreKind kind, std::size_t n, std::size_t k, std::vector<int> cells)
        : kind_(kind), n_(n), k_(k), cells_(std::move(cells)) {}

    ScoreKind kind_;
    std::size_t n_;
    std::size_t k_;
    std::vector<int> cells_;
};

struct ValidationResult {
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

// Violations are data, not failures: always returns.
ValidationResult validate_record(const ImageRecord& record);

// Manifest file: JSON-lines, one record per line. Field names are fixed:
// id, path, split, entity_score, semantic_score (plus optional width/height).
std::vector<ImageRecord> read_manifest(const std::filesystem::path& file);
void write_manifest(const std::filesystem::path& file, std::span<const ImageRecord> records);

std::string record_to_json_line(const ImageRecord& record);
ImageRecord record_from_json_line(std::string_view line);

} // namespace isa
