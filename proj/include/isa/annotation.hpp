#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "isa/core.hpp"

namespace isa::annotation {

// Raw rating 1..5 mapped onto [0,1]: (raw - 1) / 4.
double normalize_raw(int raw);

// Mean of the normalized ratings; the final label of one image.
double aggregate_label(std::span<const int> raws);

struct PairwiseStats {
    double mean_pcc = 0.0;
    double mean_srcc = 0.0;
    double mean_kendall = 0.0;
    std::size_t pair_count = 0;    // k*(k-1)/2
    std::size_t skipped_pairs = 0; // pairs with a constant column, excluded from means
};

// Per-pair PCC/SRCC/Kendall over all images, averaged over annotator pairs.
// Needs n >= 3 images and k >= 2 annotators.
PairwiseStats pairwise_consistency(const AnnotationMatrix& matrix);

// Intraclass correlation variants from the two-way ANOVA decomposition
// (rows = images, columns = annotators). Naming follows McGraw & Wong:
// C = consistency, A = absolute agreement; 1 = single rater, k = average.
enum class IccVariant { c_1, c_k, a_1, a_k };

std::string_view to_string(IccVariant variant);
IccVariant icc_variant_from_string(std::string_view s);

double icc(const AnnotationMatrix& matrix, IccVariant variant = IccVariant::c_k);

struct ConsistencyReport {
    ScoreKind kind = ScoreKind::entity;
    PairwiseStats pairwise;
    double icc = 0.0;
    IccVariant icc_variant = IccVariant::c_k;
    std::size_t n_images = 0;
    std::size_t n_annotators = 0;
};

ConsistencyReport build_consistency_report(const AnnotationMatrix& matrix,
                                           IccVariant variant = IccVariant::c_k);

std::string consistency_to_json(const ConsistencyReport& report);
std::string render_consistency_table(const ConsistencyReport& report);

// Five bins over [0,1]: [0,.2) [.2,.4) [.4,.6) [.6,.8) [.8,1]; the last bin
// is closed on the right.
struct BinDistribution {
    std::array<std::size_t, 5> counts{};

    std::size_t total() const;
    static const std::array<std::string_view, 5>& labels();
};

BinDistribution bin_distribution(std::span<const double> scores);

std::string distribution_to_json(const BinDistribution& dist);
std::string render_distribution_table(std::string_view row_label, const BinDistribution& dist);

// Raw-annotation file: JSON-lines with fields id, score_kind, ratings.
struct AnnotationRecord {
    std::string id;
    ScoreKind kind = ScoreKind::entity;
    std::vector<int> ratings;

    bool operator==(const AnnotationRecord&) const = default;
};

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& file);
void write_annotations(const std::filesystem::path& file, std::span<const AnnotationRecord> records);

// Rows ordered by id ascending; every record of the kind must have the same
// number of ratings.
AnnotationMatrix matrix_from_records(std::span<const AnnotationRecord> records, ScoreKind kind);

} // namespace isa::annotation
