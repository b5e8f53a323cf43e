#include "isa/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "isa/metrics.hpp"

namespace isa::annotation {

using nlohmann::json;

double normalize_raw(int raw) {
    if (raw < 1 || raw > 5)
        throw InvalidInput("raw rating out of [1,5]: " + std::to_string(raw));
    return static_cast<double>(raw - 1) / 4.0;
}

double aggregate_label(std::span<const int> raws) {
    if (raws.empty()) throw InvalidInput("cannot aggregate an empty rating list");
    double sum = 0.0;
    for (int raw : raws) sum += normalize_raw(raw);
    return sum / static_cast<double>(raws.size());
}

namespace {

bool constant_column(const std::vector<double>& col) {
    return std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); });
}

} // namespace

PairwiseStats pairwise_consistency(const AnnotationMatrix& matrix) {
    const std::size_t n = matrix.n_images();
    const std::size_t k = matrix.n_annotators();
    if (n < 3) throw InvalidInput("pairwise consistency needs at least 3 images");
    if (k < 2) throw InvalidInput("pairwise consistency needs at least 2 annotators");

    std::vector<std::vector<double>> cols(k, std::vector<double>(n));
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < n; ++i) cols[j][i] = static_cast<double>(matrix.at(i, j));

    PairwiseStats stats;
    stats.pair_count = k * (k - 1) / 2;
    double sum_pcc = 0.0, sum_srcc = 0.0, sum_kendall = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            if (constant_column(cols[a]) || constant_column(cols[b])) {
                ++stats.skipped_pairs;
                continue;
            }
            sum_pcc += metrics::pcc(cols[a], cols[b]);
            sum_srcc += metrics::srcc(cols[a], cols[b]);
            sum_kendall += metrics::kendall_tau(cols[a], cols[b]);
        }
    }
    const std::size_t used = stats.pair_count - stats.skipped_pairs;
    if (used == 0)
        throw DegenerateInput("all annotator pairs have a constant column; no correlation defined");
    stats.mean_pcc = sum_pcc / static_cast<double>(used);
    stats.mean_srcc = sum_srcc / static_cast<double>(used);
    stats.mean_kendall = sum_kendall / static_cast<double>(used);
    return stats;
}

std::string_view to_string(IccVariant variant) {
    switch (variant) {
        case IccVariant::c_1: return "c1";
        case IccVariant::c_k: return "ck";
        case IccVariant::a_1: return "a1";
        case IccVariant::a_k: return "ak";
    }
    throw InvalidInput("corrupt icc variant");
}

IccVariant icc_variant_from_string(std::string_view s) {
    if (s == "c1") return IccVariant::c_1;
    if (s == "ck") return IccVariant::c_k;
    if (s == "a1") return IccVariant::a_1;
    if (s == "ak") return IccVariant::a_k;
    throw InvalidInput("unknown icc variant: '" + std::string(s) + "' (expected c1|ck|a1|ak)");
}

double icc(const AnnotationMatrix& matrix, IccVariant variant) {
    const std::size_t n = matrix.n_images();
    const std::size_t k = matrix.n_annotators();
    if (n < 3) throw InvalidInput("icc needs at least 3 images");
    if (k < 2) throw InvalidInput("icc needs at least 2 annotators");

    const double dn = static_cast<double>(n);
    const double dk = static_cast<double>(k);

    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) grand += matrix.at(i, j);
    grand /= dn * dk;

    double ss_rows = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row_mean = 0.0;
        for (std::size_t j = 0; j < k; ++j) row_mean += matrix.at(i, j);
        row_mean /= dk;
        ss_rows += (row_mean - grand) * (row_mean - grand);
    }
    ss_rows *= dk;

    double ss_cols = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        double col_mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) col_mean += matrix.at(i, j);
        col_mean /= dn;
        ss_cols += (col_mean - grand) * (col_mean - grand);
    }
    ss_cols *= dn;

    double ss_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double d = matrix.at(i, j) - grand;
            ss_total += d * d;
        }
    }
    const double ss_error = ss_total - ss_rows - ss_cols;

    const double ms_rows = ss_rows / (dn - 1.0);
    const double ms_cols = ss_cols / (dk - 1.0);
    const double ms_error = std::max(ss_error / ((dn - 1.0) * (dk - 1.0)), 0.0);

    if (ms_rows == 0.0 && ms_error == 0.0)
        throw DegenerateInput("icc undefined: no variance in ratings");

    double denom = 0.0;
    switch (variant) {
        case IccVariant::c_1: denom = ms_rows + (dk - 1.0) * ms_error; break;
        case IccVariant::c_k: denom = ms_rows; break;
        case IccVariant::a_1: denom = ms_rows + (dk - 1.0) * ms_error + (dk / dn) * (ms_cols - ms_error); break;
        case IccVariant::a_k: denom = ms_rows + (ms_cols - ms_error) / dn; break;
    }
    if (denom == 0.0)
        throw DegenerateInput("icc undefined: zero denominator for this variant");
    return (ms_rows - ms_error) / denom;
}

ConsistencyReport build_consistency_report(const AnnotationMatrix& matrix, IccVariant variant) {
    ConsistencyReport report;
    report.kind = matrix.kind();
    report.pairwise = pairwise_consistency(matrix);
    report.icc = icc(matrix, variant);
    report.icc_variant = variant;
    report.n_images = matrix.n_images();
    report.n_annotators = matrix.n_annotators();
    return report;
}

std::string consistency_to_json(const ConsistencyReport& report) {
    json j;
    j["score_kind"] = std::string(isa::to_string(report.kind));
    j["mean_pcc"] = report.pairwise.mean_pcc;
    j["mean_srcc"] = report.pairwise.mean_srcc;
    j["mean_kendall"] = report.pairwise.mean_kendall;
    j["icc"] = report.icc;
    j["icc_variant"] = std::string(to_string(report.icc_variant));
    j["pair_count"] = report.pairwise.pair_count;
    j["skipped_pairs"] = report.pairwise.skipped_pairs;
    j["n_images"] = report.n_images;
    j["n_annotators"] = report.n_annotators;
    return j.dump();
}

std::string render_consistency_table(const ConsistencyReport& report) {
    char buf[256];
    std::string out;
    out += "Score     PCC      SRCC     Kendall  ICC(";
    out += to_string(report.icc_variant);
    out += ")\n";
    std::snprintf(buf, sizeof(buf), "%-9s %-8.3f %-8.3f %-8.3f %-8.3f\n",
                  std::string(isa::to_string(report.kind)).c_str(), report.pairwise.mean_pcc,
                  report.pairwise.mean_srcc, report.pairwise.mean_kendall, report.icc);
    out += buf;
    std::snprintf(buf, sizeof(buf), "images=%zu annotators=%zu pairs=%zu skipped=%zu\n", report.n_images,
                  report.n_annotators, report.pairwise.pair_count, report.pairwise.skipped_pairs);
    out += buf;
    return out;
}

std::size_t BinDistribution::total() const {
    std::size_t t = 0;
    for (std::size_t c : counts) t += c;
    return t;
}

const std::array<std::string_view, 5>& BinDistribution::labels() {
    static const std::array<std::string_view, 5> kLabels = {"[0, 0.2)", "[0.2, 0.4)", "[0.4, 0.6)",
                                                            "[0.6, 0.8)", "[0.8, 1]"};
    return kLabels;
}

BinDistribution bin_distribution(std::span<const double> scores) {
    BinDistribution dist;
    for (double s : scores) {
        if (!(s >= 0.0 && s <= 1.0))
            throw InvalidInput("score out of [0,1]: " + std::to_string(s));
        std::size_t bin;
        if (s < 0.2) bin = 0;
        else if (s < 0.4) bin = 1;
        else if (s < 0.6) bin = 2;
        else if (s < 0.8) bin = 3;
        else bin = 4;
        ++dist.counts[bin];
    }
    return dist;
}

std::string distribution_to_json(const BinDistribution& dist) {
    json j;
    json bins = json::array();
    for (std::size_t i = 0; i < dist.counts.size(); ++i) {
        json bin;
        bin["range"] = std::string(BinDistribution::labels()[i]);
        bin["count"] = dist.counts[i];
        bins.push_back(bin);
    }
    j["bins"] = bins;
    j["total"] = dist.total();
    return j.dump();
}

std::string render_distribution_table(std::string_view row_label, const BinDistribution& dist) {
    std::string out = "Score  ";
    for (auto label : BinDistribution::labels()) {
        out += label;
        out.append(12 - label.size(), ' ');
    }
    out += "\n";
    out += row_label;
    out.append(row_label.size() < 7 ? 7 - row_label.size() : 1, ' ');
    char buf[32];
    for (std::size_t c : dist.counts) {
        std::snprintf(buf, sizeof(buf), "%-12zu", c);
        out += buf;
    }
    out += "\n";
    return out;
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open annotations: " + file.string());
    std::vector<AnnotationRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            AnnotationRecord record;
            record.id = j.at("id").get<std::string>();
            record.kind = score_kind_from_string(j.at("score_kind").get<std::string>());
            record.ratings = j.at("ratings").get<std::vector<int>>();
            for (int r : record.ratings)
                if (r < 1 || r > 5) throw InvalidInput("rating out of [1,5]: " + std::to_string(r));
            records.push_back(std::move(record));
        } catch (const json::exception& e) {
            throw InvalidInput(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const InvalidInput& e) {
            throw InvalidInput(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

void write_annotations(const std::filesystem::path& file, std::span<const AnnotationRecord> records) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw IoError("cannot write annotations: " + file.string());
    for (const auto& record : records) {
        json j;
        j["id"] = record.id;
        j["score_kind"] = std::string(isa::to_string(record.kind));
        j["ratings"] = record.ratings;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("write failed: " + file.string());
}

AnnotationMatrix matrix_from_records(std::span<const AnnotationRecord> records, ScoreKind kind) {
    std::vector<const AnnotationRecord*> selected;
    for (const auto& record : records)
        if (record.kind == kind) selected.push_back(&record);
    if (selected.empty())
        throw InvalidInput("no annotation records of kind '" + std::string(isa::to_string(kind)) + "'");
    std::sort(selected.begin(), selected.end(),
              [](const AnnotationRecord* a, const AnnotationRecord* b) { return a->id < b->id; });
    for (std::size_t i = 1; i < selected.size(); ++i)
        if (selected[i]->id == selected[i - 1]->id)
            throw InvalidInput("duplicate annotation id '" + selected[i]->id + "' for kind " +
                               std::string(isa::to_string(kind)));
    std::vector<std::vector<int>> rows;
    rows.reserve(selected.size());
    for (const auto* record : selected) rows.push_back(record->ratings);
    return AnnotationMatrix::from_rows(kind, rows);
}

} // namespace isa::annotation
