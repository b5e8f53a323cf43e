#include "isa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "isa/kernels.hpp"

namespace isa::metrics {

using nlohmann::json;

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, std::size_t min_len) {
    if (a.size() != b.size())
        throw InvalidInput("length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    if (a.size() < min_len)
        throw InvalidInput("need at least " + std::to_string(min_len) + " elements, got " + std::to_string(a.size()));
}

bool is_constant(std::span<const double> x) {
    for (std::size_t i = 1; i < x.size(); ++i)
        if (x[i] != x[0]) return false;
    return true;
}

double clamp_corr(double r) { return std::clamp(r, -1.0, 1.0); }

// Sorts idx by keys ascending and counts tie-pair totals sum(t*(t-1)/2).
std::uint64_t tie_pairs(std::span<const double> keys, std::vector<std::size_t>& idx) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    std::uint64_t pairs = 0;
    std::size_t run = 1;
    for (std::size_t i = 1; i < idx.size(); ++i) {
        if (keys[idx[i]] == keys[idx[i - 1]]) {
            ++run;
        } else {
            pairs += static_cast<std::uint64_t>(run) * (run - 1) / 2;
            run = 1;
        }
    }
    pairs += static_cast<std::uint64_t>(run) * (run - 1) / 2;
    return pairs;
}

// Inversion count of v via iterative mergesort.
std::uint64_t count_inversions(std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<double> buf(n);
    std::uint64_t inversions = 0;
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo < n; lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, n);
            const std::size_t hi = std::min(lo + 2 * width, n);
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (v[j] < v[i]) {
                    inversions += mid - i;
                    buf[k++] = v[j++];
                } else {
                    buf[k++] = v[i++];
                }
            }
            while (i < mid) buf[k++] = v[i++];
            while (j < hi) buf[k++] = v[j++];
            std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
        }
    }
    return inversions;
}

bool has_ties(std::span<const double> x) {
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

} // namespace

double rmse(std::span<const double> labels, std::span<const double> preds) {
    check_pair(labels, preds, 1);
    return std::sqrt(kernels::sum_sq_diff(labels, preds) / static_cast<double>(labels.size()));
}

double rmae(std::span<const double> labels, std::span<const double> preds) {
    check_pair(labels, preds, 1);
    return std::sqrt(kernels::sum_abs_diff(labels, preds) / static_cast<double>(labels.size()));
}

double pcc(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y, 2);
    const double n = static_cast<double>(x.size());
    const double mx = kernels::sum(x) / n;
    const double my = kernels::sum(y) / n;
    const double sxx = kernels::centered_dot(x, mx, x, mx);
    const double syy = kernels::centered_dot(y, my, y, my);
    if (sxx == 0.0 || syy == 0.0)
        throw DegenerateInput("pcc undefined: constant input vector");
    const double sxy = kernels::centered_dot(x, mx, y, my);
    return clamp_corr(sxy / std::sqrt(sxx * syy));
}

std::vector<double> average_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
        // positions i..j (0-based) share rank mean((i+1)+(j+1))/2
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = rank;
        i = j + 1;
    }
    return ranks;
}

double srcc(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y, 2);
    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);
    try {
        return pcc(rx, ry);
    } catch (const DegenerateInput&) {
        throw DegenerateInput("srcc undefined: constant input vector");
    }
}

double srcc_closed_form(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y, 2);
    if (has_ties(x) || has_ties(y))
        throw InvalidInput("closed-form spearman requires tie-free vectors");
    // descending ranks; the sign convention cancels in d^2
    const std::size_t n = x.size();
    std::vector<double> rx(n), ry(n);
    {
        const std::vector<double> ax = average_ranks(x);
        const std::vector<double> ay = average_ranks(y);
        for (std::size_t i = 0; i < n; ++i) {
            rx[i] = static_cast<double>(n) + 1.0 - ax[i];
            ry[i] = static_cast<double>(n) + 1.0 - ay[i];
        }
    }
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = rx[i] - ry[i];
        d2 += d * d;
    }
    const double dn = static_cast<double>(n);
    return 1.0 - 6.0 * d2 / (dn * (dn * dn - 1.0));
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y, 2);
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});

    std::vector<std::size_t> scratch = idx;
    const std::uint64_t n1 = tie_pairs(x, scratch); // pairs tied in x
    scratch = idx;
    const std::uint64_t n2 = tie_pairs(y, scratch); // pairs tied in y

    // pairs tied in both: group by (x, y)
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });
    std::uint64_t n3 = 0;
    {
        std::size_t run = 1;
        for (std::size_t i = 1; i < n; ++i) {
            if (x[idx[i]] == x[idx[i - 1]] && y[idx[i]] == y[idx[i - 1]]) {
                ++run;
            } else {
                n3 += static_cast<std::uint64_t>(run) * (run - 1) / 2;
                run = 1;
            }
        }
        n3 += static_cast<std::uint64_t>(run) * (run - 1) / 2;
    }

    // idx is sorted by (x asc, y asc): inversions in the y sequence are
    // exactly the discordant pairs.
    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
    const std::uint64_t discordant = count_inversions(ys);

    const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    if (n0 == n1 || n0 == n2)
        throw DegenerateInput("kendall tau undefined: all values tied in one vector");
    const std::int64_t concordant =
        static_cast<std::int64_t>(n0) - static_cast<std::int64_t>(n1) - static_cast<std::int64_t>(n2) +
        static_cast<std::int64_t>(n3) - static_cast<std::int64_t>(discordant);
    const double num = static_cast<double>(concordant - static_cast<std::int64_t>(discordant));
    const double den = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
    return clamp_corr(num / den);
}

MetricReport compute_report(std::span<const double> labels, std::span<const double> preds,
                            bool with_kendall, std::vector<std::string>* notes) {
    check_pair(labels, preds, 1);
    MetricReport report;
    report.n = labels.size();
    report.rmse = rmse(labels, preds);
    report.rmae = rmae(labels, preds);
    auto guarded = [&](const char* name, double (*fn)(std::span<const double>, std::span<const double>))
        -> std::optional<double> {
        try {
            return fn(labels, preds);
        } catch (const Error& e) {
            if (notes) notes->push_back(std::string(name) + " unavailable: " + e.what());
            return std::nullopt;
        }
    };
    report.pcc = guarded("pcc", pcc);
    report.srcc = guarded("srcc", srcc);
    if (with_kendall) report.kendall = guarded("kendall", kendall_tau);
    return report;
}

namespace {

json optional_to_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

std::optional<double> optional_from_json(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

} // namespace

std::string report_to_json(const MetricReport& report) {
    json j;
    j["rmse"] = report.rmse;
    j["rmae"] = report.rmae;
    j["pcc"] = optional_to_json(report.pcc);
    j["srcc"] = optional_to_json(report.srcc);
    j["kendall"] = optional_to_json(report.kendall);
    j["n"] = report.n;
    return j.dump();
}

MetricReport report_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("malformed metric report: ") + e.what());
    }
    MetricReport report;
    try {
        report.rmse = j.at("rmse").get<double>();
        report.rmae = j.at("rmae").get<double>();
        report.pcc = optional_from_json(j, "pcc");
        report.srcc = optional_from_json(j, "srcc");
        report.kendall = optional_from_json(j, "kendall");
        report.n = j.at("n").get<std::size_t>();
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("bad metric report field: ") + e.what());
    }
    return report;
}

namespace {

RunStat stat_over(const std::vector<double>& values, bool sample_std) {
    const double r = static_cast<double>(values.size());
    const double mean = kernels::sum(values) / r;
    double var = kernels::centered_dot(values, mean, values, mean);
    var /= sample_std ? std::max(r - 1.0, 1.0) : r;
    return RunStat{mean, std::sqrt(std::max(var, 0.0))};
}

} // namespace

RunSummary summarize_runs(std::span<const MetricReport> reports, bool sample_std) {
    if (reports.empty()) throw InvalidInput("summarize_runs needs at least one report");
    RunSummary summary;
    summary.runs = reports.size();

    std::vector<double> values;
    values.reserve(reports.size());
    auto collect = [&](auto getter) -> std::optional<RunStat> {
        values.clear();
        for (const auto& report : reports) {
            const std::optional<double> v = getter(report);
            if (!v) return std::nullopt;
            values.push_back(*v);
        }
        return stat_over(values, sample_std);
    };

    summary.rmse = *collect([](const MetricReport& r) { return std::optional<double>(r.rmse); });
    summary.rmae = *collect([](const MetricReport& r) { return std::optional<double>(r.rmae); });
    summary.pcc = collect([](const MetricReport& r) { return r.pcc; });
    summary.srcc = collect([](const MetricReport& r) { return r.srcc; });
    summary.kendall = collect([](const MetricReport& r) { return r.kendall; });
    return summary;
}

std::string format_mean_std(double mean, double std) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", std);
    std::string std_text(buf);
    if (std > 0.0 && std_text == "0.000") {
        std::snprintf(buf, sizeof(buf), "%.4f", std);
        std_text = buf;
    }
    char out[96];
    std::snprintf(out, sizeof(out), "%.3f (%s)", mean, std_text.c_str());
    return out;
}

std::string render_summary_table(std::span<const std::pair<std::string, RunSummary>> rows) {
    const char* headers[] = {"RMSE", "RMAE", "PCC", "SRCC", "Kendall"};
    std::size_t label_width = 5;
    for (const auto& [label, summary] : rows) label_width = std::max(label_width, label.size());

    std::vector<std::vector<std::string>> cells;
    for (const auto& [label, summary] : rows) {
        auto cell = [](const std::optional<RunStat>& s) {
            return s ? format_mean_std(s->mean, s->std) : std::string("-");
        };
        cells.push_back({format_mean_std(summary.rmse.mean, summary.rmse.std),
                         format_mean_std(summary.rmae.mean, summary.rmae.std), cell(summary.pcc),
                         cell(summary.srcc), cell(summary.kendall)});
    }
    std::size_t col_width = 13;
    for (const auto& row : cells)
        for (const auto& cell : row) col_width = std::max(col_width, cell.size());

    std::string out;
    auto pad = [&](const std::string& s, std::size_t w) {
        out += s;
        out.append(w > s.size() ? w - s.size() : 0, ' ');
    };
    pad("Model", label_width + 2);
    for (const char* h : headers) pad(h, col_width + 2);
    out += '\n';
    for (std::size_t r = 0; r < cells.size(); ++r) {
        pad(rows[r].first, label_width + 2);
        for (const auto& cell : cells[r]) pad(cell, col_width + 2);
        out += '\n';
    }
    return out;
}

} // namespace isa::metrics
