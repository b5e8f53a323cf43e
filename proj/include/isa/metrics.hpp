#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isa/core.hpp"

namespace isa::metrics {

// sqrt of the mean squared difference.
double rmse(std::span<const double> labels, std::span<const double> preds);

// sqrt of the mean absolute difference (the root applies to the MAE).
double rmae(std::span<const double> labels, std::span<const double> preds);

// Pearson correlation. Throws DegenerateInput when either vector is constant.
double pcc(std::span<const double> x, std::span<const double> y);

// Spearman correlation: Pearson over average (fractional) ranks. Reduces to
// the closed form on tie-free data.
double srcc(std::span<const double> x, std::span<const double> y);

// Closed-form Spearman 1 - 6*sum(d^2)/(n(n^2-1)). Only valid without ties;
// throws InvalidInput if either vector has any.
double srcc_closed_form(std::span<const double> x, std::span<const double> y);

// Kendall tau-b (tie-corrected), O(n log n).
double kendall_tau(std::span<const double> x, std::span<const double> y);

// Average ranks, 1-based; ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> x);

struct MetricReport {
    double rmse = 0.0;
    double rmae = 0.0;
    std::optional<double> pcc;
    std::optional<double> srcc;
    std::optional<double> kendall;
    std::size_t n = 0;
};

// Computes every metric for one evaluation run. Correlations that are
// undefined on the data are left empty and explained in *notes.
MetricReport compute_report(std::span<const double> labels, std::span<const double> preds,
                            bool with_kendall = false, std::vector<std::string>* notes = nullptr);

std::string report_to_json(const MetricReport& report);
MetricReport report_from_json(const std::string& text);

struct RunStat {
    double mean = 0.0;
    double std = 0.0;
};

struct RunSummary {
    std::size_t runs = 0;
    RunStat rmse;
    RunStat rmae;
    std::optional<RunStat> pcc;
    std::optional<RunStat> srcc;
    std::optional<RunStat> kendall;
};

// Mean and standard deviation per metric across repeated runs. Population
// std by default (the runs are the whole reported set); sample_std divides
// by r-1 instead. A correlation appears only if present in every run.
RunSummary summarize_runs(std::span<const MetricReport> reports, bool sample_std = false);

// "0.803 (0.005)" — three decimals; a nonzero std that would print as 0.000
// gets a fourth decimal.
std::string format_mean_std(double mean, double std);

// Aligned table of labeled summaries, one row per entry.
std::string render_summary_table(std::span<const std::pair<std::string, RunSummary>> rows);

} // namespace isa::metrics
