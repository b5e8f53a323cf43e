// Acceptance gate: one line per criterion, PASS/FAIL/SKIP, nonzero exit when
// anything fails. Criteria 4 and 5 depend on externally released data and
// skip (or run a documented substitute) when that data is absent; everything
// else runs self-contained.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "helpers.hpp"
#include "image_helpers.hpp"
#include "isa/annotation.hpp"
#include "isa/core.hpp"
#include "isa/dataset_ops.hpp"
#include "isa/discriminator.hpp"
#include "isa/extraction.hpp"
#include "isa/metrics.hpp"
#include "isa/selection.hpp"
#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
    enum class Status { pass, fail, skip } status;
    std::string detail;
};

Outcome pass(std::string detail) { return {Outcome::Status::pass, std::move(detail)}; }
Outcome fail(std::string detail) { return {Outcome::Status::fail, std::move(detail)}; }
Outcome skip(std::string detail) { return {Outcome::Status::skip, std::move(detail)}; }

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(3);
    out << v;
    return out.str();
}

// ---------------------------------------------------------------------------
// 1. metric-oracle equivalence

Outcome criterion_metrics_oracle() {
    const auto start = Clock::now();
    std::mt19937_64 rng(20260814);
    std::uniform_int_distribution<std::size_t> len_dist(2, 200);
    std::uniform_real_distribution<double> real_dist(-2.0, 2.0);
    std::uniform_int_distribution<int> grid_dist(0, 4);

    const auto draw = [&](std::size_t n, bool tied) {
        std::vector<double> v(n);
        for (;;) {
            for (double& x : v) x = tied ? grid_dist(rng) / 4.0 : real_dist(rng);
            const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
            if (*lo != *hi) return v; // constant vectors are a documented error, not a diff
        }
    };

    double worst = 0.0;
    std::string worst_metric = "none";
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = len_dist(rng);
        const bool tied = trial % 2 == 0;
        const std::vector<double> x = draw(n, tied);
        const std::vector<double> y = draw(n, tied);

        const std::pair<const char*, double> diffs[] = {
            {"rmse", std::abs(isa::metrics::rmse(x, y) - static_cast<double>(oracle::rmse(x, y)))},
            {"rmae", std::abs(isa::metrics::rmae(x, y) - static_cast<double>(oracle::rmae(x, y)))},
            {"pcc", std::abs(isa::metrics::pcc(x, y) - static_cast<double>(oracle::pcc(x, y)))},
            {"srcc", std::abs(isa::metrics::srcc(x, y) - static_cast<double>(oracle::srcc(x, y)))},
            {"kendall_tau", std::abs(isa::metrics::kendall_tau(x, y) -
                                     static_cast<double>(oracle::kendall_tau_b(x, y)))},
        };
        for (const auto& [name, diff] : diffs) {
            if (diff > worst) {
                worst = diff;
                worst_metric = name;
            }
            if (diff > 1e-9)
                return fail(std::string(name) + " off by " + fmt(diff) + " at n=" + std::to_string(n));
        }
    }
    const double elapsed = seconds_since(start);
    if (elapsed >= 10.0) return fail("oracle sweep took " + fmt(elapsed) + "s (budget 10s)");
    return pass("1000 pairs, max |diff| " + fmt(worst) + " (" + worst_metric + "), " + fmt(elapsed) + "s");
}

// ---------------------------------------------------------------------------
// 2. closed-form SRCC vs rank-Pearson on tie-free data

Outcome criterion_srcc_closed_form() {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<std::size_t> len_dist(3, 100);
    std::uniform_real_distribution<double> real_dist(0.0, 1.0);

    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = len_dist(rng);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            // continuous draws collide with probability ~0; regenerate if they do
            x[i] = real_dist(rng);
            y[i] = real_dist(rng);
        }
        auto tie_free = [](std::vector<double> v) {
            std::sort(v.begin(), v.end());
            return std::adjacent_find(v.begin(), v.end()) == v.end();
        };
        if (!tie_free(x) || !tie_free(y)) {
            --trial;
            continue;
        }
        const double diff = std::abs(isa::metrics::srcc_closed_form(x, y) - isa::metrics::srcc(x, y));
        worst = std::max(worst, diff);
        if (diff > 1e-12)
            return fail("closed form diverges from rank-Pearson by " + fmt(diff) + " at n=" +
                        std::to_string(n));
    }
    return pass("200 tie-free pairs, max |diff| " + fmt(worst));
}

// ---------------------------------------------------------------------------
// 3. annotation pipeline exactness

Outcome criterion_annotation_exact() {
    using namespace isa::annotation;
    if (normalize_raw(1) != 0.0 || normalize_raw(3) != 0.5 || normalize_raw(5) != 1.0)
        return fail("normalize_raw does not map {1,3,5} to {0,0.5,1} exactly");
    const std::vector<int> ratings = {3, 4, 5};
    if (aggregate_label(ratings) != 0.75) return fail("aggregate_label([3,4,5]) != 0.75");

    const std::vector<double> scores = {0.0, 0.1999999, 0.2, 0.39, 0.4, 0.6, 0.79, 0.8, 1.0};
    const BinDistribution dist = bin_distribution(scores);
    const std::array<std::size_t, 5> expected = {2, 2, 1, 2, 2};
    if (dist.counts != expected) {
        std::string got;
        for (std::size_t c : dist.counts) got += std::to_string(c) + " ";
        return fail("bin boundaries wrong: got " + got);
    }
    return pass("normalize/aggregate/bin boundaries exact");
}

// ---------------------------------------------------------------------------
// 4. released-label distribution replication (contingent)

Outcome criterion_released_distribution() {
    const char* env = std::getenv("ISA_RELEASED_MANIFEST");
    if (!env || !*env)
        return skip("released dataset labels not present; point ISA_RELEASED_MANIFEST at the labeled "
                    "manifest to run the exact bin comparison");

    const auto records = isa::read_manifest(env);
    const std::array<std::size_t, 5> want_entity = {476, 789, 999, 294, 388};
    const std::array<std::size_t, 5> want_semantic = {767, 826, 828, 382, 143};
    for (const auto& [kind, want] :
         {std::pair{isa::ScoreKind::entity, want_entity}, std::pair{isa::ScoreKind::semantic, want_semantic}}) {
        std::vector<double> scores;
        for (const auto& record : records)
            if (const auto s = record.score(kind)) scores.push_back(*s);
        const auto dist = isa::annotation::bin_distribution(scores);
        if (dist.counts != want) {
            std::string got;
            for (std::size_t c : dist.counts) got += std::to_string(c) + " ";
            return fail(std::string(isa::to_string(kind)) + " bins " + got + "do not match the published "
                        "distribution (zero tolerance)");
        }
    }
    return pass("published entity/semantic bin counts reproduced exactly");
}

// ---------------------------------------------------------------------------
// 5. consistency replication, or exact oracle agreement as the substitute

struct PairwiseOracle {
    long double pcc = 0, srcc = 0, kendall = 0;
    std::size_t pairs = 0, skipped = 0;
};

PairwiseOracle pairwise_oracle(const isa::AnnotationMatrix& matrix) {
    PairwiseOracle out;
    const std::size_t k = matrix.n_annotators();
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            std::vector<double> left, right;
            for (std::size_t i = 0; i < matrix.n_images(); ++i) {
                left.push_back(matrix.at(i, a));
                right.push_back(matrix.at(i, b));
            }
            const auto constant = [](const std::vector<double>& v) {
                return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
            };
            if (constant(left) || constant(right)) {
                ++out.skipped;
                continue;
            }
            out.pcc += oracle::pcc(left, right);
            out.srcc += oracle::srcc(left, right);
            out.kendall += oracle::kendall_tau_b(left, right);
            ++out.pairs;
        }
    }
    if (out.pairs > 0) {
        out.pcc /= static_cast<long double>(out.pairs);
        out.srcc /= static_cast<long double>(out.pairs);
        out.kendall /= static_cast<long double>(out.pairs);
    }
    return out;
}

Outcome criterion_consistency() {
    if (const char* env = std::getenv("ISA_RELEASED_ANNOTATIONS"); env && *env) {
        const auto raw = isa::annotation::read_annotations(env);
        struct Target {
            isa::ScoreKind kind;
            double pcc, srcc, kendall, icc;
        };
        const Target targets[] = {{isa::ScoreKind::entity, 0.836, 0.827, 0.762, 0.937},
                                  {isa::ScoreKind::semantic, 0.799, 0.798, 0.729, 0.922}};
        for (const Target& t : targets) {
            const auto matrix = isa::annotation::matrix_from_records(raw, t.kind);
            const auto stats = isa::annotation::pairwise_consistency(matrix);
            if (std::abs(stats.mean_pcc - t.pcc) > 0.01 || std::abs(stats.mean_srcc - t.srcc) > 0.01 ||
                std::abs(stats.mean_kendall - t.kendall) > 0.01)
                return fail(std::string(isa::to_string(t.kind)) + " pairwise stats outside +/-0.01 of "
                            "the published values");
            bool icc_hit = false;
            for (auto variant : {isa::annotation::IccVariant::c_1, isa::annotation::IccVariant::c_k,
                                 isa::annotation::IccVariant::a_1, isa::annotation::IccVariant::a_k})
                icc_hit = icc_hit || std::abs(isa::annotation::icc(matrix, variant) - t.icc) <= 0.01;
            if (!icc_hit)
                return fail(std::string(isa::to_string(t.kind)) + " ICC outside +/-0.01 under every "
                            "variant");
        }
        return pass("published pairwise/ICC consistency reproduced within +/-0.01");
    }

    // substitute: the consistency suite must agree with the per-pair oracle
    std::mt19937_64 rng(52);
    std::uniform_int_distribution<int> rating(1, 5);
    double worst_pairwise = 0.0, worst_icc = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 3 + rng() % 8;
        const std::size_t k = 2 + rng() % 4;
        std::vector<std::vector<int>> rows(n, std::vector<int>(k));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j) rows[i][j] = rating(rng);
        rows[0][0] = 1; // keep the matrix away from the all-constant degenerate case
        rows[1] = std::vector<int>(k, 5);
        const auto matrix = isa::AnnotationMatrix::from_rows(isa::ScoreKind::entity, rows);

        const auto expected = pairwise_oracle(matrix);
        isa::annotation::PairwiseStats got;
        try {
            got = isa::annotation::pairwise_consistency(matrix);
        } catch (const isa::DegenerateInput&) {
            if (expected.pairs == 0) continue; // both sides agree the matrix is unusable
            return fail("library rejected a matrix the oracle can score");
        }
        if (got.pair_count != expected.pairs + expected.skipped || got.skipped_pairs != expected.skipped)
            return fail("pair bookkeeping disagrees with the oracle");
        const double diff = std::max({std::abs(got.mean_pcc - static_cast<double>(expected.pcc)),
                                      std::abs(got.mean_srcc - static_cast<double>(expected.srcc)),
                                      std::abs(got.mean_kendall - static_cast<double>(expected.kendall))});
        worst_pairwise = std::max(worst_pairwise, diff);
        if (diff > 1e-12) return fail("pairwise means off by " + fmt(diff));

        const oracle::AnovaIcc anova = oracle::icc(matrix);
        const std::pair<isa::annotation::IccVariant, long double> variants[] = {
            {isa::annotation::IccVariant::c_1, anova.c_1},
            {isa::annotation::IccVariant::c_k, anova.c_k},
            {isa::annotation::IccVariant::a_1, anova.a_1},
            {isa::annotation::IccVariant::a_k, anova.a_k},
        };
        for (const auto& [variant, want] : variants) {
            const double idiff =
                std::abs(isa::annotation::icc(matrix, variant) - static_cast<double>(want));
            worst_icc = std::max(worst_icc, idiff);
            if (idiff > 1e-9) return fail("ICC variant disagrees with the ANOVA oracle by " + fmt(idiff));
        }
    }
    return pass("substitute (raw ratings not released): 30 synthetic matrices match the per-pair oracle, "
                "max pairwise |diff| " + fmt(worst_pairwise) + ", max ICC |diff| " + fmt(worst_icc));
}

// ---------------------------------------------------------------------------
// 6. pipeline-level properties in place of full-scale published-result replication

int run_cli_in(const fs::path& dir, const std::string& args) {
    const std::string cmd = "cd " + dir.string() + " && " + helpers::cli_binary() + " " + args +
                            " >>cli_log.txt 2>&1";
    const int rc = std::system(cmd.c_str());
    return (rc >= 0 && WIFEXITED(rc)) ? WEXITSTATUS(rc) : -1;
}

void build_pipeline_fixture(const fs::path& dir) {
    std::vector<isa::annotation::AnnotationRecord> raw;
    for (int i = 0; i < 50; ++i) {
        char name[16];
        std::snprintf(name, sizeof(name), "img%02d", i);
        helpers::write_noise_image(dir / "images" / (std::string(name) + ".png"), 500 + i);
        const int level = i % 5;
        for (const char* kind : {"entity", "semantic"}) {
            isa::annotation::AnnotationRecord record;
            record.id = name;
            record.kind = isa::score_kind_from_string(kind);
            record.ratings = {level + 1, level + 1, (level + 1) % 5 + 1};
            raw.push_back(std::move(record));
        }
        std::string text;
        for (int k = 0; k <= level + i % 3; ++k) text += "lantern voyage ";
        text += "a quiet scene with a table and a window";
        helpers::write_naive_fixture(dir / "fixtures", name, text);
    }
    isa::annotation::write_annotations(dir / "annotations.jsonl", raw);
}

// ingest -> split -> annotate -> extract(mock) -> train -> eval -> protocol
bool run_pipeline(const fs::path& dir, std::string& failed_step) {
    const std::vector<std::string> steps = {
        "ingest --dir images --out manifest.jsonl",
        "split --manifest manifest.jsonl --seed 4",
        "annotate-aggregate --annotations annotations.jsonl --manifest manifest.jsonl",
        "extract --mode naive --manifest manifest.jsonl --cache cache.jsonl --backend mock "
        "--fixtures fixtures",
        "train --manifest manifest.jsonl --cache cache.jsonl --mode naive --kind entity "
        "--out entity.model",
        "eval --manifest manifest.jsonl --model entity.model --cache cache.jsonl --mode naive "
        "--report eval.json",
        "protocol --manifest manifest.jsonl --cache cache.jsonl --mode naive --kind entity "
        "--seeds 21,22,23 --report protocol.json",
    };
    for (const std::string& step : steps) {
        if (run_cli_in(dir, step) != 0) {
            failed_step = step.substr(0, step.find(' '));
            return false;
        }
    }
    return true;
}

Outcome criterion_pipeline_properties() {
    // (a) offline end-to-end run, bit-reproducible across two invocations
    helpers::TempDir tmp;
    const fs::path dir_a = tmp / "run_a";
    const fs::path dir_b = tmp / "run_b";
    build_pipeline_fixture(dir_a);
    build_pipeline_fixture(dir_b);

    const auto start = Clock::now();
    std::string failed_step;
    if (!run_pipeline(dir_a, failed_step)) return fail("pipeline step '" + failed_step + "' failed");
    const double elapsed = seconds_since(start);
    if (elapsed >= 60.0) return fail("pipeline took " + fmt(elapsed) + "s (budget 60s)");
    if (!run_pipeline(dir_b, failed_step))
        return fail("second pipeline run failed at '" + failed_step + "'");

    for (const char* artifact : {"manifest.jsonl", "cache.jsonl", "entity.model", "eval.json",
                                 "protocol.json", "protocol.json.seed21", "protocol.json.seed22",
                                 "protocol.json.seed23"}) {
        if (helpers::read_file(dir_a / artifact) != helpers::read_file(dir_b / artifact))
            return fail(std::string(artifact) + " differs between two identical invocations");
    }

    // (b) reference discriminator quality on the synthetic keyword corpus
    const auto corpus = helpers::keyword_corpus(700, 4242);
    for (isa::ScoreKind kind : {isa::ScoreKind::entity, isa::ScoreKind::semantic}) {
        auto examples = isa::discriminator::build_examples(corpus.records, corpus.bundles, kind,
                                                           isa::extraction::Ablation::full);
        const std::vector<isa::discriminator::Example> train(examples.begin(), examples.begin() + 500);
        const std::vector<isa::discriminator::Example> test(examples.begin() + 500, examples.end());
        isa::discriminator::TrainConfig config;
        config.score_kind = kind;
        const auto model = isa::discriminator::RegressorModel::train(train, config);
        const auto report = isa::discriminator::evaluate(model, test);
        if (!report.pcc || *report.pcc < 0.95 || report.rmse > 0.05)
            return fail(std::string(isa::to_string(kind)) + " discriminator reached PCC " +
                        (report.pcc ? fmt(*report.pcc) : std::string("n/a")) + ", RMSE " +
                        fmt(report.rmse) + " (need >= 0.95 and <= 0.05)");
    }

    // (c) ablation direction: hiding the CoRs must hurt a CoR-borne signal
    const auto cor_corpus = helpers::cor_signal_corpus(400, 777);
    const auto eval_ablation = [&](isa::extraction::Ablation ablation) {
        auto examples = isa::discriminator::build_examples(cor_corpus.records, cor_corpus.bundles,
                                                           isa::ScoreKind::entity, ablation);
        const std::vector<isa::discriminator::Example> train(examples.begin(), examples.begin() + 300);
        const std::vector<isa::discriminator::Example> test(examples.begin() + 300, examples.end());
        isa::discriminator::TrainConfig config;
        config.ablation = ablation;
        const auto model = isa::discriminator::RegressorModel::train(train, config);
        return isa::discriminator::evaluate(model, test);
    };
    const auto full = eval_ablation(isa::extraction::Ablation::full);
    const auto blind = eval_ablation(isa::extraction::Ablation::no_cors);
    if (!full.pcc) return fail("full-input discriminator is degenerate on the CoR-signal corpus");
    if (blind.pcc && *blind.pcc >= *full.pcc)
        return fail("no_cors PCC " + fmt(*blind.pcc) + " is not below full PCC " + fmt(*full.pcc));

    return pass("50-image e2e bit-reproducible in " + fmt(elapsed) + "s; keyword corpus PCC/RMSE within "
                "bounds; no_cors PCC " + (blind.pcc ? fmt(*blind.pcc) : std::string("n/a")) +
                " < full PCC " + fmt(*full.pcc));
}

// ---------------------------------------------------------------------------
// 7. determinism

Outcome criterion_determinism() {
    helpers::TempDir tmp;

    // identical seed twice -> byte-identical model artifact
    const auto corpus = helpers::keyword_corpus(60, 97);
    const auto examples = isa::discriminator::build_examples(corpus.records, corpus.bundles,
                                                             isa::ScoreKind::entity,
                                                             isa::extraction::Ablation::full);
    isa::discriminator::TrainConfig config;
    isa::discriminator::RegressorModel::train(examples, config).save(tmp / "one.model");
    isa::discriminator::RegressorModel::train(examples, config).save(tmp / "two.model");
    if (helpers::read_file(tmp / "one.model") != helpers::read_file(tmp / "two.model"))
        return fail("same-seed training produced different model bytes");

    // identical seed twice -> identical split assignment
    std::vector<isa::ImageRecord> records;
    for (int i = 0; i < 20; ++i) {
        isa::ImageRecord record;
        record.id = "r" + std::to_string(i);
        record.path = "/img/" + record.id + ".png";
        record.width = record.height = 8;
        records.push_back(std::move(record));
    }
    isa::dataset::SplitSpec spec;
    spec.seed = 7;
    const auto first = isa::dataset::assign_splits(records, spec);
    const auto second = isa::dataset::assign_splits(records, spec);
    for (std::size_t i = 0; i < records.size(); ++i)
        if (*first[i].split != *second[i].split)
            return fail("same-seed split assignment differs at " + first[i].id);

    // extract_batch cache idempotence: the second pass never goes upstream
    std::vector<isa::ImageRecord> manifest;
    for (int i = 0; i < 10; ++i) {
        const std::string id = "img" + std::to_string(i);
        helpers::write_noise_image(tmp.path() / "images" / (id + ".png"), 700 + i);
        helpers::write_naive_fixture(tmp / "fixtures", id, "a lantern beside a window " + id);
        isa::ImageRecord record;
        record.id = id;
        record.path = (tmp.path() / "images" / (id + ".png")).string();
        record.width = record.height = 32;
        manifest.push_back(std::move(record));
    }
    isa::extraction::ExtractorConfig extractor;
    extractor.backend = "mock";
    extractor.fixture_dir = tmp / "fixtures";
    const auto cache_file = tmp / "cache.jsonl";
    {
        isa::extraction::FeatureCache cache(cache_file);
        const auto first_run =
            isa::extraction::extract_batch(manifest, isa::extraction::Mode::naive, extractor, cache);
        if (first_run.upstream_requests != 10)
            return fail("expected 10 upstream requests on a cold cache, saw " +
                        std::to_string(first_run.upstream_requests));
    }
    const std::string cache_bytes = helpers::read_file(cache_file);
    isa::extraction::FeatureCache cache(cache_file);
    const auto rerun =
        isa::extraction::extract_batch(manifest, isa::extraction::Mode::naive, extractor, cache);
    if (rerun.upstream_requests != 0 || rerun.cache_hits != 10)
        return fail("warm rerun went upstream " + std::to_string(rerun.upstream_requests) + " times");
    if (helpers::read_file(cache_file) != cache_bytes)
        return fail("warm rerun rewrote the cache file");

    return pass("same-seed training and splitting byte-stable; warm extract issues zero upstream requests");
}

// ---------------------------------------------------------------------------
// 8. selection vs brute-force oracle

Outcome criterion_selection_oracle() {
    std::mt19937_64 rng(88);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<isa::selection::ScoredRecord> scored;
        const std::size_t n = rng() % 40;
        for (std::size_t i = 0; i < n; ++i) {
            isa::ImageRecord record;
            record.id = "img" + std::to_string(rng() % 1000) + "_" + std::to_string(i);
            record.path = "/x/" + record.id;
            record.width = record.height = 4;
            const double entity = static_cast<double>(rng() % 21) / 20.0; // grid scores force ties
            const double semantic = static_cast<double>(rng() % 21) / 20.0;
            scored.emplace_back(std::move(record), isa::ScorePair(entity, semantic));
        }
        isa::selection::SelectionCriteria criteria;
        criteria.top_k = 1 + rng() % 10;
        double lo = unit(rng), hi = unit(rng);
        if (lo > hi) std::swap(lo, hi);
        criteria.entity_low = lo;
        criteria.entity_high = hi;
        if (trial % 3 == 0) criteria.min_semantic = unit(rng);

        const auto got = isa::selection::rank_and_filter(scored, criteria);
        const auto want = oracle::select(scored, criteria);
        if (got.size() != want.size())
            return fail("shortlist size " + std::to_string(got.size()) + " vs oracle " +
                        std::to_string(want.size()) + " on trial " + std::to_string(trial));
        for (std::size_t i = 0; i < got.size(); ++i)
            if (got[i].first.id != want[i].first.id)
                return fail("shortlist order diverges from the oracle at position " + std::to_string(i) +
                            " on trial " + std::to_string(trial));
    }
    return pass("100 random scored sets match the brute-force oracle");
}

} // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"metric-oracle equivalence", criterion_metrics_oracle},
        {"closed-form SRCC consistency", criterion_srcc_closed_form},
        {"annotation pipeline exactness", criterion_annotation_exact},
        {"released-label distribution", criterion_released_distribution},
        {"annotator consistency", criterion_consistency},
        {"pipeline properties", criterion_pipeline_properties},
        {"determinism", criterion_determinism},
        {"selection correctness", criterion_selection_oracle},
    };

    int failures = 0;
    for (std::size_t i = 0; i < std::size(criteria); ++i) {
        Outcome outcome = fail("unhandled exception");
        try {
            outcome = criteria[i].second();
        } catch (const std::exception& e) {
            outcome = fail(std::string("exception: ") + e.what());
        }
        const char* status = outcome.status == Outcome::Status::pass ? "PASS"
                             : outcome.status == Outcome::Status::skip ? "SKIP"
                                                                       : "FAIL";
        std::cout << "criterion " << (i + 1) << " (" << criteria[i].first << "): " << status << " - "
                  << outcome.detail << "\n";
        if (outcome.status == Outcome::Status::fail) ++failures;
    }
    if (failures > 0) std::cout << failures << " criteria failed\n";
    return failures == 0 ? 0 : 1;
}
