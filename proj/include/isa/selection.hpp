#pragma once
// Rule-based shortlist building: rank scored images by semantic complexity
// and keep those whose entity complexity sits in a moderate band.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "isa/core.hpp"

namespace isa::selection {

struct SelectionCriteria {
    double entity_low = 0.2;  // closed band on the entity score;
    double entity_high = 0.6; // the "moderate" default is a documented heuristic
    std::size_t top_k = 10;
    std::optional<double> min_semantic;
};

using ScoredRecord = std::pair<ImageRecord, ScorePair>;

// Sort by semantic score descending (ties broken by id ascending), drop
// records outside the entity band or below min_semantic, return the first
// top_k. Empty input yields an empty shortlist.
std::vector<ScoredRecord> rank_and_filter(std::span<const ScoredRecord> scored,
                                          const SelectionCriteria& criteria);

// one shortlist entry per JSONL line: id, entity_score, semantic_score
std::string shortlist_to_json_lines(std::span<const ScoredRecord> shortlist);

// human-readable table with both scores
std::string render_shortlist(std::span<const ScoredRecord> shortlist);

} // namespace isa::selection
