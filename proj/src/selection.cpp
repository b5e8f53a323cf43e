#include "isa/selection.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace isa::selection {

std::vector<ScoredRecord> rank_and_filter(std::span<const ScoredRecord> scored,
                                          const SelectionCriteria& criteria) {
    if (!(criteria.entity_low >= 0.0 && criteria.entity_high <= 1.0 &&
          criteria.entity_low <= criteria.entity_high))
        throw InvalidInput("entity band must satisfy 0 <= low <= high <= 1");
    if (criteria.top_k < 1) throw InvalidInput("top_k must be >= 1");
    if (criteria.min_semantic && !(*criteria.min_semantic >= 0.0 && *criteria.min_semantic <= 1.0))
        throw InvalidInput("min_semantic must lie in [0,1]");

    std::vector<ScoredRecord> ranked(scored.begin(), scored.end());
    std::sort(ranked.begin(), ranked.end(), [](const ScoredRecord& a, const ScoredRecord& b) {
        if (a.second.semantic() != b.second.semantic()) return a.second.semantic() > b.second.semantic();
        return a.first.id < b.first.id;
    });

    std::vector<ScoredRecord> shortlist;
    for (const ScoredRecord& item : ranked) {
        if (shortlist.size() == criteria.top_k) break;
        const double entity = item.second.entity();
        if (entity < criteria.entity_low || entity > criteria.entity_high) continue;
        if (criteria.min_semantic && item.second.semantic() < *criteria.min_semantic) continue;
        shortlist.push_back(item);
    }
    return shortlist;
}

std::string shortlist_to_json_lines(std::span<const ScoredRecord> shortlist) {
    std::string out;
    for (const ScoredRecord& item : shortlist) {
        nlohmann::json j;
        j["id"] = item.first.id;
        j["path"] = item.first.path;
        j["entity_score"] = item.second.entity();
        j["semantic_score"] = item.second.semantic();
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string render_shortlist(std::span<const ScoredRecord> shortlist) {
    std::size_t id_width = 2;
    for (const ScoredRecord& item : shortlist) id_width = std::max(id_width, item.first.id.size());

    std::ostringstream out;
    out << std::setw(4) << "rank" << "  " << std::left << std::setw(static_cast<int>(id_width)) << "id"
        << std::right << "  " << std::setw(8) << "entity" << "  " << std::setw(8) << "semantic" << '\n';
    out << std::fixed << std::setprecision(3);
    for (std::size_t i = 0; i < shortlist.size(); ++i) {
        out << std::setw(4) << (i + 1) << "  " << std::left << std::setw(static_cast<int>(id_width))
            << shortlist[i].first.id << std::right << "  " << std::setw(8)
            << shortlist[i].second.entity() << "  " << std::setw(8) << shortlist[i].second.semantic()
            << '\n';
    }
    return out.str();
}

} // namespace isa::selection
