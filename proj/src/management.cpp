#include "skillbank/management.hpp"

#include "skillbank/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace skillbank {

double eviction_score(const Skill& skill, const SkillPool& pool, double eta) {
    return skill.utility +
           eta * std::sqrt(std::log(1.0 + static_cast<double>(pool.total_retrievals)) /
                           (1.0 + static_cast<double>(skill.retrieval_count)));
}

PruneReport prune_pool(SkillBank& bank, SkillKind kind, const PruneParams& params,
                       std::int64_t current_step) {
    PruneAccess::require_update_phase(bank, "prune_pool");
    SkillPool& pool = PruneAccess::pool(bank, kind);
    PruneReport report;
    if (static_cast<std::int64_t>(pool.skills.size()) <= params.capacity) {
        return report;
    }

    struct Entry {
        SkillId id;
        double score;
    };
    std::vector<Entry> evictable;
    for (const Skill& skill : pool.skills) {
        if (current_step - skill.created_step >= params.protection_window) {
            evictable.push_back({skill.id, eviction_score(skill, pool, params.eta)});
        }
    }
    std::sort(evictable.begin(), evictable.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.id < b.id;
    });

    std::int64_t excess = static_cast<std::int64_t>(pool.skills.size()) - params.capacity;
    std::set<SkillId> doomed;
    for (const Entry& e : evictable) {
        if (excess <= 0) break;
        doomed.insert(e.id);
        report.evicted.emplace_back(e.id, e.score);
        --excess;
    }
    if (!doomed.empty()) {
        std::erase_if(pool.skills, [&](const Skill& s) {
            if (doomed.count(s.id) != 0) {
                pool.total_retrievals -= s.retrieval_count;
                return true;
            }
            return false;
        });
    }
    return report;
}

} // namespace skillbank
