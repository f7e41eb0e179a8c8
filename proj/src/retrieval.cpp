#include "skillbank/retrieval.hpp"

#include "skillbank/embedding.hpp"
#include "skillbank/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace skillbank {

std::vector<Candidate> stage1_candidates(const SkillPool& pool, const Query& query,
                                         const RetrievalParams& params) {
    if (pool.kind != query.kind) {
        throw std::invalid_argument("query kind does not match pool kind");
    }
    std::vector<Candidate> candidates;
    candidates.reserve(pool.skills.size());
    for (const Skill& skill : pool.skills) {
        double c = cosine(query.embedding, skill.key.embedding);
        if (c >= params.tau_sim) {
            Candidate cand;
            cand.skill_id = skill.id;
            cand.raw_cosine = c;
            cand.sim_hat = std::clamp((c + 1.0) / 2.0, 0.0, 1.0);
            candidates.push_back(cand);
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                         if (a.raw_cosine != b.raw_cosine) return a.raw_cosine > b.raw_cosine;
                         return a.skill_id < b.skill_id;
                     });
    if (static_cast<int>(candidates.size()) > params.top_m) {
        candidates.resize(static_cast<std::size_t>(params.top_m));
    }
    return candidates;
}

double selection_score(const Candidate& candidate, const Skill& skill, const SkillPool& pool,
                       const RetrievalParams& params) {
    double bonus = params.eta * std::sqrt(std::log(1.0 + static_cast<double>(pool.total_retrievals)) /
                                          (1.0 + static_cast<double>(skill.retrieval_count)));
    return params.alpha * candidate.sim_hat + (1.0 - params.alpha) * (skill.utility + bonus);
}

std::vector<Skill> retrieve(const SkillPool& pool, const Query& query,
                            const RetrievalParams& params, bool record, RetrievalLog* log) {
    if (record && log == nullptr) {
        throw std::invalid_argument("record=true retrieval requires a retrieval log");
    }
    std::vector<Candidate> candidates = stage1_candidates(pool, query, params);
    for (Candidate& cand : candidates) {
        cand.score = selection_score(cand, *pool.find(cand.skill_id), pool, params);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                         if (a.score != b.score) return a.score > b.score;
                         return a.skill_id < b.skill_id;
                     });
    if (static_cast<int>(candidates.size()) > params.top_k) {
        candidates.resize(static_cast<std::size_t>(params.top_k));
    }

    std::vector<Skill> out;
    out.reserve(candidates.size());
    for (const Candidate& cand : candidates) {
        out.push_back(*pool.find(cand.skill_id));
        if (record) {
            log->for_kind(pool.kind).push_back(cand.skill_id);
        }
    }
    return out;
}

} // namespace skillbank
