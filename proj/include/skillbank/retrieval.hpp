#pragma once

#include "skillbank/bank.hpp"

#include <optional>
#include <string>
#include <vector>

namespace skillbank {

struct Query {
    SkillKind kind = SkillKind::Task;
    std::string task_text;
    std::optional<std::string> observation_text;
    std::vector<double> embedding;
};

struct RetrievalParams {
    int top_m = 8;
    int top_k = 2;
    double tau_sim = 0.3;  // threshold on the raw cosine
    double alpha = 0.5;    // similarity vs utility weight
    double eta = 0.5;      // exploration bonus strength
};

struct Candidate {
    SkillId skill_id = 0;
    double raw_cosine = 0.0;
    double sim_hat = 0.0; // clamp((raw_cosine + 1) / 2, 0, 1)
    double score = 0.0;
};

// Deferred side effects of record=true retrievals: one entry per skill per
// retrieval event, applied via SkillBank::commit_retrievals in the update
// phase.
struct RetrievalLog {
    std::vector<SkillId> task_ids;
    std::vector<SkillId> step_ids;

    std::vector<SkillId>& for_kind(SkillKind kind) {
        return kind == SkillKind::Task ? task_ids : step_ids;
    }
    bool empty() const { return task_ids.empty() && step_ids.empty(); }
};

// Similarity filter: every skill with raw cosine >= tau_sim, sorted by raw
// cosine descending (ties to the smaller id), truncated to top_m.
std::vector<Candidate> stage1_candidates(const SkillPool& pool, const Query& query,
                                         const RetrievalParams& params);

// alpha * sim_hat + (1 - alpha) * (u_m + eta * sqrt(ln(1 + N_r) / (1 + n_m)))
double selection_score(const Candidate& candidate, const Skill& skill, const SkillPool& pool,
                       const RetrievalParams& params);

// Two-stage retrieval. Returned skills are value snapshots taken at query
// time. With record=true the caller must pass a log; counts are only applied
// when the log is committed.
std::vector<Skill> retrieve(const SkillPool& pool, const Query& query,
                            const RetrievalParams& params, bool record,
                            RetrievalLog* log = nullptr);

} // namespace skillbank
