#pragma once

#include "skillbank/bank.hpp"

#include <cstdint>
#include <vector>

namespace skillbank {

struct PruneParams {
    std::int64_t capacity = 64;          // N_max per pool
    double eta = 0.5;                    // shared exploration bonus strength
    std::int64_t protection_window = 10; // T_prot, in training steps
};

// u_m + eta * sqrt(ln(1 + N_r) / (1 + n_m)) — same bonus form as retrieval.
double eviction_score(const Skill& skill, const SkillPool& pool, double eta);

struct PruneReport {
    std::vector<std::pair<SkillId, double>> evicted; // (id, score) in eviction order
};

// Removes the lowest-scoring unprotected skills until the pool fits its
// capacity (or no unprotected skill remains). Scores are computed once
// against the pre-prune pool snapshot; ties evict the smaller id first.
// Skills younger than the protection window are never evicted.
PruneReport prune_pool(SkillBank& bank, SkillKind kind, const PruneParams& params,
                       std::int64_t current_step);

} // namespace skillbank
