#pragma once

#include "skillbank/bank.hpp"
#include "skillbank/retrieval.hpp"
#include "skillbank/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace skillbank::testutil {

// ---------------------------------------------------------------------------
// Independent oracles. These deliberately avoid the library's retrieval and
// pruning code paths (and its SIMD kernels): naive loops, <cmath> only.
// ---------------------------------------------------------------------------

inline double naive_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    if (dot > 1.0) dot = 1.0;
    if (dot < -1.0) dot = -1.0;
    return dot;
}

// Exhaustive two-stage retrieval: filter, sort by cosine, truncate, rescore,
// sort by score, truncate.
inline std::vector<SkillId> oracle_retrieve(const SkillPool& pool, const Query& query,
                                            const RetrievalParams& params) {
    struct Entry {
        SkillId id;
        double cos;
        double score;
    };
    std::vector<Entry> entries;
    for (const Skill& s : pool.skills) {
        double c = naive_cosine(query.embedding, s.key.embedding);
        if (c >= params.tau_sim) entries.push_back({s.id, c, 0.0});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.cos != b.cos) return a.cos > b.cos;
        return a.id < b.id;
    });
    if (entries.size() > static_cast<std::size_t>(params.top_m)) {
        entries.resize(static_cast<std::size_t>(params.top_m));
    }
    for (Entry& e : entries) {
        const Skill* s = nullptr;
        for (const Skill& cand : pool.skills) {
            if (cand.id == e.id) s = &cand;
        }
        double sim_hat = (e.cos + 1.0) / 2.0;
        if (sim_hat < 0.0) sim_hat = 0.0;
        if (sim_hat > 1.0) sim_hat = 1.0;
        double bonus = params.eta * std::sqrt(std::log(1.0 + (double)pool.total_retrievals) /
                                              (1.0 + (double)s->retrieval_count));
        e.score = params.alpha * sim_hat + (1.0 - params.alpha) * (s->utility + bonus);
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    if (entries.size() > static_cast<std::size_t>(params.top_k)) {
        entries.resize(static_cast<std::size_t>(params.top_k));
    }
    std::vector<SkillId> ids;
    for (const Entry& e : entries) ids.push_back(e.id);
    return ids;
}

// Exhaustive pruning: unprotected skills sorted ascending by
// (u + eta * sqrt(ln(1 + N_r) / (1 + n)), id), lowest |pool| - capacity evicted.
inline std::vector<SkillId> oracle_prune(const SkillPool& pool, std::int64_t capacity, double eta,
                                         std::int64_t protection_window,
                                         std::int64_t current_step) {
    std::int64_t excess = static_cast<std::int64_t>(pool.skills.size()) - capacity;
    if (excess <= 0) return {};
    struct Entry {
        SkillId id;
        double score;
    };
    std::vector<Entry> evictable;
    for (const Skill& s : pool.skills) {
        if (current_step - s.created_step >= protection_window) {
            double score = s.utility + eta * std::sqrt(std::log(1.0 + (double)pool.total_retrievals) /
                                                       (1.0 + (double)s.retrieval_count));
            evictable.push_back({s.id, score});
        }
    }
    std::sort(evictable.begin(), evictable.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.id < b.id;
    });
    std::vector<SkillId> ids;
    for (const Entry& e : evictable) {
        if (static_cast<std::int64_t>(ids.size()) >= excess) break;
        ids.push_back(e.id);
    }
    return ids;
}

// ---------------------------------------------------------------------------
// Random-instance generators.
// ---------------------------------------------------------------------------

inline std::vector<double> random_unit_vector(Rng& rng, int dim) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double norm_sq = 0.0;
    do {
        norm_sq = 0.0;
        for (double& x : v) {
            x = rng.next_double() * 2.0 - 1.0;
            norm_sq += x * x;
        }
    } while (norm_sq < 1e-6);
    double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v) x *= inv;
    return v;
}

inline std::string random_text(Rng& rng, int max_tokens) {
    static const char* words[] = {"open",  "close", "drawer", "stove", "lamp",  "pick",
                                  "place", "cool",  "heat",   "look",  "shelf", "go"};
    int n = rng.uniform_int(max_tokens + 1);
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i > 0) out += (rng.uniform_int(4) == 0) ? "  " : " ";
        out += words[rng.uniform_int(12)];
        if (rng.uniform_int(3) == 0) out += std::to_string(rng.uniform_int(30));
    }
    return out;
}

inline SkillPool random_pool(Rng& rng, SkillKind kind, int max_skills, int dim) {
    SkillPool pool;
    pool.kind = kind;
    pool.capacity = 1 + rng.uniform_int(64);
    int n = rng.uniform_int(max_skills + 1);
    for (int i = 0; i < n; ++i) {
        Skill s;
        s.id = i + 1;
        s.kind = kind;
        s.key.task_text = "family-" + std::to_string(rng.uniform_int(8));
        if (kind == SkillKind::Step) {
            s.key.observation_text = "obs-" + std::to_string(rng.uniform_int(16));
        }
        s.key.embedding = random_unit_vector(rng, dim);
        s.body = "body " + std::to_string(i);
        s.normalized_body = canonicalize(s.body);
        s.utility = rng.next_double() * 2.0 - 1.0;
        s.retrieval_count = rng.uniform_int(40);
        s.created_step = rng.uniform_int(100);
        pool.total_retrievals += s.retrieval_count;
        pool.skills.push_back(std::move(s));
    }
    return pool;
}

} // namespace skillbank::testutil
