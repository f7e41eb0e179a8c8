#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace skillbank {

enum class SkillKind { Task, Step };

using SkillId = std::int64_t;

// Retrieval key: the task identifier, plus the observation text for step
// skills. The embedding is computed once (embed_key) and stored.
struct RetrievalKey {
    std::string task_text;
    std::optional<std::string> observation_text;
    std::vector<double> embedding;

    bool operator==(const RetrievalKey&) const = default;
};

struct Skill {
    SkillId id = 0;
    SkillKind kind = SkillKind::Task;
    RetrievalKey key;
    std::string body;
    std::string normalized_body;
    double utility = 0.0;
    std::int64_t retrieval_count = 0;
    std::int64_t created_step = 0;

    bool operator==(const Skill&) const = default;
};

struct SkillPool {
    SkillKind kind = SkillKind::Task;
    std::vector<Skill> skills;
    std::int64_t total_retrievals = 0;
    std::int64_t capacity = 64;

    const Skill* find(SkillId id) const;
    bool operator==(const SkillPool&) const = default;
};

// Lowercased, whitespace-collapsed, trimmed copy of the input. Idempotent.
std::string canonicalize(std::string_view body);

struct InsertResult {
    bool inserted = false;
    std::optional<SkillId> id; // new id, or the existing skill's id on a dedup hit
};

// Phase-based concurrency contract: during the read phase the bank may be
// scanned concurrently; every mutation requires the update phase and throws
// PhaseViolation otherwise. The trainer drives the phase transitions.
enum class BankPhase { Read, Update };

class SkillBank {
public:
    SkillBank(int embedding_dim, std::int64_t task_capacity, std::int64_t step_capacity);

    int embedding_dim() const { return embedding_dim_; }
    SkillId next_id() const { return next_id_; }

    const SkillPool& pool(SkillKind kind) const;
    const SkillPool& task_pool() const { return task_pool_; }
    const SkillPool& step_pool() const { return step_pool_; }

    BankPhase phase() const { return phase_; }
    void set_phase(BankPhase phase) { phase_ = phase; }

    // Deduplicating insert; new skills start with utility 0 and retrieval
    // count 0. Throws KeyShapeMismatch when the observation-presence rule is
    // violated, PhaseViolation outside the update phase.
    InsertResult insert_skill(SkillKind kind, RetrievalKey key, std::string body,
                              std::int64_t created_step);

    // Applies a deferred retrieval log: one count per retrieval event per
    // skill. Update phase only.
    void commit_retrievals(SkillKind kind, std::span<const SkillId> ids);

    void set_utility(SkillKind kind, SkillId id, double utility);
    Skill* find_mutable(SkillKind kind, SkillId id);

    // Sum-of-counts bookkeeping check, run at phase boundaries.
    void verify_counts() const;

    bool operator==(const SkillBank&) const = default;

private:
    SkillPool& mutable_pool(SkillKind kind);
    void require_update_phase(const char* op) const;

    int embedding_dim_;
    SkillPool task_pool_;
    SkillPool step_pool_;
    SkillId next_id_ = 1;
    BankPhase phase_ = BankPhase::Update;

    friend struct PruneAccess;
    friend SkillBank load_bank(std::string_view bytes);
};

// Internal handle used by the management module to remove skills under the
// bank's phase contract.
struct PruneAccess {
    static SkillPool& pool(SkillBank& bank, SkillKind kind);
    static void require_update_phase(const SkillBank& bank, const char* op);
};

// Line-delimited JSON persistence: one header line, then one skill per line.
std::string save_bank(const SkillBank& bank);
SkillBank load_bank(std::string_view bytes);

} // namespace skillbank
