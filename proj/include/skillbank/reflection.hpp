#pragma once

#include "skillbank/bank.hpp"
#include "skillbank/embedding.hpp"
#include "skillbank/hindsight.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace skillbank {

struct ReflectionRequest {
    std::string task_text;
    TrajectoryRecord failed;                  // from the skill group, Y = 0
    std::optional<TrajectoryRecord> success;  // from either half, Y = 1
};

struct StepSkillDraft {
    std::string body;
    int failure_step = 0;    // 1-based index into the failed trajectory
    std::string observation; // must equal the failed trajectory's observation there
};

struct ReflectionOutput {
    std::optional<std::string> task_skill;
    std::optional<StepSkillDraft> step_skill;
};

class Reflector {
public:
    virtual ~Reflector() = default;
    // May throw ReflectorFailure.
    virtual ReflectionOutput generate(const ReflectionRequest& request) = 0;
};

// Strictly below threshold.
bool should_reflect(double y_skill, double tau_ref);

// Uniformly samples one failed skill-group trajectory and, when one exists,
// one successful trajectory from the whole group. Returns nothing only if
// the skill group has no failure.
std::optional<ReflectionRequest> select_exemplars(const RolloutGroup& group,
                                                  std::uint64_t rng_seed);

struct ReflectionConfig {
    double tau_ref = 0.5;
    bool insert_task_skills = true;
    bool insert_step_skills = true;
};

struct InsertionSummary {
    bool triggered = false;
    std::optional<SkillId> task_skill_id;
    std::optional<SkillId> step_skill_id;
    int dedup_hits = 0;
    bool step_skill_dropped = false; // reflector output violated the step invariants
};

// Threshold check, exemplar selection, reflector invocation, and insertion
// of at most one task skill and one step skill. A step skill whose
// failure_step or observation does not match the failed trajectory is
// dropped; the task skill is still processed. ReflectorFailure propagates.
InsertionSummary reflect_and_insert(SkillBank& bank, const RolloutGroup& group,
                                    const GroupStats& stats, Reflector& reflector,
                                    const Embedder& embedder, const ReflectionConfig& config,
                                    std::int64_t current_step, std::uint64_t rng_seed);

struct RemoteReflectorOptions {
    std::string host = "127.0.0.1";
    int port = 8901;
    int timeout_seconds = 10;
    int max_retries = 1;
};

// Client for the optional reflection service: POST /reflect with the task,
// the failed trajectory as (obs, action, reward) triples, and the optional
// success trajectory. Failures surface ReflectorFailure.
class RemoteReflector final : public Reflector {
public:
    explicit RemoteReflector(RemoteReflectorOptions options);
    ReflectionOutput generate(const ReflectionRequest& request) override;

private:
    RemoteReflectorOptions options_;
};

} // namespace skillbank
