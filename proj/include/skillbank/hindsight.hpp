#pragma once

#include "skillbank/bank.hpp"
#include "skillbank/policy.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace skillbank {

struct TrajectoryRecord {
    int traj_id = 0;
    bool skill_group = false; // b_i
    int success = 0;          // Y_i
    double base_return = 0.0; // R_i
    std::set<SkillId> task_skill_ids;
    std::vector<std::vector<SkillId>> step_skill_ids_by_step;
    std::vector<StepSample> steps;
};

struct RolloutGroup {
    std::string task_text;
    std::vector<TrajectoryRecord> records;
};

struct GroupStats {
    double y_base = 0.0;
    double y_skill = 0.0;
    double delta_task = 0.0;
    std::map<int, double> credits; // traj_id -> c_i, skill-group trajectories only
};

struct HindsightParams {
    double beta_task = 0.2;
    double beta_step = 0.2;
    double lambda = 0.5;
};

// Success-rate means over the two halves, the task-level gap, and the
// per-trajectory credits c_i = Y_i - y_base. Throws UnbalancedGroup when the
// halves are unequal.
GroupStats compute_group_stats(const RolloutGroup& group);

// Stats convention for the no-baseline-group ablation: every trajectory is
// skill-injected, y_base is taken as 0, credits become the raw successes,
// and delta carries no meaning (utility updates are skipped by the caller).
GroupStats skill_only_group_stats(const RolloutGroup& group);

// (1 - beta) * u + beta * signal.
double ema_update(double u, double signal, double beta);

struct UpdateReport {
    // (skill id, signal) in application order: task skills by ascending id,
    // then step skills by (trajectory order, ascending id).
    std::vector<std::pair<SkillId, double>> task_updates;
    std::vector<std::pair<SkillId, double>> step_updates;
};

// EMA utility updates from one task group: each retrieved task skill gets
// delta once per group; each step skill gets the credit c_i once per
// trajectory it was injected into (repeats within a trajectory collapse).
UpdateReport apply_utility_updates(SkillBank& bank, const RolloutGroup& group,
                                   const GroupStats& stats, const HindsightParams& params);

// lambda * (Y_i - y_base); skill-group trajectories only.
double intrinsic_reward(int success, double y_base, double lambda);

// R_i + intrinsic for the skill half, plain R_i for the baseline half,
// aligned with group.records.
std::vector<double> augmented_returns(const RolloutGroup& group, const GroupStats& stats,
                                      double lambda);

} // namespace skillbank
