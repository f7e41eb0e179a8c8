#include "skillbank/hindsight.hpp"

#include "skillbank/errors.hpp"

#include <algorithm>
#include <stdexcept>

namespace skillbank {

GroupStats compute_group_stats(const RolloutGroup& group) {
    int skill_n = 0, base_n = 0, skill_succ = 0, base_succ = 0;
    for (const TrajectoryRecord& rec : group.records) {
        if (rec.skill_group) {
            ++skill_n;
            skill_succ += rec.success;
        } else {
            ++base_n;
            base_succ += rec.success;
        }
    }
    if (skill_n == 0 || skill_n != base_n) {
        throw UnbalancedGroup("group of " + std::to_string(group.records.size()) +
                              " trajectories splits " + std::to_string(skill_n) + "/" +
                              std::to_string(base_n));
    }
    GroupStats stats;
    stats.y_base = static_cast<double>(base_succ) / base_n;
    stats.y_skill = static_cast<double>(skill_succ) / skill_n;
    stats.delta_task = stats.y_skill - stats.y_base;
    for (const TrajectoryRecord& rec : group.records) {
        if (rec.skill_group) {
            stats.credits[rec.traj_id] = rec.success - stats.y_base;
        }
    }
    return stats;
}

GroupStats skill_only_group_stats(const RolloutGroup& group) {
    if (group.records.empty()) {
        throw UnbalancedGroup("empty rollout group");
    }
    GroupStats stats;
    int succ = 0;
    for (const TrajectoryRecord& rec : group.records) {
        succ += rec.success;
        stats.credits[rec.traj_id] = rec.success;
    }
    stats.y_skill = static_cast<double>(succ) / group.records.size();
    stats.y_base = 0.0;
    stats.delta_task = 0.0;
    return stats;
}

double ema_update(double u, double signal, double beta) {
    if (beta <= 0.0 || beta > 1.0) {
        throw std::invalid_argument("EMA rate must lie in (0, 1]");
    }
    return (1.0 - beta) * u + beta * signal;
}

UpdateReport apply_utility_updates(SkillBank& bank, const RolloutGroup& group,
                                   const GroupStats& stats, const HindsightParams& params) {
    if (bank.phase() != BankPhase::Update) {
        throw PhaseViolation("apply_utility_updates outside the update phase");
    }
    UpdateReport report;

    // Task skills share the group signal, applied once per group.
    std::set<SkillId> task_ids;
    for (const TrajectoryRecord& rec : group.records) {
        task_ids.insert(rec.task_skill_ids.begin(), rec.task_skill_ids.end());
    }
    for (SkillId id : task_ids) {
        const Skill* skill = bank.pool(SkillKind::Task).find(id);
        if (skill == nullptr) {
            throw UnknownSkillId("task skill " + std::to_string(id) + " missing from bank");
        }
        bank.set_utility(SkillKind::Task, id,
                         ema_update(skill->utility, stats.delta_task, params.beta_task));
        report.task_updates.emplace_back(id, stats.delta_task);
    }

    // Step skills take the credit of each trajectory they appeared in;
    // repeats within one trajectory collapse to one update.
    for (const TrajectoryRecord& rec : group.records) {
        if (!rec.skill_group) continue;
        auto credit_it = stats.credits.find(rec.traj_id);
        if (credit_it == stats.credits.end()) {
            throw std::logic_error("missing credit for trajectory " + std::to_string(rec.traj_id));
        }
        double credit = credit_it->second;
        std::set<SkillId> distinct;
        for (const auto& per_step : rec.step_skill_ids_by_step) {
            distinct.insert(per_step.begin(), per_step.end());
        }
        for (SkillId id : distinct) {
            const Skill* skill = bank.pool(SkillKind::Step).find(id);
            if (skill == nullptr) {
                throw UnknownSkillId("step skill " + std::to_string(id) + " missing from bank");
            }
            bank.set_utility(SkillKind::Step, id,
                             ema_update(skill->utility, credit, params.beta_step));
            report.step_updates.emplace_back(id, credit);
        }
    }
    return report;
}

double intrinsic_reward(int success, double y_base, double lambda) {
    return lambda * (static_cast<double>(success) - y_base);
}

std::vector<double> augmented_returns(const RolloutGroup& group, const GroupStats& stats,
                                      double lambda) {
    std::vector<double> out;
    out.reserve(group.records.size());
    for (const TrajectoryRecord& rec : group.records) {
        double r = rec.base_return;
        if (rec.skill_group) {
            r += intrinsic_reward(rec.success, stats.y_base, lambda);
        }
        out.push_back(r);
    }
    return out;
}

} // namespace skillbank
