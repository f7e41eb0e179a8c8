#pragma once

#include "skillbank/bank.hpp"
#include "skillbank/embedding.hpp"
#include "skillbank/hindsight.hpp"
#include "skillbank/management.hpp"
#include "skillbank/policy.hpp"
#include "skillbank/reflection.hpp"
#include "skillbank/retrieval.hpp"
#include "skillbank/skillworld.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace skillbank {

struct AblationSwitches {
    bool task_skills = true;
    bool step_skills = true;
    bool management = true;
    bool baseline_group = true;
    bool utility_retrieval = true; // false forces alpha = 1 in scoring
    bool utility_module = true;    // false freezes all utilities

    bool skills_enabled() const { return task_skills || step_skills; }
};

struct Config {
    int group_size = 8; // N, even
    double lambda = 0.5;
    double beta_task = 0.2;
    double beta_step = 0.2;
    double tau_ref = 0.5;
    double tau_sim = 0.3;
    double alpha = 0.5;
    double eta = 0.5;
    int top_m = 8;
    int top_k = 2;
    std::int64_t pool_capacity = 64;     // N_max per pool
    std::int64_t protection_window = 10; // T_prot
    double clip_epsilon = 0.2;
    double beta_kl = 0.0;
    double learning_rate = 0.5;
    double adv_eps = 1e-8;
    int validation_interval = 5;
    int validation_task_count = 128;
    int total_steps = 200;
    int tasks_per_step = 8;
    std::uint64_t seed = 1;
    double success_threshold = 0.5; // for the time-to-threshold summary field
    int embedding_dim = 64;
    AblationSwitches ablation;
    EnvConfig env;
};

// Named ablation presets matching the CLI --ablation flag.
void apply_ablation(Config& config, const std::string& name);
std::vector<std::string> ablation_names();

void validate_config(const Config& config);
Config config_from_json(std::string_view bytes);
std::string config_to_json(const Config& config);

// Per-group statistics; fields stay empty when a variant has no such half
// (no y_skill under pure GRPO, no y_base without the baseline group).
struct TaskGroupMetrics {
    std::string family;
    std::optional<double> y_skill;
    std::optional<double> y_base;
    std::optional<double> delta;
};

struct StepMetrics {
    int step = 0;
    std::vector<TaskGroupMetrics> tasks;
    std::optional<double> mean_y_skill;
    std::optional<double> mean_y_base;
    std::optional<double> mean_delta;
    std::int64_t task_pool_size = 0;
    std::int64_t step_pool_size = 0;
    std::optional<double> bank_mean_utility;
    std::optional<double> retrieved_mean_utility;
    int reflection_triggers = 0;
    int inserted_task_skills = 0;
    int inserted_step_skills = 0;
    int dedup_hits = 0;
    int pruned_task_skills = 0;
    int pruned_step_skills = 0;
    std::optional<double> validation_success;

    std::string to_json_line() const;
};
StepMetrics step_metrics_from_json(std::string_view line);

struct RunReport {
    double best_validation = 0.0;
    std::optional<int> time_to_threshold; // first step with validation >= threshold
    double final_validation = 0.0;
    std::int64_t final_task_pool_size = 0;
    std::int64_t final_step_pool_size = 0;
    std::vector<StepMetrics> metrics;
};

class Trainer {
public:
    explicit Trainer(Config config, std::shared_ptr<Reflector> reflector = nullptr,
                     std::shared_ptr<Embedder> embedder = nullptr);

    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    // One full training step on a seeded task batch: rollouts (read phase),
    // then retrieval commits, utility updates, reflection, policy updates
    // (update phase). Any error other than ReflectorFailure restores the
    // pre-step bank and policy before rethrowing.
    StepMetrics run_training_step();
    StepMetrics run_training_step(const std::vector<int>& task_indices);

    // Frozen-bank greedy evaluation on the held-out validation tasks.
    double run_validation() const;

    // Full loop: total_steps steps, validation every validation_interval
    // steps, pruning after each validation when management is on. Metrics
    // stream one JSON line per step when metrics_out is given; the observer,
    // when set, sees the trainer after every step.
    RunReport run(std::ostream* metrics_out = nullptr,
                  const std::function<void(const Trainer&, int)>& observer = {});

    const Config& config() const { return config_; }
    const SkillBank& bank() const { return bank_; }
    const PolicyParams& policy() const { return policy_; }
    const TaskSet& train_tasks() const { return train_tasks_; }
    const std::vector<TaskSpec>& validation_tasks() const { return validation_tasks_; }
    int current_step() const { return step_; }

private:
    struct GroupRollout {
        RolloutGroup group;
        RetrievalLog log;
        std::vector<Skill> retrieved_snapshot; // utilities at retrieval time
    };
    GroupRollout rollout_group(const TaskSpec& task, int task_index) const;
    RetrievalParams retrieval_params() const;

    Config config_;
    std::shared_ptr<Embedder> embedder_;
    std::shared_ptr<Reflector> reflector_;
    TaskSet train_tasks_;
    std::vector<TaskSpec> validation_tasks_;
    SkillBank bank_;
    PolicyParams policy_;
    PolicyParams ref_policy_;
    int step_ = 0;
};

// Greedy success rate of a policy over a task list, optionally injecting
// skills retrieved (record=false) from the bank. Shared by validation and
// the eval CLI. Queries embed with `embedder` when given, else with the
// built-in hash embedder at the config dimension.
double evaluate_policy(const PolicyParams& policy, const SkillBank& bank,
                       const std::vector<TaskSpec>& tasks, const Config& config,
                       bool with_skills, const Embedder* embedder = nullptr);

} // namespace skillbank
