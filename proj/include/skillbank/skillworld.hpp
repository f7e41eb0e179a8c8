#pragma once

#include "skillbank/policy.hpp"
#include "skillbank/reflection.hpp"
#include "skillbank/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace skillbank {

// SkillWorld: a synthetic multi-task textual environment. Each task family
// hides one action sequence; an episode succeeds iff every step matches.
// Episodes always run the full horizon — a wrong action latches the failed
// flag but the trajectory keeps going, so failed trajectories contain
// post-failure steps for the reflector to look at.

struct EnvConfig {
    int horizon = 3;         // H
    int num_actions = 5;     // A
    int families = 50;
    int history_window = 2;  // L
    double hint_bias = 2.0;  // delta, prior logit of a hinted action
    double noise_prob = 0.2; // oracle reflector step-skill corruption rate
    int task_hint_len = 3;   // steps covered by an oracle task skill
    double gamma = 1.0;      // unused: episodes score undiscounted terminal reward
};

struct TaskSpec {
    std::string family;
    std::vector<int> actions; // hidden sequence a*_1..a*_H
    int num_actions = 5;
};

struct TaskSet {
    int horizon = 3;
    int num_actions = 5;
    std::vector<TaskSpec> tasks;

    const TaskSpec* find(std::string_view family) const;
};

TaskSet generate_task_set(int families, int horizon, int num_actions, std::uint64_t seed);
std::string save_tasks(const TaskSet& tasks);
TaskSet load_tasks(std::string_view bytes);

struct StepContext {
    std::string task_text;
    std::vector<std::pair<std::string, int>> history; // last L (obs, action) pairs
    std::string observation;
    int step = 1; // 1-based
    std::vector<int> admissible;
    std::vector<std::string> injected_task_skills;
    std::vector<std::string> injected_step_skills;
};

struct EnvState {
    TaskSpec task;
    int t = 1;
    bool failed = false;
    bool prev_correct = true;
    std::vector<std::pair<std::string, int>> history;
};

std::string observation_text(std::string_view family, int step, bool prev_ok);

EnvState env_reset(const TaskSpec& task);
StepContext make_context(const EnvState& state, const EnvConfig& config);

struct StepResult {
    double reward = 0.0;
    bool done = false;
};

// Deterministic transition; throws InadmissibleAction for out-of-range
// actions. Terminal reward is the success indicator.
StepResult env_step(EnvState& state, int action, const EnvConfig& config);

// One parsed "<family> step <t> action <a>" clause of a skill body.
struct HintClause {
    std::string family;
    int step = 0;
    int action = 0;
};
std::vector<HintClause> parse_hints(std::string_view skill_body);

// Base feature for (family, step) plus one hint feature per injected clause
// that targets exactly this family and step. Duplicate feature ids collapse.
std::vector<FeatureSpec> policy_features(const StepContext& context, const EnvConfig& config);

struct ActionChoice {
    int action = 0;
    double prob = 1.0;
};

ActionChoice act(const PolicyParams& params, const StepContext& context,
                 const EnvConfig& config, Rng& rng);
// Argmax over admissible actions, smallest action id on ties.
ActionChoice greedy_act(const PolicyParams& params, const StepContext& context,
                        const EnvConfig& config);

// Reflector with access to the ground-truth action sequences. Pinpoints the
// earliest wrong step of the failed trajectory; with probability noise_prob
// the step skill names a uniformly chosen wrong action instead.
class OracleReflector final : public Reflector {
public:
    OracleReflector(const TaskSet& tasks, const EnvConfig& config, std::uint64_t seed);
    ReflectionOutput generate(const ReflectionRequest& request) override;

private:
    const TaskSet* tasks_;
    EnvConfig config_;
    Rng rng_;
};

// Ground-truth label for acceptance experiments: true iff any hint clause of
// the body names a wrong action for its family/step.
bool is_noise_skill(const TaskSet& tasks, std::string_view body);

} // namespace skillbank
