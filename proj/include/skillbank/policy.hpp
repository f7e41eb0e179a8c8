#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace skillbank {

// One active context feature. Hint features carry a fixed prior logit toward
// the hinted action; learned weights start at zero, so the initial logit of
// the hinted action equals the prior bias.
struct FeatureSpec {
    std::string id;
    int hint_action = -1;
    double hint_bias = 0.0;

    double prior(int action) const { return action == hint_action ? hint_bias : 0.0; }
    bool operator==(const FeatureSpec&) const = default;
};

// One decision point of a trajectory, recorded at rollout time.
struct StepSample {
    std::string observation;
    std::vector<FeatureSpec> context_features;
    int action = 0;
    double old_prob = 1.0;
    std::vector<int> admissible;

    bool operator==(const StepSample&) const = default;
};

// Linear-softmax policy: an action's logit is the sum of (prior + learned
// weight) over the active features. Rows materialize on first gradient
// touch; absent rows read as zero.
struct PolicyParams {
    int num_actions = 0;
    std::map<std::string, std::vector<double>> weights;

    double weight(const std::string& feature, int action) const;
    bool operator==(const PolicyParams&) const = default;
};

struct OptParams {
    double clip_epsilon = 0.2;
    double beta_kl = 0.0;
    double learning_rate = 0.5;
    double adv_eps = 1e-8;
};

double context_logit(const PolicyParams& params, std::span<const FeatureSpec> features,
                     int action);

// Softmax over the sample's admissible actions, aligned with
// sample.admissible.
std::vector<double> action_distribution(const PolicyParams& params, const StepSample& sample);

// min(r * A, clip(r, 1 - eps, 1 + eps) * A) with r = new_prob / old_prob.
double surrogate_term(const StepSample& sample, double new_prob, double advantage, double eps);

// Exact discrete KL(p_new || p_ref) over a shared admissible set.
double kl_admissible(std::span<const double> p_new, std::span<const double> p_ref);

// A_i = (R_i - mean) / max(population std, adv_eps).
std::vector<double> group_advantages(std::span<const double> returns, double adv_eps);

struct TrainSample {
    const StepSample* sample = nullptr;
    double advantage = 0.0;
};

// One gradient-ascent step on mean(surrogate) - beta_kl * mean(KL), with
// analytic gradients for the linear-softmax policy. Deterministic given
// inputs.
void policy_update(PolicyParams& params, std::span<const TrainSample> batch,
                   const OptParams& opt, const PolicyParams& ref);

// Objective value at the current params for the given batch; the quantity
// policy_update ascends. Exposed so tests can difference it numerically.
double surrogate_objective(const PolicyParams& params, std::span<const TrainSample> batch,
                           const OptParams& opt, const PolicyParams& ref);

std::string save_policy(const PolicyParams& params);
PolicyParams load_policy(std::string_view bytes);

} // namespace skillbank
