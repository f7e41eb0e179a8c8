#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "skillbank/errors.hpp"
#include "skillbank/policy.hpp"
#include "skillbank/rng.hpp"

#include <cmath>

using namespace skillbank;

TEST_CASE("group advantage arithmetic") {
    SUBCASE("constant returns give zero advantages") {
        std::vector<double> r{0.7, 0.7, 0.7};
        for (double a : group_advantages(r, 1e-8)) {
            CHECK(a == doctest::Approx(0.0).epsilon(1e-12));
        }
    }
    SUBCASE("two-point group") {
        std::vector<double> r{2.0, 0.0};
        std::vector<double> a = group_advantages(r, 1e-8);
        CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(a[1] == doctest::Approx(-1.0).epsilon(1e-9));
    }
    SUBCASE("alternating group") {
        std::vector<double> r{1.0, 0.0, 1.0, 0.0};
        std::vector<double> a = group_advantages(r, 1e-8);
        CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(a[1] == doctest::Approx(-1.0).epsilon(1e-9));
        CHECK(a[2] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(a[3] == doctest::Approx(-1.0).epsilon(1e-9));
    }
}

TEST_CASE("advantages are normalized to mean 0 and population std 1") {
    Rng rng(4);
    for (int iter = 0; iter < 200; ++iter) {
        int n = 2 + rng.uniform_int(10);
        std::vector<double> r(static_cast<std::size_t>(n));
        for (double& x : r) x = rng.next_double() * 3.0;
        std::vector<double> a = group_advantages(r, 1e-8);

        double mean = 0.0;
        for (double x : a) mean += x;
        mean /= n;
        CHECK(std::abs(mean) <= 1e-9);

        double var = 0.0;
        for (double x : a) var += (x - mean) * (x - mean);
        var /= n;
        double raw_var = 0.0, raw_mean = 0.0;
        for (double x : r) raw_mean += x;
        raw_mean /= n;
        for (double x : r) raw_var += (x - raw_mean) * (x - raw_mean);
        raw_var /= n;
        if (std::sqrt(raw_var) > 1e-8) {
            CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-9);
        }
    }
}

namespace {

StepSample sample_two_actions(double old_prob) {
    StepSample s;
    s.observation = "obs";
    s.context_features = {FeatureSpec{"f0", -1, 0.0}};
    s.action = 0;
    s.old_prob = old_prob;
    s.admissible = {0, 1};
    return s;
}

} // namespace

TEST_CASE("surrogate term clipping") {
    StepSample s = sample_two_actions(0.5);
    CHECK(surrogate_term(s, 0.5, 3.25, 0.2) == doctest::Approx(3.25).epsilon(1e-9));
    CHECK(surrogate_term(s, 0.75, 1.0, 0.2) == doctest::Approx(1.2).epsilon(1e-9));
    CHECK(surrogate_term(s, 0.25, -1.0, 0.2) == doctest::Approx(-0.8).epsilon(1e-9));
}

TEST_CASE("surrogate term obeys the clipping bound") {
    Rng rng(77);
    for (int iter = 0; iter < 300; ++iter) {
        double old_prob = 0.05 + 0.9 * rng.next_double();
        double new_prob = 0.05 + 0.9 * rng.next_double();
        double advantage = rng.next_double() * 4.0 - 2.0;
        double eps = 0.05 + 0.4 * rng.next_double();
        StepSample s = sample_two_actions(old_prob);
        double term = surrogate_term(s, new_prob, advantage, eps);
        double r = new_prob / old_prob;
        CHECK(std::abs(term) <=
              std::max(std::abs(r), 1.0 + eps) * std::abs(advantage) + 1e-12);
        if (advantage > 0.0) {
            CHECK(term <= (1.0 + eps) * advantage + 1e-12);
        }
    }
}

TEST_CASE("discrete KL over the admissible set") {
    std::vector<double> p{0.75, 0.25};
    std::vector<double> q{0.5, 0.5};
    double expected = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
    CHECK(kl_admissible(p, p) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(kl_admissible(p, q) == doctest::Approx(expected).epsilon(1e-9));
    std::vector<double> u5(5, 0.2);
    CHECK(kl_admissible(u5, u5) == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<double> wrong{1.0};
    CHECK_THROWS_AS(kl_admissible(p, wrong), DomainMismatch);
}

TEST_CASE("zero advantages and zero KL weight leave the policy unchanged") {
    PolicyParams params;
    params.num_actions = 2;
    params.weights["f0"] = {0.3, -0.2};
    PolicyParams before = params;
    StepSample s = sample_two_actions(0.5);
    std::vector<TrainSample> batch{{&s, 0.0}};
    policy_update(params, batch, OptParams{}, before);
    CHECK(params == before);
}

TEST_CASE("a positive-advantage sample raises the taken action's logit") {
    PolicyParams params;
    params.num_actions = 2;
    PolicyParams ref = params;
    StepSample s = sample_two_actions(0.5); // uniform start, r = 1
    std::vector<TrainSample> batch{{&s, 1.0}};
    policy_update(params, batch, OptParams{}, ref);
    CHECK(params.weights.at("f0")[0] > 0.0);
    CHECK(params.weights.at("f0")[1] < 0.0);
}

// ---------------------------------------------------------------------------
// Finite-difference oracle for the full objective gradient.
// ---------------------------------------------------------------------------

namespace {

struct Instance {
    PolicyParams params;
    PolicyParams ref;
    std::vector<StepSample> samples;
    std::vector<TrainSample> batch;
    OptParams opt;
};

Instance random_instance(Rng& rng, bool with_kl) {
    Instance inst;
    int n_actions = 2 + rng.uniform_int(4); // <= 5
    int n_features = 1 + rng.uniform_int(4);
    inst.params.num_actions = n_actions;
    inst.ref.num_actions = n_actions;

    std::vector<FeatureSpec> feats;
    for (int f = 0; f < n_features; ++f) {
        FeatureSpec spec;
        spec.id = "f" + std::to_string(f);
        if (rng.uniform_int(3) == 0) {
            spec.hint_action = rng.uniform_int(n_actions);
            spec.hint_bias = rng.next_double();
        }
        feats.push_back(spec);
        std::vector<double> row(static_cast<std::size_t>(n_actions));
        std::vector<double> ref_row(static_cast<std::size_t>(n_actions));
        for (int a = 0; a < n_actions; ++a) {
            row[static_cast<std::size_t>(a)] = rng.next_double() - 0.5;
            ref_row[static_cast<std::size_t>(a)] = rng.next_double() - 0.5;
        }
        inst.params.weights[spec.id] = row;
        inst.ref.weights[spec.id] = with_kl ? ref_row : row;
    }

    int n_samples = 1 + rng.uniform_int(8);
    inst.samples.reserve(static_cast<std::size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i) {
        StepSample s;
        s.observation = "obs";
        int k = 1 + rng.uniform_int(n_features);
        for (int f = 0; f < k; ++f) s.context_features.push_back(feats[static_cast<std::size_t>(f)]);
        for (int a = 0; a < n_actions; ++a) s.admissible.push_back(a);
        s.action = rng.uniform_int(n_actions);
        s.old_prob = 0.15 + 0.7 * rng.next_double();
        inst.samples.push_back(std::move(s));
    }
    for (const StepSample& s : inst.samples) {
        inst.batch.push_back({&s, rng.next_double() * 2.0 - 1.0});
    }
    inst.opt.clip_epsilon = 0.2;
    inst.opt.beta_kl = with_kl ? 0.3 : 0.0;
    inst.opt.learning_rate = 1.0; // gradient readable straight off the update
    return inst;
}

// Keeps ratios away from the clip kinks so central differences see a smooth
// objective.
bool near_clip_kink(const Instance& inst) {
    for (const TrainSample& item : inst.batch) {
        std::vector<double> probs = action_distribution(inst.params, *item.sample);
        double r = probs[static_cast<std::size_t>(item.sample->action)] / item.sample->old_prob;
        if (std::abs(r - (1.0 - inst.opt.clip_epsilon)) < 1e-3) return true;
        if (std::abs(r - (1.0 + inst.opt.clip_epsilon)) < 1e-3) return true;
    }
    return false;
}

} // namespace

TEST_CASE("analytic gradient matches central finite differences") {
    Rng rng(2718);
    int tested = 0;
    while (tested < 40) {
        Instance inst = random_instance(rng, tested % 2 == 1);
        if (near_clip_kink(inst)) continue;
        ++tested;

        PolicyParams updated = inst.params;
        policy_update(updated, inst.batch, inst.opt, inst.ref);

        const double h = 1e-5;
        double grad_norm_sq = 0.0;
        double diff_norm_sq = 0.0;
        for (const auto& [feature, row] : inst.params.weights) {
            for (int a = 0; a < inst.params.num_actions; ++a) {
                PolicyParams plus = inst.params;
                PolicyParams minus = inst.params;
                plus.weights[feature][static_cast<std::size_t>(a)] += h;
                minus.weights[feature][static_cast<std::size_t>(a)] -= h;
                double fd = (surrogate_objective(plus, inst.batch, inst.opt, inst.ref) -
                             surrogate_objective(minus, inst.batch, inst.opt, inst.ref)) /
                            (2.0 * h);
                double analytic = updated.weights.at(feature)[static_cast<std::size_t>(a)] -
                                  row[static_cast<std::size_t>(a)];
                grad_norm_sq += fd * fd;
                diff_norm_sq += (fd - analytic) * (fd - analytic);
            }
        }
        double rel = std::sqrt(diff_norm_sq) / std::max(std::sqrt(grad_norm_sq), 1e-10);
        CHECK(rel <= 1e-5);
    }
}

TEST_CASE("policy files round-trip") {
    PolicyParams params;
    params.num_actions = 3;
    params.weights["base|family-1|2"] = {0.25, -1.5, 0.0};
    params.weights["hint|family-1|2|0"] = {2.0, 0.125, -0.375};
    PolicyParams loaded = load_policy(save_policy(params));
    CHECK(loaded == params);
    CHECK_THROWS_AS(load_policy("nonsense"), MalformedRecord);
    CHECK_THROWS_AS(load_policy("{\"schema_version\":9,\"num_actions\":2,\"weights\":{}}"),
                    SchemaVersionMismatch);
}
