#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "skillbank/errors.hpp"
#include "skillbank/skillworld.hpp"

#include <cmath>

using namespace skillbank;

namespace {

TaskSpec fixed_task() {
    TaskSpec task;
    task.family = "family-7";
    task.actions = {2, 0, 4};
    task.num_actions = 5;
    return task;
}

EnvConfig test_env() {
    EnvConfig env;
    env.horizon = 3;
    env.num_actions = 5;
    env.hint_bias = 2.0;
    env.noise_prob = 0.0;
    env.task_hint_len = 3;
    return env;
}

// Runs the given action sequence to the end, returning the terminal reward.
double play(const TaskSpec& task, const EnvConfig& env, const std::vector<int>& actions,
            std::vector<StepSample>* record = nullptr) {
    EnvState state = env_reset(task);
    double total = 0.0;
    for (int a : actions) {
        if (record != nullptr) {
            StepContext ctx = make_context(state, env);
            StepSample s;
            s.observation = ctx.observation;
            s.action = a;
            s.old_prob = 1.0;
            s.admissible = ctx.admissible;
            record->push_back(std::move(s));
        }
        StepResult r = env_step(state, a, env);
        total += r.reward;
        if (r.done) break;
    }
    return total;
}

} // namespace

TEST_CASE("task generation is seed-deterministic and serializable") {
    TaskSet a = generate_task_set(20, 3, 5, 99);
    TaskSet b = generate_task_set(20, 3, 5, 99);
    TaskSet c = generate_task_set(20, 3, 5, 100);
    REQUIRE(a.tasks.size() == 20);
    bool all_equal = true;
    bool any_diff_from_c = false;
    for (std::size_t i = 0; i < a.tasks.size(); ++i) {
        all_equal = all_equal && a.tasks[i].actions == b.tasks[i].actions;
        any_diff_from_c = any_diff_from_c || a.tasks[i].actions != c.tasks[i].actions;
        for (int act : a.tasks[i].actions) {
            CHECK(act >= 0);
            CHECK(act < 5);
        }
    }
    CHECK(all_equal);
    CHECK(any_diff_from_c);

    TaskSet loaded = load_tasks(save_tasks(a));
    REQUIRE(loaded.tasks.size() == a.tasks.size());
    for (std::size_t i = 0; i < a.tasks.size(); ++i) {
        CHECK(loaded.tasks[i].family == a.tasks[i].family);
        CHECK(loaded.tasks[i].actions == a.tasks[i].actions);
    }
    CHECK_THROWS_AS(load_tasks("garbage"), MalformedRecord);
}

TEST_CASE("full matches succeed, any wrong step fails") {
    TaskSpec task = fixed_task();
    EnvConfig env = test_env();
    CHECK(play(task, env, {2, 0, 4}) == doctest::Approx(1.0));
    CHECK(play(task, env, {0, 0, 4}) == doctest::Approx(0.0)); // wrong at step 1, latched
    CHECK(play(task, env, {2, 0, 0}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(play(task, env, {5}), InadmissibleAction);
    CHECK_THROWS_AS(play(task, env, {-1}), InadmissibleAction);
}

TEST_CASE("observations are pure functions of family, step, and prev-correctness") {
    TaskSpec task = fixed_task();
    EnvConfig env = test_env();
    std::vector<StepSample> a, b;
    play(task, env, {2, 1, 4}, &a);
    play(task, env, {2, 1, 4}, &b);
    REQUIRE(a.size() == 3);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].observation == b[i].observation);
    CHECK(a[0].observation == "family-7 | step 1 | prev-ok");
    CHECK(a[1].observation == "family-7 | step 2 | prev-ok");
    CHECK(a[2].observation == "family-7 | step 3 | prev-bad"); // step 2 action was wrong
}

TEST_CASE("the history window keeps at most L pairs") {
    TaskSpec task = fixed_task();
    EnvConfig env = test_env();
    env.history_window = 1;
    EnvState state = env_reset(task);
    env_step(state, 2, env);
    env_step(state, 0, env);
    StepContext ctx = make_context(state, env);
    REQUIRE(ctx.history.size() == 1);
    CHECK(ctx.history[0].first == "family-7 | step 2 | prev-ok");
    CHECK(ctx.history[0].second == 0);
}

TEST_CASE("hint parsing extracts well-formed clauses only") {
    auto hints = parse_hints("family-7 step 2 action 4; family-3 step 1 action 0");
    REQUIRE(hints.size() == 2);
    CHECK(hints[0].family == "family-7");
    CHECK(hints[0].step == 2);
    CHECK(hints[0].action == 4);
    CHECK(hints[1].family == "family-3");

    CHECK(parse_hints("prefer opening drawers before cabinets").empty());
    CHECK(parse_hints("family-7 step x action 4").empty());
    CHECK(parse_hints("").empty());
}

TEST_CASE("feature extraction scopes hints to the exact family and step") {
    TaskSpec task = fixed_task();
    EnvConfig env = test_env();
    EnvState state = env_reset(task);
    StepContext ctx = make_context(state, env);

    SUBCASE("no skills injected: exactly the base feature") {
        auto feats = policy_features(ctx, env);
        REQUIRE(feats.size() == 1);
        CHECK(feats[0].id == "base|family-7|1");
        CHECK(feats[0].hint_action == -1);
    }
    SUBCASE("a matching step hint adds one feature") {
        ctx.injected_step_skills = {"family-7 step 1 action 2"};
        auto feats = policy_features(ctx, env);
        REQUIRE(feats.size() == 2);
        CHECK(feats[1].id == "hint|family-7|1|2");
        CHECK(feats[1].hint_action == 2);
        CHECK(feats[1].hint_bias == doctest::Approx(2.0));
    }
    SUBCASE("hints for another family or step are ignored") {
        ctx.injected_step_skills = {"family-3 step 1 action 2", "family-7 step 2 action 0"};
        CHECK(policy_features(ctx, env).size() == 1);
    }
    SUBCASE("duplicate hints collapse") {
        ctx.injected_task_skills = {"family-7 step 1 action 2"};
        ctx.injected_step_skills = {"family-7 step 1 action 2"};
        CHECK(policy_features(ctx, env).size() == 2);
    }
}

TEST_CASE("softmax action selection") {
    TaskSpec task = fixed_task();
    task.num_actions = 4;
    EnvConfig env = test_env();
    env.num_actions = 4;
    PolicyParams params;
    params.num_actions = 4;
    EnvState state = env_reset(task);
    StepContext ctx = make_context(state, env);

    SUBCASE("all-zero logits are uniform") {
        ActionChoice c = greedy_act(params, ctx, env);
        CHECK(c.prob == doctest::Approx(0.25).epsilon(1e-9));
        Rng rng(5);
        std::vector<int> counts(4, 0);
        for (int i = 0; i < 8000; ++i) {
            Rng local(rng.next_u64());
            counts[static_cast<std::size_t>(act(params, ctx, env, local).action)]++;
        }
        for (int c4 : counts) CHECK(std::abs(c4 / 8000.0 - 0.25) < 0.03);
    }
    SUBCASE("a hint bias of 2 puts e^2 / (e^2 + 3) on the hinted action") {
        ctx.injected_step_skills = {"family-7 step 1 action 0"};
        ActionChoice c = greedy_act(params, ctx, env);
        CHECK(c.action == 0);
        double expected = std::exp(2.0) / (std::exp(2.0) + 3.0);
        CHECK(c.prob == doctest::Approx(expected).epsilon(1e-9));
        CHECK(c.prob > 0.25); // beats the uniform baseline
    }
    SUBCASE("fixed seeds reproduce the action sequence") {
        Rng r1(42), r2(42);
        for (int i = 0; i < 50; ++i) {
            ActionChoice a = act(params, ctx, env, r1);
            ActionChoice b = act(params, ctx, env, r2);
            CHECK(a.action == b.action);
            CHECK(a.prob == b.prob);
        }
    }
}

TEST_CASE("oracle reflector pinpoints the earliest wrong step") {
    TaskSet tasks = generate_task_set(4, 3, 5, 7);
    EnvConfig env = test_env();
    const TaskSpec& task = tasks.tasks[0];

    std::vector<int> actions = task.actions;
    actions[1] = (actions[1] + 1) % 5; // wrong at step 2
    actions[2] = (actions[2] + 2) % 5; // and at step 3
    ReflectionRequest request;
    request.task_text = task.family;
    request.failed.skill_group = true;
    play(task, env, actions, &request.failed.steps);

    OracleReflector reflector(tasks, env, 11);
    ReflectionOutput out = reflector.generate(request);
    REQUIRE(out.step_skill.has_value());
    CHECK(out.step_skill->failure_step == 2);
    CHECK(out.step_skill->observation == request.failed.steps[1].observation);
    CHECK(out.step_skill->body == task.family + " step 2 action " +
                                      std::to_string(task.actions[1]));
    REQUIRE(out.task_skill.has_value());
    auto clauses = parse_hints(*out.task_skill);
    REQUIRE(clauses.size() == 3);
    for (int t = 0; t < 3; ++t) {
        CHECK(clauses[static_cast<std::size_t>(t)].action ==
              task.actions[static_cast<std::size_t>(t)]);
    }
    CHECK_FALSE(is_noise_skill(tasks, out.step_skill->body));
    CHECK_FALSE(is_noise_skill(tasks, *out.task_skill));
}

TEST_CASE("a fully noisy reflector always names a wrong action") {
    TaskSet tasks = generate_task_set(4, 3, 5, 7);
    EnvConfig env = test_env();
    env.noise_prob = 1.0;
    OracleReflector reflector(tasks, env, 13);
    const TaskSpec& task = tasks.tasks[1];

    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> actions = task.actions;
        actions[0] = (actions[0] + 1 + trial % 4) % 5;
        ReflectionRequest request;
        request.task_text = task.family;
        request.failed.skill_group = true;
        play(task, env, actions, &request.failed.steps);
        ReflectionOutput out = reflector.generate(request);
        REQUIRE(out.step_skill.has_value());
        auto clauses = parse_hints(out.step_skill->body);
        REQUIRE(clauses.size() == 1);
        CHECK(clauses[0].action != task.actions[0]);
        CHECK(is_noise_skill(tasks, out.step_skill->body));
    }
}
