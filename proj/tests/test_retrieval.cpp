#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "skillbank/embedding.hpp"
#include "skillbank/retrieval.hpp"
#include "skillbank/rng.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace skillbank;

namespace {

// Pool of unit 2-D embeddings (c, sqrt(1 - c^2)) so the query (1, 0) sees
// exactly the cosine c.
SkillPool pool_with_cosines(const std::vector<double>& cosines) {
    SkillPool pool;
    pool.kind = SkillKind::Task;
    for (std::size_t i = 0; i < cosines.size(); ++i) {
        Skill s;
        s.id = static_cast<SkillId>(i + 1);
        s.kind = SkillKind::Task;
        s.key.task_text = "family-0";
        s.key.embedding = {cosines[i], std::sqrt(std::max(0.0, 1.0 - cosines[i] * cosines[i]))};
        s.body = "skill " + std::to_string(i);
        s.normalized_body = canonicalize(s.body);
        pool.skills.push_back(std::move(s));
    }
    return pool;
}

Query query_along_x(SkillKind kind) {
    Query q;
    q.kind = kind;
    q.task_text = "family-0";
    q.embedding = {1.0, 0.0};
    return q;
}

} // namespace

TEST_CASE("stage 1 on an empty pool yields nothing") {
    SkillPool pool;
    pool.kind = SkillKind::Task;
    CHECK(stage1_candidates(pool, query_along_x(SkillKind::Task), RetrievalParams{}).empty());
}

TEST_CASE("an identical key embedding survives any threshold up to 1") {
    SkillPool pool = pool_with_cosines({1.0});
    RetrievalParams params;
    params.tau_sim = 1.0;
    auto candidates = stage1_candidates(pool, query_along_x(SkillKind::Task), params);
    REQUIRE(candidates.size() == 1);
    CHECK(candidates[0].raw_cosine == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(candidates[0].sim_hat == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("threshold and top_m truncate as a filter-then-sort") {
    SkillPool pool = pool_with_cosines({0.9, 0.7, 0.4, 0.2, -0.1});
    RetrievalParams params;
    params.tau_sim = 0.3;
    params.top_m = 2;
    auto candidates = stage1_candidates(pool, query_along_x(SkillKind::Task), params);
    REQUIRE(candidates.size() == 2);
    CHECK(candidates[0].skill_id == 1);
    CHECK(candidates[0].raw_cosine == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(candidates[1].skill_id == 2);
    CHECK(candidates[1].raw_cosine == doctest::Approx(0.7).epsilon(1e-9));
}

TEST_CASE("selection score arithmetic") {
    SkillPool pool;
    pool.kind = SkillKind::Task;
    Skill skill;
    skill.id = 1;
    Candidate cand;
    cand.skill_id = 1;

    RetrievalParams params;

    SUBCASE("alpha = 1 collapses to similarity") {
        params.alpha = 1.0;
        cand.sim_hat = 0.8;
        skill.utility = 123.0;
        skill.retrieval_count = 7;
        pool.total_retrievals = 7;
        CHECK(selection_score(cand, skill, pool, params) == doctest::Approx(0.8).epsilon(1e-9));
    }
    SUBCASE("cold pool: ln(1) kills the bonus") {
        params.alpha = 0.5;
        params.eta = 1.0;
        cand.sim_hat = 0.8;
        skill.utility = 0.2;
        skill.retrieval_count = 0;
        pool.total_retrievals = 0;
        CHECK(selection_score(cand, skill, pool, params) == doctest::Approx(0.5).epsilon(1e-9));
    }
    SUBCASE("warm pool hand arithmetic") {
        params.alpha = 0.5;
        params.eta = 0.5;
        cand.sim_hat = 0.5;
        skill.utility = 0.1;
        skill.retrieval_count = 3;
        pool.total_retrievals = 15;
        double expected = 0.25 + 0.5 * (0.1 + 0.5 * std::sqrt(std::log(16.0) / 4.0));
        CHECK(selection_score(cand, skill, pool, params) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("equal scores break toward the smaller id") {
    SkillPool pool = pool_with_cosines({0.5, 0.5});
    RetrievalParams params;
    params.top_k = 1;
    auto skills = retrieve(pool, query_along_x(SkillKind::Task), params, false);
    REQUIRE(skills.size() == 1);
    CHECK(skills[0].id == 1);
}

TEST_CASE("record=false retrieval leaves the pool untouched") {
    Rng rng(5);
    SkillPool pool = testutil::random_pool(rng, SkillKind::Task, 12, 8);
    SkillPool before = pool;
    Query q;
    q.kind = SkillKind::Task;
    q.task_text = "family-1";
    q.embedding = testutil::random_unit_vector(rng, 8);
    RetrievalParams params;
    params.tau_sim = -1.0;
    auto first = retrieve(pool, q, params, false);
    auto second = retrieve(pool, q, params, false);
    CHECK(pool == before);
    CHECK(first == second);
}

TEST_CASE("record=true retrieval defers counts into the log") {
    SkillPool pool = pool_with_cosines({0.9, 0.8, 0.7});
    RetrievalLog log;
    RetrievalParams params;
    params.top_k = 2;
    auto skills = retrieve(pool, query_along_x(SkillKind::Task), params, true, &log);
    CHECK(skills.size() == 2);
    CHECK(log.task_ids == std::vector<SkillId>{1, 2});
    CHECK(pool.total_retrievals == 0); // applied only at commit
    CHECK_THROWS_AS(retrieve(pool, query_along_x(SkillKind::Task), params, true, nullptr),
                    std::invalid_argument);
}

TEST_CASE("two-stage retrieval matches the exhaustive oracle") {
    Rng rng(2024);
    for (int iter = 0; iter < 400; ++iter) {
        SkillPool pool = testutil::random_pool(rng, SkillKind::Step, 20, 8);
        Query q;
        q.kind = SkillKind::Step;
        q.task_text = "family-1";
        q.observation_text = "obs-1";
        q.embedding = testutil::random_unit_vector(rng, 8);
        RetrievalParams params;
        params.top_m = 1 + rng.uniform_int(20);
        params.top_k = 1 + rng.uniform_int(params.top_m);
        params.tau_sim = rng.next_double() * 2.0 - 1.0;
        params.alpha = rng.next_double();
        params.eta = rng.next_double();

        auto got = retrieve(pool, q, params, false);
        std::vector<SkillId> got_ids;
        for (const Skill& s : got) got_ids.push_back(s.id);
        CHECK(got_ids == testutil::oracle_retrieve(pool, q, params));
    }
}

TEST_CASE("raising utility never lowers a skill's rank when alpha < 1") {
    Rng rng(31);
    for (int iter = 0; iter < 100; ++iter) {
        SkillPool pool = testutil::random_pool(rng, SkillKind::Task, 10, 8);
        if (pool.skills.empty()) continue;
        Query q;
        q.kind = SkillKind::Task;
        q.task_text = "family-1";
        q.embedding = testutil::random_unit_vector(rng, 8);
        RetrievalParams params;
        params.tau_sim = -1.0;
        params.top_m = static_cast<int>(pool.skills.size());
        params.top_k = params.top_m;
        params.alpha = 0.4;

        std::size_t target = static_cast<std::size_t>(rng.uniform_int(
            static_cast<int>(pool.skills.size())));
        SkillId target_id = pool.skills[target].id;

        auto rank_of = [&](const std::vector<Skill>& order) {
            for (std::size_t i = 0; i < order.size(); ++i) {
                if (order[i].id == target_id) return static_cast<int>(i);
            }
            return -1;
        };
        int before = rank_of(retrieve(pool, q, params, false));
        pool.skills[target].utility += 0.5;
        int after = rank_of(retrieve(pool, q, params, false));
        CHECK(after <= before);
    }
}

TEST_CASE("raising the retrieval count never raises the score") {
    Rng rng(32);
    SkillPool pool;
    pool.kind = SkillKind::Task;
    pool.total_retrievals = 50;
    Skill skill;
    skill.id = 1;
    skill.utility = 0.2;
    Candidate cand;
    cand.sim_hat = 0.6;
    RetrievalParams params;
    for (int iter = 0; iter < 100; ++iter) {
        skill.retrieval_count = rng.uniform_int(100);
        double low = selection_score(cand, skill, pool, params);
        skill.retrieval_count += 1 + rng.uniform_int(10);
        double high = selection_score(cand, skill, pool, params);
        CHECK(high <= low);
    }
}
