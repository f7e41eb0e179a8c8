#include "skillbank/reflection.hpp"

#include "skillbank/errors.hpp"
#include "skillbank/rng.hpp"

#include <json.hpp>
#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

namespace skillbank {

bool should_reflect(double y_skill, double tau_ref) {
    return y_skill < tau_ref;
}

std::optional<ReflectionRequest> select_exemplars(const RolloutGroup& group,
                                                  std::uint64_t rng_seed) {
    std::vector<const TrajectoryRecord*> failed_skill;
    std::vector<const TrajectoryRecord*> succeeded;
    for (const TrajectoryRecord& rec : group.records) {
        if (rec.skill_group && rec.success == 0) failed_skill.push_back(&rec);
        if (rec.success == 1) succeeded.push_back(&rec);
    }
    if (failed_skill.empty()) {
        return std::nullopt;
    }
    Rng rng = derive_rng(rng_seed, "exemplars");
    ReflectionRequest request;
    request.task_text = group.task_text;
    request.failed = *failed_skill[static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(failed_skill.size())))];
    if (!succeeded.empty()) {
        request.success = *succeeded[static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(succeeded.size())))];
    }
    return request;
}

InsertionSummary reflect_and_insert(SkillBank& bank, const RolloutGroup& group,
                                    const GroupStats& stats, Reflector& reflector,
                                    const Embedder& embedder, const ReflectionConfig& config,
                                    std::int64_t current_step, std::uint64_t rng_seed) {
    InsertionSummary summary;
    if (!should_reflect(stats.y_skill, config.tau_ref)) {
        return summary;
    }
    std::optional<ReflectionRequest> request = select_exemplars(group, rng_seed);
    if (!request) {
        return summary;
    }
    summary.triggered = true;
    ReflectionOutput output = reflector.generate(*request);

    if (output.task_skill && config.insert_task_skills) {
        RetrievalKey key;
        key.task_text = group.task_text;
        key.embedding = embedder.embed_key(key.task_text, std::nullopt);
        InsertResult res = bank.insert_skill(SkillKind::Task, std::move(key),
                                             *output.task_skill, current_step);
        if (res.inserted) {
            summary.task_skill_id = res.id;
        } else {
            ++summary.dedup_hits;
        }
    }

    if (output.step_skill && config.insert_step_skills) {
        const StepSkillDraft& draft = *output.step_skill;
        const auto& steps = request->failed.steps;
        bool in_range = draft.failure_step >= 1 &&
                        draft.failure_step <= static_cast<int>(steps.size());
        bool obs_matches =
            in_range &&
            steps[static_cast<std::size_t>(draft.failure_step - 1)].observation ==
                draft.observation;
        if (!in_range || !obs_matches) {
            summary.step_skill_dropped = true;
        } else {
            RetrievalKey key;
            key.task_text = group.task_text;
            key.observation_text = draft.observation;
            key.embedding = embedder.embed_key(key.task_text, key.observation_text);
            InsertResult res =
                bank.insert_skill(SkillKind::Step, std::move(key), draft.body, current_step);
            if (res.inserted) {
                summary.step_skill_id = res.id;
            } else {
                ++summary.dedup_hits;
            }
        }
    }
    return summary;
}

RemoteReflector::RemoteReflector(RemoteReflectorOptions options) : options_(std::move(options)) {}

namespace {

nlohmann::json trajectory_to_json(const TrajectoryRecord& rec) {
    nlohmann::json steps = nlohmann::json::array();
    for (std::size_t i = 0; i < rec.steps.size(); ++i) {
        const StepSample& s = rec.steps[i];
        double reward = (i + 1 == rec.steps.size()) ? rec.base_return : 0.0;
        steps.push_back({{"obs", s.observation}, {"action", s.action}, {"reward", reward}});
    }
    return steps;
}

} // namespace

ReflectionOutput RemoteReflector::generate(const ReflectionRequest& request) {
    nlohmann::json body;
    body["task"] = request.task_text;
    body["failed_trajectory"] = trajectory_to_json(request.failed);
    if (request.success) {
        body["success_trajectory"] = trajectory_to_json(*request.success);
    }

    httplib::Client client(options_.host, options_.port);
    client.set_connection_timeout(options_.timeout_seconds);
    client.set_read_timeout(options_.timeout_seconds);
    httplib::Result res;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
        res = client.Post("/reflect", body.dump(), "application/json");
        if (res && res->status == 200) break;
    }
    if (!res || res->status != 200) {
        throw ReflectorFailure("reflection service unreachable at " + options_.host + ":" +
                               std::to_string(options_.port));
    }
    nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
        throw ReflectorFailure("reflection service returned a malformed response");
    }
    ReflectionOutput output;
    if (parsed.contains("task_skill") && parsed["task_skill"].is_string()) {
        output.task_skill = parsed["task_skill"].get<std::string>();
    }
    if (parsed.contains("step_skill") && parsed["step_skill"].is_object()) {
        const auto& ss = parsed["step_skill"];
        StepSkillDraft draft;
        try {
            draft.body = ss.at("body").get<std::string>();
            draft.failure_step = ss.at("failure_step").get<int>();
        } catch (const nlohmann::json::exception& e) {
            throw ReflectorFailure(std::string("bad step skill in response: ") + e.what());
        }
        // The service reports the failure step; the key observation is read
        // back from the failed trajectory itself.
        if (draft.failure_step >= 1 &&
            draft.failure_step <= static_cast<int>(request.failed.steps.size())) {
            draft.observation =
                request.failed.steps[static_cast<std::size_t>(draft.failure_step - 1)].observation;
        }
        output.step_skill = std::move(draft);
    }
    return output;
}

} // namespace skillbank
