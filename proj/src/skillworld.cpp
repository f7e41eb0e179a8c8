#include "skillbank/skillworld.hpp"

#include "skillbank/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

namespace skillbank {

const TaskSpec* TaskSet::find(std::string_view family) const {
    for (const TaskSpec& t : tasks) {
        if (t.family == family) return &t;
    }
    return nullptr;
}

TaskSet generate_task_set(int families, int horizon, int num_actions, std::uint64_t seed) {
    if (families <= 0 || horizon < 1 || num_actions < 2) {
        throw ConfigError("task set needs families > 0, horizon >= 1, num_actions >= 2");
    }
    TaskSet set;
    set.horizon = horizon;
    set.num_actions = num_actions;
    set.tasks.reserve(static_cast<std::size_t>(families));
    for (int f = 0; f < families; ++f) {
        TaskSpec task;
        task.family = "family-" + std::to_string(f);
        task.num_actions = num_actions;
        Rng rng = derive_rng(seed, "task", static_cast<std::uint64_t>(f));
        for (int t = 0; t < horizon; ++t) {
            task.actions.push_back(rng.uniform_int(num_actions));
        }
        set.tasks.push_back(std::move(task));
    }
    return set;
}

std::string save_tasks(const TaskSet& set) {
    std::ostringstream out;
    nlohmann::json header;
    header["schema_version"] = 1;
    header["horizon"] = set.horizon;
    header["num_actions"] = set.num_actions;
    header["task_count"] = set.tasks.size();
    out << header.dump() << '\n';
    for (const TaskSpec& t : set.tasks) {
        nlohmann::json j;
        j["family"] = t.family;
        j["actions"] = t.actions;
        out << j.dump() << '\n';
    }
    return out.str();
}

TaskSet load_tasks(std::string_view bytes) {
    std::istringstream in{std::string(bytes)};
    std::string line;
    if (!std::getline(in, line)) {
        throw MalformedRecord("empty task stream");
    }
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object()) {
        throw MalformedRecord("bad task header");
    }
    if (!header.contains("schema_version") || header["schema_version"].get<int>() != 1) {
        throw SchemaVersionMismatch("task schema version is not 1");
    }
    TaskSet set;
    std::int64_t expected;
    try {
        set.horizon = header.at("horizon").get<int>();
        set.num_actions = header.at("num_actions").get<int>();
        expected = header.at("task_count").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedRecord(std::string("bad task header: ") + e.what());
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw MalformedRecord("unparseable task line");
        }
        TaskSpec t;
        try {
            t.family = j.at("family").get<std::string>();
            t.actions = j.at("actions").get<std::vector<int>>();
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRecord(std::string("bad task record: ") + e.what());
        }
        t.num_actions = set.num_actions;
        if (static_cast<int>(t.actions.size()) != set.horizon) {
            throw MalformedRecord("task '" + t.family + "' has wrong horizon");
        }
        set.tasks.push_back(std::move(t));
    }
    if (static_cast<std::int64_t>(set.tasks.size()) != expected) {
        throw MalformedRecord("task stream truncated");
    }
    return set;
}

std::string observation_text(std::string_view family, int step, bool prev_ok) {
    std::string out;
    out.reserve(family.size() + 24);
    out.append(family);
    out.append(" | step ");
    out.append(std::to_string(step));
    out.append(prev_ok ? " | prev-ok" : " | prev-bad");
    return out;
}

EnvState env_reset(const TaskSpec& task) {
    EnvState state;
    state.task = task;
    state.t = 1;
    state.failed = false;
    state.prev_correct = true;
    return state;
}

StepContext make_context(const EnvState& state, const EnvConfig& config) {
    StepContext ctx;
    ctx.task_text = state.task.family;
    ctx.step = state.t;
    ctx.observation = observation_text(state.task.family, state.t, state.prev_correct);
    ctx.admissible.resize(static_cast<std::size_t>(state.task.num_actions));
    for (int a = 0; a < state.task.num_actions; ++a) ctx.admissible[static_cast<std::size_t>(a)] = a;
    std::size_t keep = std::min<std::size_t>(state.history.size(),
                                             static_cast<std::size_t>(config.history_window));
    ctx.history.assign(state.history.end() - static_cast<std::ptrdiff_t>(keep),
                       state.history.end());
    return ctx;
}

StepResult env_step(EnvState& state, int action, const EnvConfig& config) {
    (void)config;
    if (action < 0 || action >= state.task.num_actions) {
        throw InadmissibleAction("action " + std::to_string(action) + " outside [0, " +
                                 std::to_string(state.task.num_actions) + ")");
    }
    const int horizon = static_cast<int>(state.task.actions.size());
    if (state.t > horizon) {
        throw std::logic_error("env_step after episode end");
    }
    bool correct = action == state.task.actions[static_cast<std::size_t>(state.t - 1)];
    if (!correct) state.failed = true;
    state.history.emplace_back(observation_text(state.task.family, state.t, state.prev_correct),
                               action);
    state.prev_correct = correct;
    state.t += 1;

    StepResult res;
    res.done = state.t > horizon;
    res.reward = res.done ? (state.failed ? 0.0 : 1.0) : 0.0;
    return res;
}

std::vector<HintClause> parse_hints(std::string_view body) {
    std::vector<HintClause> clauses;
    std::size_t pos = 0;
    while (pos <= body.size()) {
        std::size_t sep = body.find(';', pos);
        std::string_view clause =
            body.substr(pos, sep == std::string_view::npos ? std::string_view::npos : sep - pos);
        pos = sep == std::string_view::npos ? body.size() + 1 : sep + 1;

        std::vector<std::string_view> tokens;
        std::size_t i = 0;
        while (i < clause.size()) {
            while (i < clause.size() && std::isspace(static_cast<unsigned char>(clause[i]))) ++i;
            std::size_t start = i;
            while (i < clause.size() && !std::isspace(static_cast<unsigned char>(clause[i]))) ++i;
            if (i > start) tokens.push_back(clause.substr(start, i - start));
        }
        if (tokens.size() != 5 || tokens[1] != "step" || tokens[3] != "action") continue;
        HintClause h;
        h.family = std::string(tokens[0]);
        auto parse_int = [](std::string_view s, int& out) {
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
            return ec == std::errc() && ptr == s.data() + s.size();
        };
        if (!parse_int(tokens[2], h.step) || !parse_int(tokens[4], h.action)) continue;
        clauses.push_back(std::move(h));
    }
    return clauses;
}

std::vector<FeatureSpec> policy_features(const StepContext& context, const EnvConfig& config) {
    std::vector<FeatureSpec> features;
    FeatureSpec base;
    base.id = "base|" + context.task_text + "|" + std::to_string(context.step);
    features.push_back(std::move(base));

    std::set<std::string> seen;
    auto add_hints = [&](const std::vector<std::string>& skills) {
        for (const std::string& body : skills) {
            for (const HintClause& h : parse_hints(body)) {
                if (h.family != context.task_text || h.step != context.step) continue;
                if (h.action < 0 || h.action >= static_cast<int>(context.admissible.size())) continue;
                FeatureSpec f;
                f.id = "hint|" + h.family + "|" + std::to_string(h.step) + "|" +
                       std::to_string(h.action);
                if (!seen.insert(f.id).second) continue;
                f.hint_action = h.action;
                f.hint_bias = config.hint_bias;
                features.push_back(std::move(f));
            }
        }
    };
    add_hints(context.injected_task_skills);
    add_hints(context.injected_step_skills);
    return features;
}

namespace {

std::vector<double> admissible_logits(const PolicyParams& params, const StepContext& context,
                                      const EnvConfig& config) {
    std::vector<FeatureSpec> features = policy_features(context, config);
    std::vector<double> logits;
    logits.reserve(context.admissible.size());
    for (int a : context.admissible) {
        logits.push_back(context_logit(params, features, a));
    }
    return logits;
}

std::vector<double> softmax(std::vector<double> logits) {
    double max_logit = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& z : logits) {
        z = std::exp(z - max_logit);
        sum += z;
    }
    for (double& z : logits) z /= sum;
    return logits;
}

} // namespace

ActionChoice act(const PolicyParams& params, const StepContext& context, const EnvConfig& config,
                 Rng& rng) {
    std::vector<double> probs = softmax(admissible_logits(params, context, config));
    double u = rng.next_double();
    double cum = 0.0;
    std::size_t pick = probs.size() - 1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) {
            pick = i;
            break;
        }
    }
    return {context.admissible[pick], probs[pick]};
}

ActionChoice greedy_act(const PolicyParams& params, const StepContext& context,
                        const EnvConfig& config) {
    std::vector<double> probs = softmax(admissible_logits(params, context, config));
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = i;
    }
    return {context.admissible[best], probs[best]};
}

OracleReflector::OracleReflector(const TaskSet& tasks, const EnvConfig& config, std::uint64_t seed)
    : tasks_(&tasks), config_(config), rng_(derive_rng(seed, "oracle-reflector").next_u64()) {}

ReflectionOutput OracleReflector::generate(const ReflectionRequest& request) {
    const TaskSpec* task = tasks_->find(request.task_text);
    if (task == nullptr) {
        throw ReflectorFailure("oracle reflector has no task '" + request.task_text + "'");
    }
    int failure_step = 0;
    for (std::size_t i = 0; i < request.failed.steps.size(); ++i) {
        if (i >= task->actions.size()) break;
        if (request.failed.steps[i].action != task->actions[i]) {
            failure_step = static_cast<int>(i) + 1;
            break;
        }
    }
    if (failure_step == 0) {
        // Y = 0 implies some step is wrong; a trajectory shorter than the
        // horizon cannot come out of SkillWorld.
        throw ReflectorFailure("failed trajectory for '" + request.task_text +
                               "' matches the ground-truth sequence");
    }

    ReflectionOutput output;
    int truth = task->actions[static_cast<std::size_t>(failure_step - 1)];
    int emitted = truth;
    if (config_.noise_prob > 0.0 && rng_.next_double() < config_.noise_prob) {
        int wrong = rng_.uniform_int(task->num_actions - 1);
        emitted = wrong >= truth ? wrong + 1 : wrong;
    }
    StepSkillDraft draft;
    draft.body = task->family + " step " + std::to_string(failure_step) + " action " +
                 std::to_string(emitted);
    draft.failure_step = failure_step;
    draft.observation =
        request.failed.steps[static_cast<std::size_t>(failure_step - 1)].observation;
    output.step_skill = std::move(draft);

    int covered = std::min(static_cast<int>(task->actions.size()), config_.task_hint_len);
    std::string task_body;
    for (int t = 1; t <= covered; ++t) {
        if (!task_body.empty()) task_body += "; ";
        task_body += task->family + " step " + std::to_string(t) + " action " +
                     std::to_string(task->actions[static_cast<std::size_t>(t - 1)]);
    }
    if (!task_body.empty()) {
        output.task_skill = std::move(task_body);
    }
    return output;
}

bool is_noise_skill(const TaskSet& tasks, std::string_view body) {
    for (const HintClause& h : parse_hints(body)) {
        const TaskSpec* task = tasks.find(h.family);
        if (task == nullptr) return true;
        if (h.step < 1 || h.step > static_cast<int>(task->actions.size())) return true;
        if (h.action != task->actions[static_cast<std::size_t>(h.step - 1)]) return true;
    }
    return false;
}

} // namespace skillbank
