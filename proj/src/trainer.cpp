#include "skillbank/trainer.hpp"

#include "skillbank/errors.hpp"
#include "skillbank/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace skillbank {

using nlohmann::json;

namespace {

void check_known_keys(const json& j, std::initializer_list<const char*> allowed,
                      const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* a : allowed) {
            if (key == a) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("unknown config key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(out);
    } catch (const json::exception& e) {
        throw ConfigError("bad value for config key '" + std::string(key) + "': " + e.what());
    }
}

} // namespace

void validate_config(const Config& c) {
    if (c.ablation.baseline_group && (c.group_size < 2 || c.group_size % 2 != 0)) {
        throw ConfigError("group_size must be even and >= 2 with the baseline group enabled");
    }
    if (c.group_size < 1) throw ConfigError("group_size must be positive");
    if (c.top_m < 1 || c.top_k < 1 || c.top_k > c.top_m) {
        throw ConfigError("need 1 <= top_k <= top_m");
    }
    if (c.lambda < 0.0) throw ConfigError("lambda must be nonnegative");
    if (c.beta_task <= 0.0 || c.beta_task > 1.0 || c.beta_step <= 0.0 || c.beta_step > 1.0) {
        throw ConfigError("EMA rates must lie in (0, 1]");
    }
    if (c.tau_sim < -1.0 || c.tau_sim > 1.0) throw ConfigError("tau_sim must lie in [-1, 1]");
    if (c.alpha < 0.0 || c.alpha > 1.0) throw ConfigError("alpha must lie in [0, 1]");
    if (c.eta < 0.0) throw ConfigError("eta must be nonnegative");
    if (c.pool_capacity < 1) throw ConfigError("pool_capacity must be positive");
    if (c.protection_window < 0) throw ConfigError("protection_window must be nonnegative");
    if (c.clip_epsilon <= 0.0 || c.clip_epsilon >= 1.0) {
        throw ConfigError("clip_epsilon must lie in (0, 1)");
    }
    if (c.beta_kl < 0.0) throw ConfigError("beta_kl must be nonnegative");
    if (c.learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (c.adv_eps <= 0.0) throw ConfigError("adv_eps must be positive");
    if (c.validation_interval < 1) throw ConfigError("validation_interval must be positive");
    if (c.validation_task_count < 1) throw ConfigError("validation_task_count must be positive");
    if (c.total_steps < 0) throw ConfigError("total_steps must be nonnegative");
    if (c.tasks_per_step < 1 || c.tasks_per_step > c.env.families) {
        throw ConfigError("tasks_per_step must lie in [1, families]");
    }
    if (c.embedding_dim < 1) throw ConfigError("embedding_dim must be positive");
    if (c.env.horizon < 1) throw ConfigError("env.horizon must be positive");
    if (c.env.num_actions < 2) throw ConfigError("env.num_actions must be at least 2");
    if (c.env.families < 1) throw ConfigError("env.families must be positive");
    if (c.env.history_window < 0) throw ConfigError("env.history_window must be nonnegative");
    if (c.env.noise_prob < 0.0 || c.env.noise_prob > 1.0) {
        throw ConfigError("env.noise_prob must lie in [0, 1]");
    }
    if (c.env.task_hint_len < 0) throw ConfigError("env.task_hint_len must be nonnegative");
}

void apply_ablation(Config& config, const std::string& name) {
    if (name == "full" || name == "none") return;
    if (name == "no-task-skills") {
        config.ablation.task_skills = false;
    } else if (name == "no-step-skills") {
        config.ablation.step_skills = false;
    } else if (name == "no-management") {
        config.ablation.management = false;
    } else if (name == "no-baseline-group") {
        config.ablation.baseline_group = false;
    } else if (name == "no-utility-retrieval") {
        config.ablation.utility_retrieval = false;
    } else if (name == "no-utility-module") {
        config.ablation.utility_module = false;
    } else if (name == "no-skills") {
        config.ablation.task_skills = false;
        config.ablation.step_skills = false;
    } else {
        throw ConfigError("unknown ablation '" + name + "'");
    }
}

std::vector<std::string> ablation_names() {
    return {"no-task-skills",       "no-step-skills",  "no-management", "no-baseline-group",
            "no-utility-retrieval", "no-utility-module", "no-skills"};
}

Config config_from_json(std::string_view bytes) {
    json j = json::parse(bytes, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ConfigError("config is not a JSON object");
    }
    check_known_keys(j,
                     {"group_size", "lambda", "beta_task", "beta_step", "tau_ref", "tau_sim",
                      "alpha", "eta", "top_m", "top_k", "pool_capacity", "protection_window",
                      "clip_epsilon", "beta_kl", "learning_rate", "adv_eps",
                      "validation_interval", "validation_task_count", "total_steps",
                      "tasks_per_step", "seed", "success_threshold", "embedding_dim", "ablation",
                      "env"},
                     "config");
    Config c;
    read_key(j, "group_size", c.group_size);
    read_key(j, "lambda", c.lambda);
    read_key(j, "beta_task", c.beta_task);
    read_key(j, "beta_step", c.beta_step);
    read_key(j, "tau_ref", c.tau_ref);
    read_key(j, "tau_sim", c.tau_sim);
    read_key(j, "alpha", c.alpha);
    read_key(j, "eta", c.eta);
    read_key(j, "top_m", c.top_m);
    read_key(j, "top_k", c.top_k);
    read_key(j, "pool_capacity", c.pool_capacity);
    read_key(j, "protection_window", c.protection_window);
    read_key(j, "clip_epsilon", c.clip_epsilon);
    read_key(j, "beta_kl", c.beta_kl);
    read_key(j, "learning_rate", c.learning_rate);
    read_key(j, "adv_eps", c.adv_eps);
    read_key(j, "validation_interval", c.validation_interval);
    read_key(j, "validation_task_count", c.validation_task_count);
    read_key(j, "total_steps", c.total_steps);
    read_key(j, "tasks_per_step", c.tasks_per_step);
    read_key(j, "seed", c.seed);
    read_key(j, "success_threshold", c.success_threshold);
    read_key(j, "embedding_dim", c.embedding_dim);
    if (j.contains("ablation")) {
        const json& a = j["ablation"];
        check_known_keys(a,
                         {"task_skills", "step_skills", "management", "baseline_group",
                          "utility_retrieval", "utility_module"},
                         "ablation");
        read_key(a, "task_skills", c.ablation.task_skills);
        read_key(a, "step_skills", c.ablation.step_skills);
        read_key(a, "management", c.ablation.management);
        read_key(a, "baseline_group", c.ablation.baseline_group);
        read_key(a, "utility_retrieval", c.ablation.utility_retrieval);
        read_key(a, "utility_module", c.ablation.utility_module);
    }
    if (j.contains("env")) {
        const json& e = j["env"];
        check_known_keys(e,
                         {"horizon", "num_actions", "families", "history_window", "hint_bias",
                          "noise_prob", "task_hint_len", "gamma"},
                         "env");
        read_key(e, "horizon", c.env.horizon);
        read_key(e, "num_actions", c.env.num_actions);
        read_key(e, "families", c.env.families);
        read_key(e, "history_window", c.env.history_window);
        read_key(e, "hint_bias", c.env.hint_bias);
        read_key(e, "noise_prob", c.env.noise_prob);
        read_key(e, "task_hint_len", c.env.task_hint_len);
        read_key(e, "gamma", c.env.gamma);
    }
    validate_config(c);
    return c;
}

std::string config_to_json(const Config& c) {
    json j;
    j["group_size"] = c.group_size;
    j["lambda"] = c.lambda;
    j["beta_task"] = c.beta_task;
    j["beta_step"] = c.beta_step;
    j["tau_ref"] = c.tau_ref;
    j["tau_sim"] = c.tau_sim;
    j["alpha"] = c.alpha;
    j["eta"] = c.eta;
    j["top_m"] = c.top_m;
    j["top_k"] = c.top_k;
    j["pool_capacity"] = c.pool_capacity;
    j["protection_window"] = c.protection_window;
    j["clip_epsilon"] = c.clip_epsilon;
    j["beta_kl"] = c.beta_kl;
    j["learning_rate"] = c.learning_rate;
    j["adv_eps"] = c.adv_eps;
    j["validation_interval"] = c.validation_interval;
    j["validation_task_count"] = c.validation_task_count;
    j["total_steps"] = c.total_steps;
    j["tasks_per_step"] = c.tasks_per_step;
    j["seed"] = c.seed;
    j["success_threshold"] = c.success_threshold;
    j["embedding_dim"] = c.embedding_dim;
    j["ablation"] = {{"task_skills", c.ablation.task_skills},
                     {"step_skills", c.ablation.step_skills},
                     {"management", c.ablation.management},
                     {"baseline_group", c.ablation.baseline_group},
                     {"utility_retrieval", c.ablation.utility_retrieval},
                     {"utility_module", c.ablation.utility_module}};
    j["env"] = {{"horizon", c.env.horizon},
                {"num_actions", c.env.num_actions},
                {"families", c.env.families},
                {"history_window", c.env.history_window},
                {"hint_bias", c.env.hint_bias},
                {"noise_prob", c.env.noise_prob},
                {"task_hint_len", c.env.task_hint_len},
                {"gamma", c.env.gamma}};
    return j.dump(2) + "\n";
}

namespace {

json opt_to_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

std::optional<double> opt_from_json(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

} // namespace

std::string StepMetrics::to_json_line() const {
    json j;
    j["step"] = step;
    json task_list = json::array();
    for (const TaskGroupMetrics& t : tasks) {
        json tj;
        tj["family"] = t.family;
        tj["y_skill"] = opt_to_json(t.y_skill);
        tj["y_base"] = opt_to_json(t.y_base);
        tj["delta"] = opt_to_json(t.delta);
        task_list.push_back(std::move(tj));
    }
    j["tasks"] = std::move(task_list);
    j["mean_y_skill"] = opt_to_json(mean_y_skill);
    j["mean_y_base"] = opt_to_json(mean_y_base);
    j["mean_delta"] = opt_to_json(mean_delta);
    j["task_pool_size"] = task_pool_size;
    j["step_pool_size"] = step_pool_size;
    j["bank_mean_utility"] = opt_to_json(bank_mean_utility);
    j["retrieved_mean_utility"] = opt_to_json(retrieved_mean_utility);
    j["reflection_triggers"] = reflection_triggers;
    j["inserted_task_skills"] = inserted_task_skills;
    j["inserted_step_skills"] = inserted_step_skills;
    j["dedup_hits"] = dedup_hits;
    j["pruned_task_skills"] = pruned_task_skills;
    j["pruned_step_skills"] = pruned_step_skills;
    j["validation_success"] = opt_to_json(validation_success);
    return j.dump();
}

StepMetrics step_metrics_from_json(std::string_view line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw MalformedRecord("unparseable metrics line");
    }
    StepMetrics m;
    try {
        m.step = j.at("step").get<int>();
        if (j.contains("tasks")) {
            for (const json& tj : j.at("tasks")) {
                TaskGroupMetrics t;
                t.family = tj.at("family").get<std::string>();
                t.y_skill = opt_from_json(tj, "y_skill");
                t.y_base = opt_from_json(tj, "y_base");
                t.delta = opt_from_json(tj, "delta");
                m.tasks.push_back(std::move(t));
            }
        }
        m.mean_y_skill = opt_from_json(j, "mean_y_skill");
        m.mean_y_base = opt_from_json(j, "mean_y_base");
        m.mean_delta = opt_from_json(j, "mean_delta");
        m.task_pool_size = j.at("task_pool_size").get<std::int64_t>();
        m.step_pool_size = j.at("step_pool_size").get<std::int64_t>();
        m.bank_mean_utility = opt_from_json(j, "bank_mean_utility");
        m.retrieved_mean_utility = opt_from_json(j, "retrieved_mean_utility");
        m.reflection_triggers = j.at("reflection_triggers").get<int>();
        m.inserted_task_skills = j.at("inserted_task_skills").get<int>();
        m.inserted_step_skills = j.at("inserted_step_skills").get<int>();
        m.dedup_hits = j.at("dedup_hits").get<int>();
        m.pruned_task_skills = j.at("pruned_task_skills").get<int>();
        m.pruned_step_skills = j.at("pruned_step_skills").get<int>();
        m.validation_success = opt_from_json(j, "validation_success");
    } catch (const json::exception& e) {
        throw MalformedRecord(std::string("bad metrics record: ") + e.what());
    }
    return m;
}

namespace {

Config validated(Config config) {
    validate_config(config);
    return config;
}

} // namespace

Trainer::Trainer(Config config, std::shared_ptr<Reflector> reflector,
                 std::shared_ptr<Embedder> embedder)
    : config_(validated(std::move(config))),
      embedder_(embedder ? std::move(embedder)
                         : std::make_shared<HashEmbedder>(config_.embedding_dim)),
      train_tasks_(generate_task_set(config_.env.families, config_.env.horizon,
                                     config_.env.num_actions,
                                     hash_combine(config_.seed, hash_str("tasks")))),
      bank_(config_.embedding_dim, config_.pool_capacity, config_.pool_capacity) {
    if (embedder_->dimension() != config_.embedding_dim) {
        throw ConfigError("embedder dimension does not match config embedding_dim");
    }
    Rng vrng = derive_rng(config_.seed, "validation-tasks");
    validation_tasks_.reserve(static_cast<std::size_t>(config_.validation_task_count));
    for (int i = 0; i < config_.validation_task_count; ++i) {
        validation_tasks_.push_back(
            train_tasks_.tasks[static_cast<std::size_t>(vrng.uniform_int(config_.env.families))]);
    }
    policy_.num_actions = config_.env.num_actions;
    ref_policy_ = policy_;
    reflector_ = reflector ? std::move(reflector)
                           : std::make_shared<OracleReflector>(train_tasks_, config_.env,
                                                               config_.seed);
    bank_.set_phase(BankPhase::Update);
}

RetrievalParams Trainer::retrieval_params() const {
    RetrievalParams p;
    p.top_m = config_.top_m;
    p.top_k = config_.top_k;
    p.tau_sim = config_.tau_sim;
    p.alpha = config_.ablation.utility_retrieval ? config_.alpha : 1.0;
    p.eta = config_.eta;
    return p;
}

Trainer::GroupRollout Trainer::rollout_group(const TaskSpec& task, int task_index) const {
    GroupRollout out;
    out.group.task_text = task.family;
    const int step_index = step_ + 1;
    const AblationSwitches& abl = config_.ablation;
    const bool skills = abl.skills_enabled();
    const RetrievalParams rp = retrieval_params();

    // Task-level retrieval happens once per group; the retrieved set is
    // shared by every skill-half trajectory.
    std::vector<std::string> task_texts;
    std::set<SkillId> task_ids;
    if (skills && abl.task_skills) {
        Query q;
        q.kind = SkillKind::Task;
        q.task_text = task.family;
        q.embedding = embedder_->embed_key(task.family, std::nullopt);
        std::vector<Skill> got = retrieve(bank_.task_pool(), q, rp, true, &out.log);
        for (Skill& s : got) {
            task_texts.push_back(s.body);
            task_ids.insert(s.id);
            out.retrieved_snapshot.push_back(std::move(s));
        }
    }

    const int n = config_.group_size;
    for (int i = 0; i < n; ++i) {
        const bool in_skill_group = skills && (!abl.baseline_group || i < n / 2);
        TrajectoryRecord rec;
        rec.traj_id = i;
        rec.skill_group = in_skill_group;
        Rng rng = derive_rng(config_.seed, "rollout", static_cast<std::uint64_t>(step_index),
                             static_cast<std::uint64_t>(task_index),
                             static_cast<std::uint64_t>(i));
        EnvState state = env_reset(task);
        double total_reward = 0.0;
        bool done = false;
        while (!done) {
            StepContext ctx = make_context(state, config_.env);
            std::vector<SkillId> step_ids_here;
            if (in_skill_group) {
                if (abl.task_skills) ctx.injected_task_skills = task_texts;
                if (abl.step_skills) {
                    Query q;
                    q.kind = SkillKind::Step;
                    q.task_text = task.family;
                    q.observation_text = ctx.observation;
                    q.embedding = embedder_->embed_key(task.family, q.observation_text);
                    std::vector<Skill> got = retrieve(bank_.step_pool(), q, rp, true, &out.log);
                    for (Skill& s : got) {
                        ctx.injected_step_skills.push_back(s.body);
                        step_ids_here.push_back(s.id);
                        out.retrieved_snapshot.push_back(std::move(s));
                    }
                }
            }
            StepSample sample;
            sample.observation = ctx.observation;
            sample.context_features = policy_features(ctx, config_.env);
            sample.admissible = ctx.admissible;
            ActionChoice choice = act(policy_, ctx, config_.env, rng);
            sample.action = choice.action;
            sample.old_prob = choice.prob;
            rec.steps.push_back(std::move(sample));
            if (in_skill_group) {
                rec.step_skill_ids_by_step.push_back(std::move(step_ids_here));
            }
            StepResult sr = env_step(state, choice.action, config_.env);
            total_reward += sr.reward;
            done = sr.done;
        }
        rec.success = state.failed ? 0 : 1;
        rec.base_return = total_reward;
        if (in_skill_group) rec.task_skill_ids = task_ids;
        out.group.records.push_back(std::move(rec));
    }
    return out;
}

StepMetrics Trainer::run_training_step() {
    Rng rng = derive_rng(config_.seed, "batch", static_cast<std::uint64_t>(step_ + 1));
    std::vector<int> indices(static_cast<std::size_t>(config_.env.families));
    std::iota(indices.begin(), indices.end(), 0);
    const int k = config_.tasks_per_step;
    for (int i = 0; i < k; ++i) {
        int j = i + rng.uniform_int(static_cast<int>(indices.size()) - i);
        std::swap(indices[static_cast<std::size_t>(i)], indices[static_cast<std::size_t>(j)]);
    }
    indices.resize(static_cast<std::size_t>(k));
    return run_training_step(indices);
}

StepMetrics Trainer::run_training_step(const std::vector<int>& task_indices) {
    SkillBank bank_snapshot = bank_;
    PolicyParams policy_snapshot = policy_;
    try {
        const int step_index = step_ + 1;
        StepMetrics m;
        m.step = step_index;

        bank_.set_phase(BankPhase::Read);
        std::vector<GroupRollout> rollouts;
        rollouts.reserve(task_indices.size());
        for (std::size_t b = 0; b < task_indices.size(); ++b) {
            rollouts.push_back(rollout_group(
                train_tasks_.tasks.at(static_cast<std::size_t>(task_indices[b])),
                static_cast<int>(b)));
        }
        bank_.set_phase(BankPhase::Update);

        const AblationSwitches& abl = config_.ablation;
        OptParams opt{config_.clip_epsilon, config_.beta_kl, config_.learning_rate,
                      config_.adv_eps};
        HindsightParams hp{config_.beta_task, config_.beta_step, config_.lambda};
        ReflectionConfig rc{config_.tau_ref, abl.task_skills, abl.step_skills};

        double retrieved_sum = 0.0;
        std::int64_t retrieved_count = 0;

        for (std::size_t b = 0; b < rollouts.size(); ++b) {
            GroupRollout& gr = rollouts[b];
            bank_.commit_retrievals(SkillKind::Task, gr.log.task_ids);
            bank_.commit_retrievals(SkillKind::Step, gr.log.step_ids);
            for (const Skill& s : gr.retrieved_snapshot) {
                retrieved_sum += s.utility;
                ++retrieved_count;
            }

            TaskGroupMetrics tm;
            tm.family = gr.group.task_text;
            std::vector<double> returns;

            if (!abl.skills_enabled()) {
                // Pure GRPO reference: every trajectory is a baseline rollout.
                int succ = 0;
                returns.reserve(gr.group.records.size());
                for (const TrajectoryRecord& rec : gr.group.records) {
                    succ += rec.success;
                    returns.push_back(rec.base_return);
                }
                tm.y_base = static_cast<double>(succ) /
                            static_cast<double>(gr.group.records.size());
            } else {
                GroupStats stats = abl.baseline_group ? compute_group_stats(gr.group)
                                                      : skill_only_group_stats(gr.group);
                tm.y_skill = stats.y_skill;
                if (abl.baseline_group) {
                    tm.y_base = stats.y_base;
                    tm.delta = stats.delta_task;
                    if (abl.utility_module) {
                        apply_utility_updates(bank_, gr.group, stats, hp);
                    }
                }
                try {
                    std::uint64_t reflect_seed = hash_combine(
                        hash_combine(hash_combine(config_.seed, hash_str("reflect")),
                                     static_cast<std::uint64_t>(step_index)),
                        static_cast<std::uint64_t>(b));
                    InsertionSummary sum =
                        reflect_and_insert(bank_, gr.group, stats, *reflector_, *embedder_, rc,
                                           step_index, reflect_seed);
                    if (sum.triggered) ++m.reflection_triggers;
                    if (sum.task_skill_id) ++m.inserted_task_skills;
                    if (sum.step_skill_id) ++m.inserted_step_skills;
                    m.dedup_hits += sum.dedup_hits;
                } catch (const ReflectorFailure&) {
                    // Reflection is auxiliary; a failed reflector call skips
                    // this group's skill generation only.
                    ++m.reflection_triggers;
                }
                returns = augmented_returns(gr.group, stats, config_.lambda);
            }

            std::vector<double> advantages = group_advantages(returns, config_.adv_eps);
            std::vector<TrainSample> batch;
            for (std::size_t i = 0; i < gr.group.records.size(); ++i) {
                for (const StepSample& s : gr.group.records[i].steps) {
                    batch.push_back({&s, advantages[i]});
                }
            }
            policy_update(policy_, batch, opt, ref_policy_);
            m.tasks.push_back(std::move(tm));
        }

        auto mean_of = [&](auto accessor) -> std::optional<double> {
            double sum = 0.0;
            int count = 0;
            for (const TaskGroupMetrics& t : m.tasks) {
                if (auto v = accessor(t)) {
                    sum += *v;
                    ++count;
                }
            }
            if (count == 0) return std::nullopt;
            return sum / count;
        };
        m.mean_y_skill = mean_of([](const TaskGroupMetrics& t) { return t.y_skill; });
        m.mean_y_base = mean_of([](const TaskGroupMetrics& t) { return t.y_base; });
        m.mean_delta = mean_of([](const TaskGroupMetrics& t) { return t.delta; });

        m.task_pool_size = static_cast<std::int64_t>(bank_.task_pool().skills.size());
        m.step_pool_size = static_cast<std::int64_t>(bank_.step_pool().skills.size());
        double util_sum = 0.0;
        std::int64_t util_count = 0;
        for (const SkillPool* pool : {&bank_.task_pool(), &bank_.step_pool()}) {
            for (const Skill& s : pool->skills) {
                util_sum += s.utility;
                ++util_count;
            }
        }
        if (util_count > 0) m.bank_mean_utility = util_sum / static_cast<double>(util_count);
        if (retrieved_count > 0) {
            m.retrieved_mean_utility = retrieved_sum / static_cast<double>(retrieved_count);
        }

        bank_.verify_counts();
        step_ = step_index;
        return m;
    } catch (...) {
        bank_ = std::move(bank_snapshot);
        policy_ = std::move(policy_snapshot);
        bank_.set_phase(BankPhase::Update);
        throw;
    }
}

double Trainer::run_validation() const {
    return evaluate_policy(policy_, bank_, validation_tasks_, config_,
                           config_.ablation.skills_enabled(), embedder_.get());
}

RunReport Trainer::run(std::ostream* metrics_out,
                       const std::function<void(const Trainer&, int)>& observer) {
    RunReport report;
    std::optional<double> last_validation;
    for (int s = 1; s <= config_.total_steps; ++s) {
        StepMetrics m = run_training_step();
        if (s % config_.validation_interval == 0) {
            double v = run_validation();
            m.validation_success = v;
            last_validation = v;
            report.best_validation = std::max(report.best_validation, v);
            if (!report.time_to_threshold && v >= config_.success_threshold) {
                report.time_to_threshold = s;
            }
            if (config_.ablation.management) {
                PruneParams pp{config_.pool_capacity, config_.eta, config_.protection_window};
                PruneReport task_prune = prune_pool(bank_, SkillKind::Task, pp, s);
                PruneReport step_prune = prune_pool(bank_, SkillKind::Step, pp, s);
                m.pruned_task_skills = static_cast<int>(task_prune.evicted.size());
                m.pruned_step_skills = static_cast<int>(step_prune.evicted.size());
                m.task_pool_size = static_cast<std::int64_t>(bank_.task_pool().skills.size());
                m.step_pool_size = static_cast<std::int64_t>(bank_.step_pool().skills.size());
            }
        }
        if (metrics_out != nullptr) {
            (*metrics_out) << m.to_json_line() << '\n';
        }
        report.metrics.push_back(std::move(m));
        if (observer) observer(*this, s);
    }
    if (config_.total_steps % config_.validation_interval != 0 || config_.total_steps == 0) {
        last_validation = run_validation();
        report.best_validation = std::max(report.best_validation, *last_validation);
    }
    report.final_validation = last_validation.value_or(0.0);
    report.final_task_pool_size = static_cast<std::int64_t>(bank_.task_pool().skills.size());
    report.final_step_pool_size = static_cast<std::int64_t>(bank_.step_pool().skills.size());
    return report;
}

double evaluate_policy(const PolicyParams& policy, const SkillBank& bank,
                       const std::vector<TaskSpec>& tasks, const Config& config,
                       bool with_skills, const Embedder* embedder) {
    if (tasks.empty()) return 0.0;
    RetrievalParams rp;
    rp.top_m = config.top_m;
    rp.top_k = config.top_k;
    rp.tau_sim = config.tau_sim;
    rp.alpha = config.ablation.utility_retrieval ? config.alpha : 1.0;
    rp.eta = config.eta;
    HashEmbedder fallback(config.embedding_dim);
    const Embedder& emb = embedder != nullptr ? *embedder : fallback;

    int successes = 0;
    for (const TaskSpec& task : tasks) {
        std::vector<std::string> task_texts;
        if (with_skills && config.ablation.task_skills) {
            Query q;
            q.kind = SkillKind::Task;
            q.task_text = task.family;
            q.embedding = emb.embed_key(task.family, std::nullopt);
            for (const Skill& s : retrieve(bank.task_pool(), q, rp, false)) {
                task_texts.push_back(s.body);
            }
        }
        EnvState state = env_reset(task);
        double reward = 0.0;
        bool done = false;
        while (!done) {
            StepContext ctx = make_context(state, config.env);
            if (with_skills) {
                if (config.ablation.task_skills) ctx.injected_task_skills = task_texts;
                if (config.ablation.step_skills) {
                    Query q;
                    q.kind = SkillKind::Step;
                    q.task_text = task.family;
                    q.observation_text = ctx.observation;
                    q.embedding = emb.embed_key(task.family, q.observation_text);
                    for (const Skill& s : retrieve(bank.step_pool(), q, rp, false)) {
                        ctx.injected_step_skills.push_back(s.body);
                    }
                }
            }
            ActionChoice choice = greedy_act(policy, ctx, config.env);
            StepResult sr = env_step(state, choice.action, config.env);
            reward += sr.reward;
            done = sr.done;
        }
        if (reward > 0.5) ++successes;
    }
    return static_cast<double>(successes) / static_cast<double>(tasks.size());
}

} // namespace skillbank
