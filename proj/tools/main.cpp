#include "skillbank/analysis.hpp"
#include "skillbank/bank.hpp"
#include "skillbank/errors.hpp"
#include "skillbank/management.hpp"
#include "skillbank/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace skillbank;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << content;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::vector<std::string>& ablations, std::int64_t seed, bool seed_given) {
    Config config;
    if (!config_path.empty()) {
        config = config_from_json(read_file(config_path));
    }
    for (const std::string& name : ablations) {
        apply_ablation(config, name);
    }
    if (seed_given) {
        config.seed = static_cast<std::uint64_t>(seed);
    }
    validate_config(config);

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    write_file(out / "config.json", config_to_json(config));

    Trainer trainer(config);
    std::ofstream metrics(out / "metrics.jsonl", std::ios::binary);
    if (!metrics) {
        throw std::runtime_error("cannot write metrics stream");
    }
    RunReport report = trainer.run(&metrics);
    metrics.close();

    write_file(out / "bank.jsonl", save_bank(trainer.bank()));
    write_file(out / "policy.json", save_policy(trainer.policy()));
    write_file(out / "train_tasks.jsonl", save_tasks(trainer.train_tasks()));
    TaskSet val_set;
    val_set.horizon = config.env.horizon;
    val_set.num_actions = config.env.num_actions;
    val_set.tasks = trainer.validation_tasks();
    write_file(out / "val_tasks.jsonl", save_tasks(val_set));

    std::string label = ablations.empty() ? "full" : ablations[0];
    for (std::size_t i = 1; i < ablations.size(); ++i) label += "+" + ablations[i];
    nlohmann::json summary;
    summary["ablation_label"] = label;
    summary["seed"] = config.seed;
    summary["best_validation"] = report.best_validation;
    summary["final_validation"] = report.final_validation;
    summary["time_to_threshold"] =
        report.time_to_threshold ? nlohmann::json(*report.time_to_threshold) : nlohmann::json();
    summary["final_task_pool_size"] = report.final_task_pool_size;
    summary["final_step_pool_size"] = report.final_step_pool_size;
    write_file(out / "summary.json", summary.dump(2) + "\n");

    std::cout << summary.dump(2) << std::endl;
    return 0;
}

int cmd_eval(const std::string& bank_path, const std::string& policy_path,
             const std::string& tasks_path, const std::string& config_path, bool no_skills) {
    Config config;
    if (!config_path.empty()) {
        config = config_from_json(read_file(config_path));
    }
    SkillBank bank = load_bank(read_file(bank_path));
    PolicyParams policy = load_policy(read_file(policy_path));
    TaskSet tasks = load_tasks(read_file(tasks_path));

    // The task file is authoritative for the environment geometry.
    config.env.horizon = tasks.horizon;
    config.env.num_actions = tasks.num_actions;
    config.embedding_dim = bank.embedding_dim();
    if (policy.num_actions != tasks.num_actions) {
        throw ConfigError("policy was trained for " + std::to_string(policy.num_actions) +
                          " actions but the task set has " + std::to_string(tasks.num_actions));
    }

    double success = evaluate_policy(policy, bank, tasks.tasks, config, !no_skills);
    nlohmann::json out;
    out["tasks"] = tasks.tasks.size();
    out["with_skills"] = !no_skills;
    out["success_rate"] = success;
    std::cout << out.dump(2) << std::endl;
    return 0;
}

int cmd_inspect(const std::string& bank_path) {
    SkillBank bank = load_bank(read_file(bank_path));
    for (const SkillPool* pool : {&bank.task_pool(), &bank.step_pool()}) {
        std::vector<const Skill*> order;
        for (const Skill& s : pool->skills) order.push_back(&s);
        std::sort(order.begin(), order.end(), [](const Skill* a, const Skill* b) {
            if (a->utility != b->utility) return a->utility > b->utility;
            return a->id < b->id;
        });
        std::cout << (pool->kind == SkillKind::Task ? "task pool" : "step pool") << ": "
                  << pool->skills.size() << "/" << pool->capacity << " skills, total retrievals "
                  << pool->total_retrievals << "\n";
        for (const Skill* s : order) {
            char line[512];
            std::snprintf(line, sizeof(line), "  #%-5lld u=%+.4f n=%-5lld t0=%-5lld %s | %s\n",
                          static_cast<long long>(s->id), s->utility,
                          static_cast<long long>(s->retrieval_count),
                          static_cast<long long>(s->created_step), s->key.task_text.c_str(),
                          s->body.c_str());
            std::cout << line;
        }
    }
    return 0;
}

int cmd_prune(const std::string& bank_path, std::int64_t capacity, double eta,
              const std::string& out_path) {
    SkillBank bank = load_bank(read_file(bank_path));
    PruneParams params;
    params.capacity = capacity;
    params.eta = eta;
    params.protection_window = 0; // offline: no notion of a current training step
    std::int64_t now = 0;
    for (const SkillPool* pool : {&bank.task_pool(), &bank.step_pool()}) {
        for (const Skill& s : pool->skills) now = std::max(now, s.created_step);
    }
    PruneReport task_report = prune_pool(bank, SkillKind::Task, params, now);
    PruneReport step_report = prune_pool(bank, SkillKind::Step, params, now);

    write_file(out_path.empty() ? bank_path : out_path, save_bank(bank));
    nlohmann::json out;
    out["evicted_task_skills"] = task_report.evicted.size();
    out["evicted_step_skills"] = step_report.evicted.size();
    out["task_pool_size"] = bank.task_pool().skills.size();
    out["step_pool_size"] = bank.step_pool().skills.size();
    std::cout << out.dump(2) << std::endl;
    return 0;
}

int cmd_analyze(const std::vector<std::string>& run_dirs, const std::string& group_by,
                const std::string& out_dir) {
    std::vector<RunSummary> summaries;
    std::vector<std::string> keys;
    for (const std::string& dir : run_dirs) {
        const fs::path run(dir);
        std::istringstream metrics(read_file(run / "metrics.jsonl"));
        summaries.push_back(summarize_stream(metrics));

        std::string key = run.filename().string();
        if (group_by == "ablation") {
            nlohmann::json summary =
                nlohmann::json::parse(read_file(run / "summary.json"), nullptr, false);
            if (!summary.is_discarded() && summary.contains("ablation_label")) {
                key = summary["ablation_label"].get<std::string>();
            }
        }
        keys.push_back(key);
    }
    std::vector<GroupComparison> rows = compare_runs(summaries, keys);
    std::cout << comparison_table(rows);

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "comparison.json", comparison_json(rows));
        for (std::size_t i = 0; i < summaries.size(); ++i) {
            const RunSummary& s = summaries[i];
            nlohmann::json series;
            auto opt_series = [](const std::vector<std::optional<double>>& xs) {
                nlohmann::json arr = nlohmann::json::array();
                for (const auto& x : xs) arr.push_back(x ? nlohmann::json(*x) : nlohmann::json());
                return arr;
            };
            series["y_skill"] = opt_series(s.y_skill);
            series["y_base"] = opt_series(s.y_base);
            series["delta"] = opt_series(s.delta);
            series["y_skill_ma10"] = s.y_skill_ma;
            series["y_base_ma10"] = s.y_base_ma;
            series["bank_mean_utility"] = opt_series(s.bank_mean_utility);
            series["retrieved_mean_utility"] = opt_series(s.retrieved_mean_utility);
            series["task_pool_size"] = s.task_pool_size;
            series["step_pool_size"] = s.step_pool_size;
            nlohmann::json val = nlohmann::json::array();
            for (const auto& [step, v] : s.validation) val.push_back({step, v});
            series["validation"] = val;
            std::string name = fs::path(run_dirs[i]).filename().string();
            write_file(fs::path(out_dir) / (name + "_series.json"), series.dump() + "\n");
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-granularity skill bank trainer for the SkillWorld environment"};
    app.require_subcommand(1);

    std::string config_path, out_dir, bank_path, policy_path, tasks_path, prune_out;
    std::vector<std::string> ablations, run_dirs;
    std::int64_t seed = 0, capacity = 64;
    double eta = 0.5;
    bool no_skills = false;
    std::string group_by = "dir";

    std::string ablation_help = "Ablation presets (repeatable):";
    for (const std::string& n : ablation_names()) ablation_help += " " + n;

    CLI::App* train = app.add_subcommand("train", "Run the full training loop");
    train->add_option("--config", config_path, "Config JSON (defaults apply when omitted)");
    CLI::Option* seed_opt = train->add_option("--seed", seed, "Override the config seed");
    train->add_option("--out", out_dir, "Output directory")->required();
    train->add_option("--ablation", ablations, ablation_help);

    CLI::App* eval = app.add_subcommand("eval", "Greedy evaluation of a saved policy");
    eval->add_option("--bank", bank_path, "Bank file")->required();
    eval->add_option("--policy", policy_path, "Policy file")->required();
    eval->add_option("--tasks", tasks_path, "Task set file")->required();
    eval->add_option("--config", config_path, "Config JSON for retrieval parameters");
    eval->add_flag("--no-skills", no_skills, "Evaluate without skill injection");

    CLI::App* inspect = app.add_subcommand("inspect-bank", "Print skills sorted by utility");
    inspect->add_option("--bank", bank_path, "Bank file")->required();

    CLI::App* prune = app.add_subcommand("prune", "Prune a bank file to a capacity");
    prune->add_option("--bank", bank_path, "Bank file")->required();
    prune->add_option("--capacity", capacity, "Capacity per pool")->required();
    prune->add_option("--eta", eta, "Exploration bonus strength");
    prune->add_option("--out", prune_out, "Write here instead of in place");

    CLI::App* analyze = app.add_subcommand("analyze", "Compare metrics across run directories");
    analyze->add_option("--runs", run_dirs, "Run directories")->required()->expected(-1);
    analyze->add_option("--group-by", group_by, "Grouping: 'ablation' or 'dir'");
    analyze->add_option("--out", out_dir, "Write comparison.json and per-run series here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            return cmd_train(config_path, out_dir, ablations, seed, seed_opt->count() > 0);
        }
        if (eval->parsed()) {
            return cmd_eval(bank_path, policy_path, tasks_path, config_path, no_skills);
        }
        if (inspect->parsed()) {
            return cmd_inspect(bank_path);
        }
        if (prune->parsed()) {
            return cmd_prune(bank_path, capacity, eta, prune_out);
        }
        if (analyze->parsed()) {
            return cmd_analyze(run_dirs, group_by, out_dir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
