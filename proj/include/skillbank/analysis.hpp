#pragma once

#include "skillbank/trainer.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace skillbank {

// Offline view over one run's metrics stream: raw series, 10-step moving
// averages (full windows only), peaks, and final-window aggregates.
struct RunSummary {
    int steps = 0;
    std::vector<std::optional<double>> y_skill;
    std::vector<std::optional<double>> y_base;
    std::vector<std::optional<double>> delta;
    std::vector<std::optional<double>> bank_mean_utility;
    std::vector<std::optional<double>> retrieved_mean_utility;
    std::vector<std::int64_t> task_pool_size;
    std::vector<std::int64_t> step_pool_size;
    std::vector<std::pair<int, double>> validation; // (step, success rate)

    std::vector<double> y_skill_ma; // window 10, entry i covers steps i+1..i+10
    std::vector<double> y_base_ma;

    double peak_y_skill = 0.0;
    double peak_y_base = 0.0;
    bool short_series = false; // fewer steps than one window: peaks use the raw series
    double best_validation = 0.0;

    // Means over the final min(50, steps) training steps.
    std::optional<double> final_window_mean_delta;
    std::optional<double> final_window_mean_retrieved_utility;
};

constexpr int kMovingAverageWindow = 10;
constexpr int kFinalWindow = 50;

RunSummary summarize(std::span<const StepMetrics> metrics);
RunSummary summarize_stream(std::istream& metrics_jsonl);

struct GroupComparison {
    std::string group;
    int runs = 0;
    double best_validation_mean = 0.0;
    double best_validation_std = 0.0;
    double peak_y_skill_mean = 0.0;
    double peak_y_skill_std = 0.0;
    double peak_y_base_mean = 0.0;
    double peak_y_base_std = 0.0;
    double final_delta_mean = 0.0;
    double final_retrieved_utility_mean = 0.0;
};

// Seed-averaged statistics per group key, ordered by first appearance.
std::vector<GroupComparison> compare_runs(std::span<const RunSummary> summaries,
                                          std::span<const std::string> group_keys);

std::string comparison_table(std::span<const GroupComparison> rows);
std::string comparison_json(std::span<const GroupComparison> rows);

} // namespace skillbank
