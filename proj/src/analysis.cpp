#include "skillbank/analysis.hpp"

#include "skillbank/errors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace skillbank {

namespace {

// Moving average over the values present in each window; a window with no
// values at all (e.g. the skill series of a skill-free run) contributes 0.
// For runs that produce the series at all, every step carries a value, so
// the windows are dense.
std::vector<double> moving_average(const std::vector<std::optional<double>>& series, int window) {
    std::vector<double> out;
    if (static_cast<int>(series.size()) < window) return out;
    for (std::size_t end = static_cast<std::size_t>(window); end <= series.size(); ++end) {
        double sum = 0.0;
        int count = 0;
        for (std::size_t i = end - static_cast<std::size_t>(window); i < end; ++i) {
            if (series[i]) {
                sum += *series[i];
                ++count;
            }
        }
        out.push_back(count > 0 ? sum / count : 0.0);
    }
    return out;
}

double peak_of(const std::vector<double>& ma, const std::vector<std::optional<double>>& raw) {
    if (!ma.empty()) {
        return *std::max_element(ma.begin(), ma.end());
    }
    double best = 0.0;
    for (const auto& v : raw) {
        if (v) best = std::max(best, *v);
    }
    return best;
}

std::optional<double> final_window_mean(const std::vector<std::optional<double>>& series,
                                        int window) {
    if (series.empty()) return std::nullopt;
    std::size_t start = series.size() > static_cast<std::size_t>(window)
                            ? series.size() - static_cast<std::size_t>(window)
                            : 0;
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = start; i < series.size(); ++i) {
        if (series[i]) {
            sum += *series[i];
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return sum / count;
}

} // namespace

RunSummary summarize(std::span<const StepMetrics> metrics) {
    RunSummary s;
    s.steps = static_cast<int>(metrics.size());
    for (const StepMetrics& m : metrics) {
        s.y_skill.push_back(m.mean_y_skill);
        s.y_base.push_back(m.mean_y_base);
        s.delta.push_back(m.mean_delta);
        s.bank_mean_utility.push_back(m.bank_mean_utility);
        s.retrieved_mean_utility.push_back(m.retrieved_mean_utility);
        s.task_pool_size.push_back(m.task_pool_size);
        s.step_pool_size.push_back(m.step_pool_size);
        if (m.validation_success) {
            s.validation.emplace_back(m.step, *m.validation_success);
            s.best_validation = std::max(s.best_validation, *m.validation_success);
        }
    }
    s.y_skill_ma = moving_average(s.y_skill, kMovingAverageWindow);
    s.y_base_ma = moving_average(s.y_base, kMovingAverageWindow);
    s.short_series = s.steps < kMovingAverageWindow;
    s.peak_y_skill = peak_of(s.y_skill_ma, s.y_skill);
    s.peak_y_base = peak_of(s.y_base_ma, s.y_base);
    s.final_window_mean_delta = final_window_mean(s.delta, kFinalWindow);
    s.final_window_mean_retrieved_utility =
        final_window_mean(s.retrieved_mean_utility, kFinalWindow);
    return s;
}

RunSummary summarize_stream(std::istream& metrics_jsonl) {
    std::vector<StepMetrics> metrics;
    std::string line;
    while (std::getline(metrics_jsonl, line)) {
        if (line.empty()) continue;
        metrics.push_back(step_metrics_from_json(line));
    }
    return summarize(metrics);
}

std::vector<GroupComparison> compare_runs(std::span<const RunSummary> summaries,
                                          std::span<const std::string> group_keys) {
    if (summaries.size() != group_keys.size()) {
        throw std::invalid_argument("one group key per run summary required");
    }
    std::vector<std::string> order;
    std::map<std::string, std::vector<const RunSummary*>> groups;
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        if (groups.find(group_keys[i]) == groups.end()) {
            order.push_back(group_keys[i]);
        }
        groups[group_keys[i]].push_back(&summaries[i]);
    }

    auto mean_std = [](const std::vector<double>& xs) {
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var /= static_cast<double>(xs.size());
        return std::pair<double, double>{mean, std::sqrt(var)};
    };

    std::vector<GroupComparison> rows;
    for (const std::string& key : order) {
        const auto& members = groups[key];
        GroupComparison row;
        row.group = key;
        row.runs = static_cast<int>(members.size());
        std::vector<double> best, peak_skill, peak_base, final_delta, final_util;
        for (const RunSummary* r : members) {
            best.push_back(r->best_validation);
            peak_skill.push_back(r->peak_y_skill);
            peak_base.push_back(r->peak_y_base);
            final_delta.push_back(r->final_window_mean_delta.value_or(0.0));
            final_util.push_back(r->final_window_mean_retrieved_utility.value_or(0.0));
        }
        std::tie(row.best_validation_mean, row.best_validation_std) = mean_std(best);
        std::tie(row.peak_y_skill_mean, row.peak_y_skill_std) = mean_std(peak_skill);
        std::tie(row.peak_y_base_mean, row.peak_y_base_std) = mean_std(peak_base);
        row.final_delta_mean = mean_std(final_delta).first;
        row.final_retrieved_utility_mean = mean_std(final_util).first;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string comparison_table(std::span<const GroupComparison> rows) {
    std::ostringstream out;
    out << "group                      runs  val(best)        train skill      train base       "
           "final delta  final util\n";
    for (const GroupComparison& r : rows) {
        char line[256];
        std::snprintf(line, sizeof(line),
                      "%-26s %4d  %6.3f ± %5.3f   %6.3f ± %5.3f   %6.3f ± %5.3f   %+10.4f  %+10.4f\n",
                      r.group.c_str(), r.runs, r.best_validation_mean, r.best_validation_std,
                      r.peak_y_skill_mean, r.peak_y_skill_std, r.peak_y_base_mean,
                      r.peak_y_base_std, r.final_delta_mean, r.final_retrieved_utility_mean);
        out << line;
    }
    return out.str();
}

std::string comparison_json(std::span<const GroupComparison> rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const GroupComparison& r : rows) {
        arr.push_back({{"group", r.group},
                       {"runs", r.runs},
                       {"best_validation_mean", r.best_validation_mean},
                       {"best_validation_std", r.best_validation_std},
                       {"peak_y_skill_mean", r.peak_y_skill_mean},
                       {"peak_y_skill_std", r.peak_y_skill_std},
                       {"peak_y_base_mean", r.peak_y_base_mean},
                       {"peak_y_base_std", r.peak_y_base_std},
                       {"final_delta_mean", r.final_delta_mean},
                       {"final_retrieved_utility_mean", r.final_retrieved_utility_mean}});
    }
    return arr.dump(2) + "\n";
}

} // namespace skillbank
