#include "skillbank/policy.hpp"

#include "skillbank/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace skillbank {

double PolicyParams::weight(const std::string& feature, int action) const {
    auto it = weights.find(feature);
    if (it == weights.end()) return 0.0;
    return it->second.at(static_cast<std::size_t>(action));
}

double context_logit(const PolicyParams& params, std::span<const FeatureSpec> features,
                     int action) {
    double z = 0.0;
    for (const FeatureSpec& f : features) {
        z += f.prior(action) + params.weight(f.id, action);
    }
    return z;
}

std::vector<double> action_distribution(const PolicyParams& params, const StepSample& sample) {
    std::vector<double> logits;
    logits.reserve(sample.admissible.size());
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int a : sample.admissible) {
        double z = context_logit(params, sample.context_features, a);
        logits.push_back(z);
        max_logit = std::max(max_logit, z);
    }
    double sum = 0.0;
    for (double& z : logits) {
        z = std::exp(z - max_logit);
        sum += z;
    }
    for (double& z : logits) z /= sum;
    return logits;
}

double surrogate_term(const StepSample& sample, double new_prob, double advantage, double eps) {
    if (sample.old_prob <= 0.0 || new_prob <= 0.0) {
        throw std::invalid_argument("probabilities must be positive");
    }
    double r = new_prob / sample.old_prob;
    double clipped = std::clamp(r, 1.0 - eps, 1.0 + eps);
    return std::min(r * advantage, clipped * advantage);
}

double kl_admissible(std::span<const double> p_new, std::span<const double> p_ref) {
    if (p_new.size() != p_ref.size()) {
        throw DomainMismatch("KL over mismatched admissible sets");
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < p_new.size(); ++i) {
        if (p_new[i] <= 0.0 || p_ref[i] <= 0.0) {
            throw DomainMismatch("KL requires strictly positive distributions");
        }
        kl += p_new[i] * std::log(p_new[i] / p_ref[i]);
    }
    return std::max(kl, 0.0);
}

std::vector<double> group_advantages(std::span<const double> returns, double adv_eps) {
    if (returns.empty()) {
        throw std::invalid_argument("group_advantages on an empty group");
    }
    // A degenerate group (all returns identical) has exactly zero advantages;
    // computing the mean first would leave rounding residue of order 1e-16
    // that the sigma floor then blows up to 1e-8.
    bool constant = true;
    for (double r : returns) constant = constant && r == returns[0];
    std::vector<double> out(returns.size(), 0.0);
    if (constant) return out;

    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(returns.size());
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    var /= static_cast<double>(returns.size());
    double denom = std::max(std::sqrt(var), adv_eps);
    for (std::size_t i = 0; i < returns.size(); ++i) {
        out[i] = (returns[i] - mean) / denom;
    }
    return out;
}

namespace {

int admissible_index(const StepSample& sample, int action) {
    for (std::size_t i = 0; i < sample.admissible.size(); ++i) {
        if (sample.admissible[i] == action) return static_cast<int>(i);
    }
    throw std::invalid_argument("sample action is not admissible");
}

} // namespace

double surrogate_objective(const PolicyParams& params, std::span<const TrainSample> batch,
                           const OptParams& opt, const PolicyParams& ref) {
    if (batch.empty()) return 0.0;
    double total = 0.0;
    for (const TrainSample& item : batch) {
        const StepSample& sample = *item.sample;
        std::vector<double> probs = action_distribution(params, sample);
        double new_prob = probs[static_cast<std::size_t>(admissible_index(sample, sample.action))];
        total += surrogate_term(sample, new_prob, item.advantage, opt.clip_epsilon);
        if (opt.beta_kl != 0.0) {
            std::vector<double> ref_probs = action_distribution(ref, sample);
            total -= opt.beta_kl * kl_admissible(probs, ref_probs);
        }
    }
    return total / static_cast<double>(batch.size());
}

void policy_update(PolicyParams& params, std::span<const TrainSample> batch,
                   const OptParams& opt, const PolicyParams& ref) {
    if (batch.empty()) return;
    // Gradient accumulated per (feature, action) in an ordered map so the
    // floating-point summation order is reproducible.
    std::map<std::string, std::vector<double>> grad;
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    for (const TrainSample& item : batch) {
        const StepSample& sample = *item.sample;
        const std::size_t n_adm = sample.admissible.size();
        std::vector<double> probs = action_distribution(params, sample);
        int taken = admissible_index(sample, sample.action);
        double new_prob = probs[static_cast<std::size_t>(taken)];
        double r = new_prob / sample.old_prob;

        // d(surrogate)/dz. Zero when the clipped branch is active and
        // saturated; otherwise the unclipped branch's softmax gradient.
        double clipped = std::clamp(r, 1.0 - opt.clip_epsilon, 1.0 + opt.clip_epsilon);
        bool unclipped_active = r * item.advantage <= clipped * item.advantage;
        std::vector<double> dz(n_adm, 0.0);
        if (unclipped_active) {
            for (std::size_t i = 0; i < n_adm; ++i) {
                double indicator = (static_cast<int>(i) == taken) ? 1.0 : 0.0;
                dz[i] = item.advantage * r * (indicator - probs[i]);
            }
        }
        if (opt.beta_kl != 0.0) {
            std::vector<double> ref_probs = action_distribution(ref, sample);
            double kl = kl_admissible(probs, ref_probs);
            for (std::size_t i = 0; i < n_adm; ++i) {
                dz[i] -= opt.beta_kl * probs[i] * (std::log(probs[i] / ref_probs[i]) - kl);
            }
        }

        bool any_dz = false;
        for (double v : dz) any_dz = any_dz || v != 0.0;
        if (!any_dz) continue; // zero gradient: do not materialize weight rows

        for (const FeatureSpec& f : sample.context_features) {
            auto [it, fresh] = grad.try_emplace(f.id, std::vector<double>(
                                                          static_cast<std::size_t>(params.num_actions), 0.0));
            (void)fresh;
            std::vector<double>& row = it->second;
            for (std::size_t i = 0; i < n_adm; ++i) {
                row[static_cast<std::size_t>(sample.admissible[i])] += dz[i] * inv_n;
            }
        }
    }

    for (const auto& [feature, row] : grad) {
        auto [it, fresh] = params.weights.try_emplace(
            feature, std::vector<double>(static_cast<std::size_t>(params.num_actions), 0.0));
        (void)fresh;
        std::vector<double>& w = it->second;
        for (std::size_t a = 0; a < row.size(); ++a) {
            w[a] += opt.learning_rate * row[a];
        }
    }
}

std::string save_policy(const PolicyParams& params) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["num_actions"] = params.num_actions;
    j["weights"] = params.weights;
    return j.dump() + "\n";
}

PolicyParams load_policy(std::string_view bytes) {
    nlohmann::json j = nlohmann::json::parse(bytes, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw MalformedRecord("bad policy file");
    }
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1) {
        throw SchemaVersionMismatch("policy schema version is not 1");
    }
    PolicyParams params;
    try {
        params.num_actions = j.at("num_actions").get<int>();
        params.weights = j.at("weights").get<std::map<std::string, std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedRecord(std::string("bad policy file: ") + e.what());
    }
    for (const auto& [feature, row] : params.weights) {
        if (static_cast<int>(row.size()) != params.num_actions) {
            throw MalformedRecord("policy row for '" + feature + "' has wrong width");
        }
    }
    return params;
}

} // namespace skillbank
