#include "skillbank/bank.hpp"

#include "skillbank/errors.hpp"
#include "skillbank/kernels.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace skillbank {

namespace {
constexpr int kSchemaVersion = 1;
} // namespace

const Skill* SkillPool::find(SkillId id) const {
    for (const Skill& s : skills) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

std::string canonicalize(std::string_view body) {
    std::string out;
    out.reserve(body.size());
    bool pending_space = false;
    for (char ch : body) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

SkillBank::SkillBank(int embedding_dim, std::int64_t task_capacity, std::int64_t step_capacity)
    : embedding_dim_(embedding_dim) {
    if (embedding_dim <= 0 || task_capacity <= 0 || step_capacity <= 0) {
        throw std::invalid_argument("bank dimensions and capacities must be positive");
    }
    task_pool_.kind = SkillKind::Task;
    task_pool_.capacity = task_capacity;
    step_pool_.kind = SkillKind::Step;
    step_pool_.capacity = step_capacity;
}

const SkillPool& SkillBank::pool(SkillKind kind) const {
    return kind == SkillKind::Task ? task_pool_ : step_pool_;
}

SkillPool& SkillBank::mutable_pool(SkillKind kind) {
    return kind == SkillKind::Task ? task_pool_ : step_pool_;
}

void SkillBank::require_update_phase(const char* op) const {
    if (phase_ != BankPhase::Update) {
        throw PhaseViolation(std::string(op) + " attempted during the read-only rollout phase");
    }
}

InsertResult SkillBank::insert_skill(SkillKind kind, RetrievalKey key, std::string body,
                                     std::int64_t created_step) {
    require_update_phase("insert_skill");
    const bool has_obs = key.observation_text.has_value();
    if ((kind == SkillKind::Step) != has_obs) {
        throw KeyShapeMismatch(kind == SkillKind::Step
                                   ? "step skill requires an observation text"
                                   : "task skill must not carry an observation text");
    }
    if (static_cast<int>(key.embedding.size()) != embedding_dim_) {
        throw DimensionMismatch("key embedding dimension " + std::to_string(key.embedding.size()) +
                                " != bank dimension " + std::to_string(embedding_dim_));
    }

    std::string normalized = canonicalize(body);
    SkillPool& pool = mutable_pool(kind);
    for (const Skill& existing : pool.skills) {
        if (existing.normalized_body == normalized &&
            existing.key.task_text == key.task_text &&
            existing.key.observation_text == key.observation_text) {
            return InsertResult{false, existing.id};
        }
    }

    Skill skill;
    skill.id = next_id_++;
    skill.kind = kind;
    skill.key = std::move(key);
    skill.body = std::move(body);
    skill.normalized_body = std::move(normalized);
    skill.created_step = created_step;
    pool.skills.push_back(std::move(skill));
    return InsertResult{true, pool.skills.back().id};
}

void SkillBank::commit_retrievals(SkillKind kind, std::span<const SkillId> ids) {
    require_update_phase("commit_retrievals");
    SkillPool& pool = mutable_pool(kind);
    for (SkillId id : ids) {
        Skill* skill = find_mutable(kind, id);
        if (skill == nullptr) {
            throw UnknownSkillId("retrieval log references unknown skill " + std::to_string(id));
        }
        skill->retrieval_count += 1;
        pool.total_retrievals += 1;
    }
}

void SkillBank::set_utility(SkillKind kind, SkillId id, double utility) {
    require_update_phase("set_utility");
    Skill* skill = find_mutable(kind, id);
    if (skill == nullptr) {
        throw UnknownSkillId("utility update references unknown skill " + std::to_string(id));
    }
    skill->utility = utility;
}

Skill* SkillBank::find_mutable(SkillKind kind, SkillId id) {
    for (Skill& s : mutable_pool(kind).skills) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

void SkillBank::verify_counts() const {
    for (const SkillPool* pool : {&task_pool_, &step_pool_}) {
        std::int64_t sum = 0;
        for (const Skill& s : pool->skills) sum += s.retrieval_count;
        if (sum != pool->total_retrievals) {
            throw std::logic_error("pool retrieval counts out of sync: sum " + std::to_string(sum) +
                                   " vs total " + std::to_string(pool->total_retrievals));
        }
    }
}

SkillPool& PruneAccess::pool(SkillBank& bank, SkillKind kind) {
    return bank.mutable_pool(kind);
}

void PruneAccess::require_update_phase(const SkillBank& bank, const char* op) {
    bank.require_update_phase(op);
}

namespace {

nlohmann::json skill_to_json(const Skill& s) {
    nlohmann::json j;
    j["id"] = s.id;
    j["kind"] = s.kind == SkillKind::Task ? "task" : "step";
    j["task_text"] = s.key.task_text;
    if (s.key.observation_text) {
        j["observation_text"] = *s.key.observation_text;
    }
    j["body"] = s.body;
    j["utility"] = s.utility;
    j["retrieval_count"] = s.retrieval_count;
    j["created_step"] = s.created_step;
    j["embedding"] = s.key.embedding;
    return j;
}

Skill skill_from_json(const nlohmann::json& j, int embedding_dim) {
    Skill s;
    try {
        s.id = j.at("id").get<SkillId>();
        std::string kind = j.at("kind").get<std::string>();
        if (kind == "task") {
            s.kind = SkillKind::Task;
        } else if (kind == "step") {
            s.kind = SkillKind::Step;
        } else {
            throw MalformedRecord("unknown skill kind '" + kind + "'");
        }
        s.key.task_text = j.at("task_text").get<std::string>();
        if (j.contains("observation_text")) {
            s.key.observation_text = j.at("observation_text").get<std::string>();
        }
        s.body = j.at("body").get<std::string>();
        s.utility = j.at("utility").get<double>();
        s.retrieval_count = j.at("retrieval_count").get<std::int64_t>();
        s.created_step = j.at("created_step").get<std::int64_t>();
        s.key.embedding = j.at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedRecord(std::string("bad skill record: ") + e.what());
    }
    if ((s.kind == SkillKind::Step) != s.key.observation_text.has_value()) {
        throw MalformedRecord("skill record violates the observation-presence rule");
    }
    if (static_cast<int>(s.key.embedding.size()) != embedding_dim) {
        throw MalformedRecord("skill embedding has wrong dimension");
    }
    s.normalized_body = canonicalize(s.body);
    return s;
}

} // namespace

std::string save_bank(const SkillBank& bank) {
    std::ostringstream out;
    nlohmann::json header;
    header["schema_version"] = kSchemaVersion;
    header["embedding_dim"] = bank.embedding_dim();
    header["task_capacity"] = bank.task_pool().capacity;
    header["step_capacity"] = bank.step_pool().capacity;
    header["skill_count"] =
        bank.task_pool().skills.size() + bank.step_pool().skills.size();
    out << header.dump() << '\n';
    for (const SkillPool* pool : {&bank.task_pool(), &bank.step_pool()}) {
        for (const Skill& s : pool->skills) {
            out << skill_to_json(s).dump() << '\n';
        }
    }
    return out.str();
}

SkillBank load_bank(std::string_view bytes) {
    std::istringstream in{std::string(bytes)};
    std::string line;
    if (!std::getline(in, line)) {
        throw MalformedRecord("empty bank stream");
    }
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object()) {
        throw MalformedRecord("bad bank header");
    }
    if (!header.contains("schema_version") ||
        header["schema_version"].get<int>() != kSchemaVersion) {
        throw SchemaVersionMismatch("bank schema version is not " +
                                    std::to_string(kSchemaVersion));
    }
    int dim;
    std::int64_t task_capacity, step_capacity, expected_count;
    try {
        dim = header.at("embedding_dim").get<int>();
        task_capacity = header.at("task_capacity").get<std::int64_t>();
        step_capacity = header.at("step_capacity").get<std::int64_t>();
        expected_count = header.at("skill_count").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedRecord(std::string("bad bank header: ") + e.what());
    }

    SkillBank bank(dim, task_capacity, step_capacity);
    SkillId max_id = 0;
    std::int64_t count = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw MalformedRecord("unparseable skill line");
        }
        Skill s = skill_from_json(j, dim);
        SkillPool& pool = bank.mutable_pool(s.kind);
        pool.total_retrievals += s.retrieval_count;
        max_id = std::max(max_id, s.id);
        pool.skills.push_back(std::move(s));
        ++count;
    }
    if (count != expected_count) {
        throw MalformedRecord("bank stream truncated: expected " +
                              std::to_string(expected_count) + " skills, found " +
                              std::to_string(count));
    }
    bank.next_id_ = max_id + 1;
    return bank;
}

} // namespace skillbank
