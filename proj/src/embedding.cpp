#include "skillbank/embedding.hpp"

#include "skillbank/errors.hpp"
#include "skillbank/kernels.hpp"
#include "skillbank/rng.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include <json.hpp>
#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

namespace skillbank {

std::vector<double> Embedder::embed_key(
    std::string_view task_text, const std::optional<std::string>& observation_text) const {
    if (!observation_text) {
        return embed(task_text);
    }
    std::string joined;
    joined.reserve(task_text.size() + observation_text->size() + 4);
    joined.append(task_text);
    joined.append(" ## ");
    joined.append(*observation_text);
    return embed(joined);
}

HashEmbedder::HashEmbedder(int dimension) : dim_(dimension) {
    if (dimension <= 0) {
        throw std::invalid_argument("embedding dimension must be positive");
    }
}

std::vector<double> HashEmbedder::embed(std::string_view text) const {
    std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
    std::size_t i = 0;
    bool any_token = false;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i == start) continue;
        std::string_view token = text.substr(start, i - start);
        any_token = true;
        // Dense signed projection: the token hash seeds a sign stream that
        // covers every dimension. A one-bucket-per-token variant has cosine
        // tails far too heavy at small token counts (a single shared bucket
        // between two one-token texts already gives |cos| = 1).
        Rng signs(hash_str(token));
        std::uint64_t bits = 0;
        int have = 0;
        for (int d = 0; d < dim_; ++d) {
            if (have == 0) {
                bits = signs.next_u64();
                have = 64;
            }
            v[static_cast<std::size_t>(d)] += (bits & 1ull) ? 1.0 : -1.0;
            bits >>= 1;
            --have;
        }
    }
    double norm = kernels::l2_norm(v);
    if (!any_token || norm < 1e-12) {
        std::fill(v.begin(), v.end(), 0.0);
        v[0] = 1.0;
        return v;
    }
    kernels::scale(v, 1.0 / norm);
    return v;
}

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderOptions options, int dimension)
    : options_(std::move(options)), dim_(dimension) {
    if (dimension <= 0) {
        throw std::invalid_argument("embedding dimension must be positive");
    }
}

std::vector<double> RemoteEmbedder::embed(std::string_view text) const {
    std::vector<std::string> one{std::string(text)};
    return embed_batch(one).front();
}

std::vector<std::vector<double>> RemoteEmbedder::embed_batch(
    std::span<const std::string> texts) const {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    httplib::Client client(options_.host, options_.port);
    client.set_connection_timeout(options_.timeout_seconds);
    client.set_read_timeout(options_.timeout_seconds);

    for (std::size_t begin = 0; begin < texts.size(); begin += options_.max_batch) {
        std::size_t end = std::min(texts.size(), begin + static_cast<std::size_t>(options_.max_batch));
        nlohmann::json body;
        body["texts"] = std::vector<std::string>(texts.begin() + begin, texts.begin() + end);
        const std::string payload = body.dump();

        httplib::Result res;
        for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
            res = client.Post("/embed", payload, "application/json");
            if (res && res->status == 200) break;
        }
        if (!res || res->status != 200) {
            throw RemoteUnavailable("embedding service unreachable at " + options_.host + ":" +
                                    std::to_string(options_.port));
        }
        nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("vectors") || !parsed["vectors"].is_array()) {
            throw RemoteUnavailable("embedding service returned a malformed response");
        }
        for (const auto& vec : parsed["vectors"]) {
            std::vector<double> v = vec.get<std::vector<double>>();
            if (static_cast<int>(v.size()) != dim_) {
                throw RemoteUnavailable("embedding service returned wrong dimension");
            }
            out.push_back(std::move(v));
        }
    }
    if (out.size() != texts.size()) {
        throw RemoteUnavailable("embedding service returned wrong vector count");
    }
    return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("cosine: vectors of dimension " + std::to_string(a.size()) +
                                " and " + std::to_string(b.size()));
    }
    return std::clamp(kernels::dot(a, b), -1.0, 1.0);
}

} // namespace skillbank
