#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace skillbank {

// Text-to-vector embedding. Implementations must be deterministic for a
// fixed configuration, return unit-norm vectors, and be stateless after
// construction (shareable across rollout workers).
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual int dimension() const = 0;
    virtual std::vector<double> embed(std::string_view text) const = 0;

    std::vector<double> embed_key(std::string_view task_text,
                                  const std::optional<std::string>& observation_text) const;
};

// Signed token hashing: each whitespace token's FNV-1a hash seeds a dense
// +-1 sign pattern over all D dimensions; token patterns are summed and L2
// normalized, so similarity tracks token overlap. No model files, no
// network. Texts with no tokens (and the measure-zero case of exact
// cancellation) map to the canonical first basis vector.
class HashEmbedder final : public Embedder {
public:
    explicit HashEmbedder(int dimension = 64);
    int dimension() const override { return dim_; }
    std::vector<double> embed(std::string_view text) const override;

private:
    int dim_;
};

struct RemoteEmbedderOptions {
    std::string host = "127.0.0.1";
    int port = 8900;
    int timeout_seconds = 5;
    int max_retries = 2;
    int max_batch = 64;
};

// Client for the optional embedding service: POST /embed with
// {"texts":[...]} returning {"vectors":[[...],...]}. Failures surface
// RemoteUnavailable; there is no silent fallback.
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(RemoteEmbedderOptions options, int dimension);
    int dimension() const override { return dim_; }
    std::vector<double> embed(std::string_view text) const override;
    std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) const;

private:
    RemoteEmbedderOptions options_;
    int dim_;
};

// Dot product of two unit vectors, clamped to [-1, 1].
// Throws DimensionMismatch when sizes differ.
double cosine(std::span<const double> a, std::span<const double> b);

} // namespace skillbank
