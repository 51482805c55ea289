#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "ptco/errors.hpp"

namespace ptco {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dimension() const { return values.size(); }
};

// Eq. form: (c·s) / (‖c‖‖s‖), computed in double precision.
inline double cosine_similarity(const EmbeddingVector& c, const EmbeddingVector& s) {
    if (c.dimension() != s.dimension())
        throw DimensionMismatch("cosine: dimensions " + std::to_string(c.dimension()) + " vs " +
                                std::to_string(s.dimension()));
    double dot = 0.0, norm_c = 0.0, norm_s = 0.0;
    for (std::size_t i = 0; i < c.values.size(); ++i) {
        double a = c.values[i];
        double b = s.values[i];
        dot += a * b;
        norm_c += a * a;
        norm_s += b * b;
    }
    if (norm_c == 0.0 || norm_s == 0.0) throw ZeroVector("cosine: zero-magnitude vector");
    return dot / (std::sqrt(norm_c) * std::sqrt(norm_s));
}

inline EmbeddingVector mean_vector(const std::vector<EmbeddingVector>& vectors) {
    if (vectors.empty()) return {};
    EmbeddingVector mean;
    mean.values.assign(vectors.front().dimension(), 0.0);
    for (const EmbeddingVector& v : vectors) {
        if (v.dimension() != mean.dimension())
            throw DimensionMismatch("mean over vectors of unequal dimension");
        for (std::size_t i = 0; i < v.values.size(); ++i) mean.values[i] += v.values[i];
    }
    for (double& x : mean.values) x /= static_cast<double>(vectors.size());
    return mean;
}

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
    // Stable identifier recorded in the store manifest.
    virtual std::string id() const = 0;
};

// Offline fallback: token-hashing term-frequency vector, L2-normalized.
// Fully deterministic, so stores built with it are reproducible byte for byte.
class HashingEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HashingEmbeddingProvider(std::size_t dimension = 256) : dimension_(dimension) {
        if (dimension_ == 0) throw Error("embedding dimension must be > 0");
    }

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const std::string& text : texts) out.push_back(embed_one(text));
        return out;
    }

    std::string id() const override { return "hashing-tf-" + std::to_string(dimension_); }

    std::size_t dimension() const { return dimension_; }

    static std::uint64_t fnv1a64(std::string_view s) {
        std::uint64_t h = 1469598103934665603ull;
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return h;
    }

private:
    EmbeddingVector embed_one(std::string_view text) const {
        EmbeddingVector v;
        v.values.assign(dimension_, 0.0);
        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
            std::size_t j = i;
            while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
            if (j > i) v.values[fnv1a64(text.substr(i, j - i)) % dimension_] += 1.0;
            i = j;
        }
        double norm = 0.0;
        for (double x : v.values) norm += x * x;
        if (norm > 0.0) {
            double inv = 1.0 / std::sqrt(norm);
            for (double& x : v.values) x *= inv;
        }
        return v;
    }

    std::size_t dimension_;
};

}  // namespace ptco
