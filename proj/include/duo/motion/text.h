#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace duo::motion {

/// Maps a caption to a fixed-size embedding. Implementations must be
/// deterministic.
class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual int dim() const = 0;
    virtual Eigen::VectorXf encode(std::string_view text) const = 0;
    virtual std::string name() const = 0;
};

/// Lowercased alphanumeric tokens of the caption.
std::vector<std::string> tokenize(std::string_view text);

/// Sum of per-token Gaussian vectors seeded by a hash of (seed, token),
/// L2-normalized. Empty captions map to the zero vector.
class HashedBagEncoder final : public TextEncoder {
public:
    explicit HashedBagEncoder(int dim = 64, std::uint64_t seed = 0x5eed) : dim_(dim), seed_(seed) {}

    int dim() const override { return dim_; }
    Eigen::VectorXf encode(std::string_view text) const override;
    std::string name() const override { return "hashed-bag-" + std::to_string(dim_); }

private:
    int dim_;
    std::uint64_t seed_;
};

}  // namespace duo::motion
