#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "duo/motion/normalize.h"
#include "duo/motion/sequence.h"
#include "duo/motion/text.h"

namespace duo::metrics {

/// Maps motion pairs and captions into one shared feature space.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual int dim() const = 0;
    virtual Eigen::VectorXd motion(const motion::InteractionPair& pair) const = 0;
    virtual Eigen::VectorXd text(const std::string& caption) const = 0;
    virtual std::string name() const = 0;
};

/// Fixed-seed Gaussian projection of both persons' normalized features,
/// resampled to a fixed frame count; captions go through a hashed bag of words
/// of the same width.
class RandomProjectionExtractor final : public FeatureExtractor {
public:
    RandomProjectionExtractor(int feature_dim, std::optional<motion::NormStats> stats, int out_dim = 64,
                              int frames = 32, std::uint64_t seed = 0xfea7);

    int dim() const override { return out_dim_; }
    Eigen::VectorXd motion(const motion::InteractionPair& pair) const override;
    Eigen::VectorXd text(const std::string& caption) const override;
    std::string name() const override;

private:
    int feature_dim_;
    std::optional<motion::NormStats> stats_;
    int out_dim_;
    int frames_;
    Eigen::MatrixXd projection_;  // out_dim x (2 * frames * feature_dim)
    motion::HashedBagEncoder text_;
};

/// Wraps caller-provided maps, e.g. identity on precomputed latents.
class CallableExtractor final : public FeatureExtractor {
public:
    using MotionFn = std::function<Eigen::VectorXd(const motion::InteractionPair&)>;
    using TextFn = std::function<Eigen::VectorXd(const std::string&)>;

    CallableExtractor(int dim, MotionFn motion_fn, TextFn text_fn, std::string name)
        : dim_(dim), motion_(std::move(motion_fn)), text_(std::move(text_fn)), name_(std::move(name)) {}

    int dim() const override { return dim_; }
    Eigen::VectorXd motion(const motion::InteractionPair& pair) const override { return motion_(pair); }
    Eigen::VectorXd text(const std::string& caption) const override { return text_(caption); }
    std::string name() const override { return name_; }

private:
    int dim_;
    MotionFn motion_;
    TextFn text_;
    std::string name_;
};

/// Linear resampling of a sequence to a fixed number of frames.
motion::FrameMatrix resample_frames(const motion::FrameMatrix& data, int frames);

}  // namespace duo::metrics
