#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "duo/motion/sequence.h"
#include "duo/motion/skeleton.h"

namespace duo::motion {

enum class Family { kApproach, kCircle, kReachAndTouch, kPushRetreat };

inline constexpr std::array<Family, 4> kAllFamilies = {Family::kApproach, Family::kCircle, Family::kReachAndTouch,
                                                       Family::kPushRetreat};

std::string family_name(Family f);
std::optional<Family> parse_family(std::string_view name);
/// True for the families whose bodies touch.
bool family_has_contact(Family f);
const std::vector<std::string>& family_templates(Family f);
/// Inverse lookup over the template vocabulary.
std::optional<Family> family_of_text(std::string_view text);

struct FrameRange {
    int min = 32;
    int max = 32;
};

/// One clip of the given family. Deterministic in clip_seed.
InteractionPair synth_clip(Family family, std::uint64_t clip_seed, const SkeletonSpec& skeleton,
                           const MotionLayout& layout, int frames);

/// count clips, clip i drawn from family i mod |families| with seed (seed ^ i)
/// and a frame count uniform in frame_range. Throws InvalidArgument for
/// count < 1 or an empty/invalid range.
Dataset synth_dataset(std::uint64_t seed, int count, const SkeletonSpec& skeleton, const MotionLayout& layout,
                      FrameRange frame_range, const std::vector<Family>& families = {kAllFamilies.begin(),
                                                                                      kAllFamilies.end()});

}  // namespace duo::motion
