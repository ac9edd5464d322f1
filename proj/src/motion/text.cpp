#include "duo/motion/text.h"

#include <cctype>

#include "duo/util/random.h"

namespace duo::motion {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        const auto uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc)) {
            cur.push_back(static_cast<char>(std::tolower(uc)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Eigen::VectorXf HashedBagEncoder::encode(std::string_view text) const {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim_);
    for (const auto& tok : tokenize(text)) {
        std::uint64_t h = 1469598103934665603ull ^ seed_;
        for (char c : tok) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        Rng rng(h);
        for (int i = 0; i < dim_; ++i) acc[i] += rng.normal();
    }
    const double n = acc.norm();
    if (n > 0) acc /= n;
    return acc.cast<float>();
}

}  // namespace duo::motion
