#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "duo/util/random.h"

namespace duo::metrics {

/// Rows are samples, columns are feature dimensions.
using Features = Eigen::MatrixXd;

inline constexpr double kCovarianceEpsilon = 1e-6;

/// Squared Frechet distance between N(mu1, s1) and N(mu2, s2). Both
/// covariances get kCovarianceEpsilon * I before the square root.
/// Throws SingularCovariance when the symmetrized product has an
/// eigenvalue below -1e-8.
double frechet_distance(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1, const Eigen::VectorXd& mu2,
                        const Eigen::MatrixXd& s2);

/// Frechet distance of the sample moments. Throws InsufficientSamples for
/// fewer than two rows per side, ShapeMismatch for differing widths.
double fid(const Features& generated, const Features& reference);

/// Mean of |f_i - f'_i|^2 over two disjoint random subsets of size subset.
/// Throws InsufficientSamples unless 2 * subset <= rows.
double diversity(const Features& features, int subset, Rng& rng);

/// Diversity within each label, averaged over labels. Throws
/// InsufficientSamples when any label has fewer than 2 * subset rows.
double multimodality(const Features& features, const std::vector<int>& labels, int subset, Rng& rng);

/// sqrt(mean |t_i - m_i|^2). Throws ShapeMismatch for unequal shapes.
double mm_dist(const Features& text, const Features& motion);

/// Top-1/2/3 hit rates: each motion ranks its own text (candidate 0) against
/// pool_size - 1 distinct mismatched texts; ties go to the lower candidate.
/// Throws InsufficientSamples for fewer than pool_size rows.
std::array<double, 3> r_precision(const Features& text, const Features& motion, Rng& rng, int pool_size = 32);

struct SegmentStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;  // unbiased, per channel
    double within_cov_norm = 0.0;
    /// KL of the fitted diagonal Gaussian to N(0, I), summed over channels.
    double kl_to_prior = 0.0;
};

struct LatentStatistics {
    std::map<std::string, SegmentStats> segments;
    /// Frobenius norm of the cross-covariance for each ordered segment pair "a|b".
    std::map<std::string, double> cross_cov_norm;
};

/// Throws InsufficientSamples (< 2 samples) or ShapeMismatch (row counts differ).
LatentStatistics latent_statistics(const std::map<std::string, Features>& segments);

}  // namespace duo::metrics
