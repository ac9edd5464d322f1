#include "duo/metrics/fidelity.h"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <set>

#include "duo/error.h"

namespace duo::metrics {

namespace {

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    if (es.info() != Eigen::Success) throw SingularCovariance("eigendecomposition failed");
    Eigen::VectorXd ev = es.eigenvalues();
    if (ev.minCoeff() < -1e-8) throw SingularCovariance("covariance has a negative eigenvalue");
    ev = ev.cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd covariance(const Features& x, const Eigen::VectorXd& mean) {
    const Eigen::MatrixXd c = x.rowwise() - mean.transpose();
    return (c.transpose() * c) / static_cast<double>(x.rows() - 1);
}

double pair_mean_sq(const Features& f, const std::vector<Eigen::Index>& rows, int subset, Rng& rng) {
    std::vector<Eigen::Index> order = rows;
    rng.shuffle(order);
    double acc = 0.0;
    for (int i = 0; i < subset; ++i) acc += (f.row(order[i]) - f.row(order[subset + i])).squaredNorm();
    return acc / subset;
}

}  // namespace

double frechet_distance(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& s1, const Eigen::VectorXd& mu2,
                        const Eigen::MatrixXd& s2) {
    const auto d = mu1.size();
    if (mu2.size() != d || s1.rows() != d || s1.cols() != d || s2.rows() != d || s2.cols() != d) {
        throw ShapeMismatch("frechet_distance: dimension mismatch");
    }
    const Eigen::MatrixXd eps = kCovarianceEpsilon * Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd a = s1 + eps;
    const Eigen::MatrixXd b = s2 + eps;
    const Eigen::MatrixXd ra = sqrt_psd(a);
    // Tr sqrt(A B) = Tr sqrt(A^1/2 B A^1/2), and the latter is symmetric.
    const Eigen::MatrixXd m = ra * b * ra;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw SingularCovariance("eigendecomposition failed");
    const Eigen::VectorXd ev = es.eigenvalues();
    if (ev.minCoeff() < -1e-8) throw SingularCovariance("covariance product has a negative eigenvalue");
    const double tr_sqrt = ev.cwiseMax(0.0).cwiseSqrt().sum();
    const double value = (mu1 - mu2).squaredNorm() + a.trace() + b.trace() - 2.0 * tr_sqrt;
    return std::max(value, 0.0);
}

double fid(const Features& generated, const Features& reference) {
    if (generated.rows() < 2 || reference.rows() < 2) throw InsufficientSamples("fid needs at least two samples");
    if (generated.cols() != reference.cols()) throw ShapeMismatch("fid: feature widths differ");
    const Eigen::VectorXd m1 = generated.colwise().mean().transpose();
    const Eigen::VectorXd m2 = reference.colwise().mean().transpose();
    return frechet_distance(m1, covariance(generated, m1), m2, covariance(reference, m2));
}

double diversity(const Features& features, int subset, Rng& rng) {
    if (subset < 1 || 2 * static_cast<Eigen::Index>(subset) > features.rows()) {
        throw InsufficientSamples("diversity needs 2 * subset <= sample count");
    }
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i) rows[static_cast<std::size_t>(i)] = i;
    return pair_mean_sq(features, rows, subset, rng);
}

double multimodality(const Features& features, const std::vector<int>& labels, int subset, Rng& rng) {
    if (static_cast<Eigen::Index>(labels.size()) != features.rows()) throw ShapeMismatch("one label per row");
    std::map<int, std::vector<Eigen::Index>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(static_cast<Eigen::Index>(i));
    if (groups.empty() || subset < 1) throw InsufficientSamples("multimodality needs labeled samples");
    double acc = 0.0;
    for (const auto& [label, rows] : groups) {
        if (rows.size() < 2 * static_cast<std::size_t>(subset)) {
            throw InsufficientSamples("label " + std::to_string(label) + " has fewer than 2 * subset samples");
        }
        acc += pair_mean_sq(features, rows, subset, rng);
    }
    return acc / static_cast<double>(groups.size());
}

double mm_dist(const Features& text, const Features& motion) {
    if (text.rows() != motion.rows() || text.cols() != motion.cols()) throw ShapeMismatch("mm_dist: shapes differ");
    if (text.rows() == 0) throw InsufficientSamples("mm_dist needs samples");
    return std::sqrt((text - motion).rowwise().squaredNorm().mean());
}

std::array<double, 3> r_precision(const Features& text, const Features& motion, Rng& rng, int pool_size) {
    if (text.rows() != motion.rows() || text.cols() != motion.cols()) {
        throw ShapeMismatch("r_precision: shapes differ");
    }
    const Eigen::Index n = motion.rows();
    if (pool_size < 1 || n < pool_size) throw InsufficientSamples("r_precision needs at least pool_size samples");
    std::array<double, 3> hits{0, 0, 0};
    std::vector<Eigen::Index> pool;
    for (Eigen::Index i = 0; i < n; ++i) {
        pool.assign(1, i);
        std::set<Eigen::Index> used{i};
        while (static_cast<int>(pool.size()) < pool_size) {
            const auto j = static_cast<Eigen::Index>(rng.integer(0, n - 1));
            if (used.insert(j).second) pool.push_back(j);
        }
        const double d_true = (motion.row(i) - text.row(i)).norm();
        // Candidate 0 is the true text, so only strictly closer ones outrank it.
        int rank = 0;
        for (std::size_t c = 1; c < pool.size(); ++c) {
            if ((motion.row(i) - text.row(pool[c])).norm() < d_true) ++rank;
        }
        for (int k = 0; k < 3; ++k) hits[k] += rank <= k ? 1.0 : 0.0;
    }
    for (auto& h : hits) h /= static_cast<double>(n);
    return hits;
}

LatentStatistics latent_statistics(const std::map<std::string, Features>& segments) {
    LatentStatistics out;
    Eigen::Index n = -1;
    for (const auto& [name, z] : segments) {
        if (n >= 0 && z.rows() != n) throw ShapeMismatch("latent segments differ in sample count");
        n = z.rows();
    }
    if (n < 2) throw InsufficientSamples("latent statistics need at least two samples");
    std::map<std::string, Eigen::MatrixXd> centered;
    for (const auto& [name, z] : segments) {
        SegmentStats s;
        s.mean = z.colwise().mean().transpose();
        centered[name] = z.rowwise() - s.mean.transpose();
        s.variance = centered[name].colwise().squaredNorm().transpose() / static_cast<double>(n - 1);
        s.within_cov_norm = ((centered[name].transpose() * centered[name]) / static_cast<double>(n - 1)).norm();
        const Eigen::ArrayXd v = s.variance.array().max(1e-300);
        s.kl_to_prior = 0.5 * (v + s.mean.array().square() - 1.0 - v.log()).sum();
        out.segments[name] = std::move(s);
    }
    for (const auto& [a, ca] : centered) {
        for (const auto& [b, cb] : centered) {
            if (a == b) continue;
            out.cross_cov_norm[a + "|" + b] = ((ca.transpose() * cb) / static_cast<double>(n - 1)).norm();
        }
    }
    return out;
}

}  // namespace duo::metrics
