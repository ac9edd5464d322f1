#include "duo/motion/rotation.h"

#include "duo/error.h"

namespace duo::motion {

namespace {
constexpr double kDegenerateEps = 1e-8;
}

Eigen::Matrix3d rot6d_to_matrix(const Rotation6D& r) {
    const Eigen::Vector3d a1 = r.first();
    const Eigen::Vector3d a2 = r.second();
    const double n1 = a1.norm();
    if (!(n1 > kDegenerateEps)) {
        throw DegenerateRotation("rot6d: first column has zero length");
    }
    const Eigen::Vector3d b1 = a1 / n1;
    const Eigen::Vector3d ortho = a2 - a2.dot(b1) * b1;
    const double n2 = ortho.norm();
    if (!(n2 > kDegenerateEps)) {
        throw DegenerateRotation("rot6d: second column parallel to the first");
    }
    const Eigen::Vector3d b2 = ortho / n2;
    Eigen::Matrix3d R;
    R.col(0) = b1;
    R.col(1) = b2;
    R.col(2) = b1.cross(b2);
    return R;
}

bool is_rotation(const Eigen::Matrix3d& R, double tol) {
    if (!R.allFinite()) return false;
    const double ortho_err = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    return ortho_err <= tol && std::abs(R.determinant() - 1.0) <= tol * 3.0;
}

Rotation6D matrix_to_rot6d(const Eigen::Matrix3d& R) {
    if (!is_rotation(R)) {
        throw NotARotation("matrix_to_rot6d: input is not a proper rotation");
    }
    Eigen::Matrix<double, 6, 1> v;
    v << R.col(0), R.col(1);
    return Rotation6D(v);
}

}  // namespace duo::motion
