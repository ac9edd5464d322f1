#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace duo::motion {

/// Continuous 6D rotation: the first two columns of a rotation matrix,
/// stored as (a1, a2) = (R.col(0), R.col(1)).
struct Rotation6D {
    Eigen::Matrix<double, 6, 1> values = (Eigen::Matrix<double, 6, 1>() << 1, 0, 0, 0, 1, 0).finished();

    Rotation6D() = default;
    explicit Rotation6D(const Eigen::Matrix<double, 6, 1>& v) : values(v) {}
    Rotation6D(double a, double b, double c, double d, double e, double f) { values << a, b, c, d, e, f; }

    Eigen::Vector3d first() const { return values.head<3>(); }
    Eigen::Vector3d second() const { return values.tail<3>(); }

    static Rotation6D identity() { return {}; }
};

/// Gram-Schmidt decode. Throws DegenerateRotation when a1 vanishes or a2 is
/// parallel to a1.
Eigen::Matrix3d rot6d_to_matrix(const Rotation6D& r);

/// Throws NotARotation unless R is orthonormal (within 1e-6) with det +1.
Rotation6D matrix_to_rot6d(const Eigen::Matrix3d& R);

bool is_rotation(const Eigen::Matrix3d& R, double tol = 1e-6);

inline Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

inline Eigen::Matrix3d rot_y(double angle) { return axis_angle(Eigen::Vector3d::UnitY(), angle); }

}  // namespace duo::motion
