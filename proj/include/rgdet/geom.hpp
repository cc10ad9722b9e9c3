#pragma once

#include <array>
#include <cmath>

namespace rgdet {

using Vec3 = std::array<double, 3>;
using Vec2 = std::array<double, 2>;

/// Row-major 3x3.
struct Mat3 {
    std::array<double, 9> m{};

    double& operator()(int r, int c) { return m[r * 3 + c]; }
    double operator()(int r, int c) const { return m[r * 3 + c]; }

    static Mat3 identity() { return diag({1.0, 1.0, 1.0}); }
    static Mat3 diag(const Vec3& d) {
        Mat3 a;
        a(0, 0) = d[0];
        a(1, 1) = d[1];
        a(2, 2) = d[2];
        return a;
    }
};

/// Row-major 2x2.
struct Mat2 {
    std::array<double, 4> m{};

    double& operator()(int r, int c) { return m[r * 2 + c]; }
    double operator()(int r, int c) const { return m[r * 2 + c]; }

    static Mat2 identity() { return {{1.0, 0.0, 0.0, 1.0}}; }
};

/// 2x3, the shape of the BEV projection.
struct Mat2x3 {
    std::array<double, 6> m{};

    double& operator()(int r, int c) { return m[r * 3 + c]; }
    double operator()(int r, int c) const { return m[r * 3 + c]; }
};

/// Scalar-first (w, x, y, z), right-handed, acting on column vectors.
struct Quaternion {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
};

inline constexpr double kSingularDet = 1e-12;
inline constexpr double kDegenerateQuatNorm = 1e-12;

Quaternion quat_normalize(const Quaternion& q);
Mat3 quat_to_rotmat(const Quaternion& q);

/// R diag(s)^2 R^T. Throws NonPositiveScale if any s_i <= 0.
Mat3 covariance_from_scale_rot(const Vec3& s, const Mat3& r);

/// Yaw rotation about +z.
Mat3 rot_z(double theta);

Mat3 operator*(const Mat3& a, const Mat3& b);
Vec3 operator*(const Mat3& a, const Vec3& v);
Mat3 operator+(const Mat3& a, const Mat3& b);
Mat3 operator-(const Mat3& a, const Mat3& b);
Mat3 operator*(double s, const Mat3& a);
Mat3 transpose(const Mat3& a);

double mat3_det(const Mat3& a);
double mat3_trace(const Mat3& a);
/// Adjugate inverse. Throws SingularMatrix when |det| <= 1e-12.
Mat3 mat3_inverse(const Mat3& a);

double mat2_det(const Mat2& a);
Mat2 mat2_inverse(const Mat2& a);
Mat2 operator*(const Mat2& a, const Mat2& b);

/// M A M^T for a 2x3 M and symmetric 3x3 A.
Mat2 project_covariance(const Mat2x3& proj, const Mat3& a);
Vec2 operator*(const Mat2x3& a, const Vec3& v);

double dot(const Vec3& a, const Vec3& b);
Vec3 operator-(const Vec3& a, const Vec3& b);
Vec3 operator+(const Vec3& a, const Vec3& b);

} // namespace rgdet
