#include "rgdet/geom.hpp"

#include "rgdet/error.hpp"

#include <string>

namespace rgdet {

Quaternion quat_normalize(const Quaternion& q) {
    const double n = q.norm();
    if (!(n > kDegenerateQuatNorm)) {
        throw numerical_error("DegenerateQuaternion", "quaternion norm " + std::to_string(n));
    }
    return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Mat3 quat_to_rotmat(const Quaternion& q) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 r;
    r(0, 0) = 1.0 - 2.0 * (y * y + z * z);
    r(0, 1) = 2.0 * (x * y - w * z);
    r(0, 2) = 2.0 * (x * z + w * y);
    r(1, 0) = 2.0 * (x * y + w * z);
    r(1, 1) = 1.0 - 2.0 * (x * x + z * z);
    r(1, 2) = 2.0 * (y * z - w * x);
    r(2, 0) = 2.0 * (x * z - w * y);
    r(2, 1) = 2.0 * (y * z + w * x);
    r(2, 2) = 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Mat3 covariance_from_scale_rot(const Vec3& s, const Mat3& r) {
    for (double si : s) {
        if (!(si > 0.0)) {
            throw numerical_error("NonPositiveScale", "scale " + std::to_string(si));
        }
    }
    // (R S)(R S)^T, summed so the result is symmetric bit-for-bit.
    Mat3 out;
    for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) {
                acc += r(i, k) * s[k] * s[k] * r(j, k);
            }
            out(i, j) = acc;
            out(j, i) = acc;
        }
    }
    return out;
}

Mat3 rot_z(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    Mat3 r;
    r(0, 0) = c;
    r(0, 1) = -s;
    r(1, 0) = s;
    r(1, 1) = c;
    r(2, 2) = 1.0;
    return r;
}

Mat3 operator*(const Mat3& a, const Mat3& b) {
    Mat3 c;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            c(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
    return c;
}

Vec3 operator*(const Mat3& a, const Vec3& v) {
    return {a(0, 0) * v[0] + a(0, 1) * v[1] + a(0, 2) * v[2],
            a(1, 0) * v[0] + a(1, 1) * v[1] + a(1, 2) * v[2],
            a(2, 0) * v[0] + a(2, 1) * v[1] + a(2, 2) * v[2]};
}

Mat3 operator+(const Mat3& a, const Mat3& b) {
    Mat3 c;
    for (int i = 0; i < 9; ++i) c.m[i] = a.m[i] + b.m[i];
    return c;
}

Mat3 operator-(const Mat3& a, const Mat3& b) {
    Mat3 c;
    for (int i = 0; i < 9; ++i) c.m[i] = a.m[i] - b.m[i];
    return c;
}

Mat3 operator*(double s, const Mat3& a) {
    Mat3 c;
    for (int i = 0; i < 9; ++i) c.m[i] = s * a.m[i];
    return c;
}

Mat3 transpose(const Mat3& a) {
    Mat3 t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) t(i, j) = a(j, i);
    return t;
}

double mat3_det(const Mat3& a) {
    return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
           a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
           a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

double mat3_trace(const Mat3& a) { return a(0, 0) + a(1, 1) + a(2, 2); }

Mat3 mat3_inverse(const Mat3& a) {
    const double det = mat3_det(a);
    if (!(std::abs(det) > kSingularDet)) {
        throw numerical_error("SingularMatrix", "3x3 determinant " + std::to_string(det));
    }
    const double inv = 1.0 / det;
    Mat3 b;
    b(0, 0) = (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) * inv;
    b(0, 1) = (a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2)) * inv;
    b(0, 2) = (a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1)) * inv;
    b(1, 0) = (a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2)) * inv;
    b(1, 1) = (a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)) * inv;
    b(1, 2) = (a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2)) * inv;
    b(2, 0) = (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0)) * inv;
    b(2, 1) = (a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1)) * inv;
    b(2, 2) = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)) * inv;
    return b;
}

double mat2_det(const Mat2& a) { return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0); }

Mat2 mat2_inverse(const Mat2& a) {
    const double det = mat2_det(a);
    if (!(std::abs(det) > kSingularDet)) {
        throw numerical_error("SingularMatrix", "2x2 determinant " + std::to_string(det));
    }
    const double inv = 1.0 / det;
    return {{a(1, 1) * inv, -a(0, 1) * inv, -a(1, 0) * inv, a(0, 0) * inv}};
}

Mat2 operator*(const Mat2& a, const Mat2& b) {
    return {{a(0, 0) * b(0, 0) + a(0, 1) * b(1, 0), a(0, 0) * b(0, 1) + a(0, 1) * b(1, 1),
             a(1, 0) * b(0, 0) + a(1, 1) * b(1, 0), a(1, 0) * b(0, 1) + a(1, 1) * b(1, 1)}};
}

Mat2 project_covariance(const Mat2x3& p, const Mat3& a) {
    Mat2 out;
    for (int i = 0; i < 2; ++i) {
        for (int j = i; j < 2; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) acc += p(i, k) * a(k, l) * p(j, l);
            out(i, j) = acc;
            out(j, i) = acc;
        }
    }
    return out;
}

Vec2 operator*(const Mat2x3& a, const Vec3& v) {
    return {a(0, 0) * v[0] + a(0, 1) * v[1] + a(0, 2) * v[2],
            a(1, 0) * v[0] + a(1, 1) * v[1] + a(1, 2) * v[2]};
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }

int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Usage: return 1;
    case ErrorKind::Data: return 2;
    case ErrorKind::Numerical: return 3;
    case ErrorKind::Gate: return 4;
    }
    return 2;
}

} // namespace rgdet
