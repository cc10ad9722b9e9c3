#include "rgdet/error.hpp"
#include "rgdet/geom.hpp"
#include "rgdet/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace rgdet;

namespace {

void expect_mat_near(const Mat3& a, const Mat3& b, double tol) {
    for (int i = 0; i < 9; ++i) EXPECT_NEAR(a.m[i], b.m[i], tol) << "element " << i;
}

Quaternion random_quat(Rng& rng) { return {rng.normal(), rng.normal(), rng.normal(), rng.normal()}; }

Mat3 random_spd(Rng& rng) {
    const Vec3 s{rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0)};
    return covariance_from_scale_rot(s, quat_to_rotmat(quat_normalize(random_quat(rng))));
}

} // namespace

TEST(QuatNormalize, Examples) {
    const auto a = quat_normalize({1, 0, 0, 0});
    EXPECT_EQ(a.w, 1.0);
    const auto b = quat_normalize({2, 0, 0, 0});
    EXPECT_EQ(b.w, 1.0);
    EXPECT_EQ(b.x, 0.0);
    const auto c = quat_normalize({1, 1, 1, 1});
    for (double v : {c.w, c.x, c.y, c.z}) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(QuatNormalize, DegenerateThrows) {
    try {
        quat_normalize({1e-13, 0, 0, 0});
        FAIL() << "expected DegenerateQuaternion";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "DegenerateQuaternion");
        EXPECT_EQ(e.kind(), ErrorKind::Numerical);
    }
}

TEST(QuatNormalize, UnitNormAndScaleInvariance) {
    Rng rng(11);
    for (int t = 0; t < 1000; ++t) {
        const Quaternion q = random_quat(rng);
        const Quaternion n = quat_normalize(q);
        EXPECT_NEAR(n.w * n.w + n.x * n.x + n.y * n.y + n.z * n.z, 1.0, 1e-12);
        const double k = rng.uniform(0.01, 100.0);
        const Mat3 r1 = quat_to_rotmat(n);
        const Mat3 r2 = quat_to_rotmat(quat_normalize({k * q.w, k * q.x, k * q.y, k * q.z}));
        expect_mat_near(r1, r2, 1e-14);
    }
}

TEST(QuatToRotmat, IdentityAndQuarterTurn) {
    expect_mat_near(quat_to_rotmat({1, 0, 0, 0}), Mat3::identity(), 0.0);
    const double h = std::cos(std::numbers::pi / 4);
    const Mat3 r = quat_to_rotmat({h, 0, 0, std::sin(std::numbers::pi / 4)});
    Mat3 expect;
    expect.m = {0, -1, 0, 1, 0, 0, 0, 0, 1};
    expect_mat_near(r, expect, 1e-15);
    // Applied to basis vectors: x -> y, y -> -x.
    const Vec3 ex = r * Vec3{1, 0, 0};
    EXPECT_NEAR(ex[1], 1.0, 1e-15);
    const Vec3 ey = r * Vec3{0, 1, 0};
    EXPECT_NEAR(ey[0], -1.0, 1e-15);
}

TEST(QuatToRotmat, OrthogonalWithUnitDeterminant) {
    Rng rng(3);
    for (int t = 0; t < 500; ++t) {
        const Mat3 r = quat_to_rotmat(quat_normalize(random_quat(rng)));
        expect_mat_near(transpose(r) * r, Mat3::identity(), 1e-14);
        EXPECT_NEAR(mat3_det(r), 1.0, 1e-14);
    }
}

TEST(Covariance, Examples) {
    expect_mat_near(covariance_from_scale_rot({1, 2, 3}, Mat3::identity()), Mat3::diag({1, 4, 9}), 0.0);
    Rng rng(5);
    const Mat3 r = quat_to_rotmat(quat_normalize(random_quat(rng)));
    expect_mat_near(covariance_from_scale_rot({1, 1, 1}, r), Mat3::identity(), 1e-15);
    expect_mat_near(covariance_from_scale_rot({2, 1, 1}, rot_z(std::numbers::pi / 2)), Mat3::diag({1, 4, 1}), 1e-15);
}

TEST(Covariance, NonPositiveScaleThrows) {
    EXPECT_THROW(covariance_from_scale_rot({1, 0, 1}, Mat3::identity()), Error);
    EXPECT_THROW(covariance_from_scale_rot({1, 1, -2}, Mat3::identity()), Error);
}

TEST(Covariance, SymmetricWithScaleSquaredSpectrum) {
    Rng rng(7);
    for (int t = 0; t < 500; ++t) {
        const Vec3 s{rng.uniform(0.1, 4), rng.uniform(0.1, 4), rng.uniform(0.1, 4)};
        const Mat3 c = covariance_from_scale_rot(s, quat_to_rotmat(quat_normalize(random_quat(rng))));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) EXPECT_EQ(c(i, j), c(j, i));
        const double p = s[0] * s[1] * s[2];
        EXPECT_NEAR(mat3_det(c), p * p, 1e-12 * p * p);
        EXPECT_NEAR(mat3_trace(c), s[0] * s[0] + s[1] * s[1] + s[2] * s[2], 1e-12);
    }
}

TEST(Mat3, InverseDetTrace) {
    expect_mat_near(mat3_inverse(Mat3::identity()), Mat3::identity(), 0.0);
    EXPECT_EQ(mat3_det(Mat3::diag({2, 3, 4})), 24.0);
    EXPECT_EQ(mat3_trace(Mat3::diag({2, 3, 4})), 9.0);
    Rng rng(9);
    for (int t = 0; t < 1000; ++t) {
        const Mat3 a = random_spd(rng);
        expect_mat_near(mat3_inverse(a) * a, Mat3::identity(), 1e-10);
        expect_mat_near(mat3_inverse(mat3_inverse(a)), a, 1e-9);
    }
}

TEST(Mat3, SingularThrows) {
    Mat3 a = Mat3::diag({1, 1, 0});
    try {
        mat3_inverse(a);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "SingularMatrix");
    }
}

TEST(Mat2, InverseAndSingular) {
    const Mat2 a{{4, 1, 1, 3}};
    EXPECT_DOUBLE_EQ(mat2_det(a), 11.0);
    const Mat2 p = mat2_inverse(a) * a;
    EXPECT_NEAR(p(0, 0), 1.0, 1e-15);
    EXPECT_NEAR(p(0, 1), 0.0, 1e-15);
    EXPECT_NEAR(p(1, 1), 1.0, 1e-15);
    EXPECT_THROW(mat2_inverse(Mat2{{1, 2, 2, 4}}), Error);
}

TEST(Rng, ReferenceTrace) {
    // splitmix64-seeded xoshiro256**, seed 0: first outputs from an
    // independent implementation.
    Rng rng(0);
    EXPECT_EQ(rng.next_u64(), 11091344671253066420ULL);
    EXPECT_EQ(rng.next_u64(), 13793997310169335082ULL);
}
