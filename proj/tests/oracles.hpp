#pragma once

// Test-only reference implementations. Nothing here calls into the code
// paths it is used to check.

#include "rgdet/box_loss.hpp"
#include "rgdet/pointcloud.hpp"
#include "rgdet/rng.hpp"

#include <cmath>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using rgdet::operator-;
using rgdet::operator*;

/// Every (i, j) with ||p_i - p_j|| < r, by double loop.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> all_pairs(const rgdet::PointCloud& c, double r) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    for (std::uint32_t i = 0; i < c.size(); ++i)
        for (std::uint32_t j = 0; j < c.size(); ++j) {
            const auto& a = c[i].position;
            const auto& b = c[j].position;
            const double d = std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                                       (a[2] - b[2]) * (a[2] - b[2]));
            if (d < r) out.emplace_back(i, j);
        }
    return out;
}

/// Uniformly scattered cloud with random features; positions inside a cube.
inline rgdet::PointCloud random_cloud(std::uint64_t seed, std::size_t n, std::size_t c_raw, double extent) {
    rgdet::Rng rng(seed);
    rgdet::PointCloud cloud(c_raw);
    for (std::size_t i = 0; i < n; ++i) {
        rgdet::RadarPoint p;
        for (auto& v : p.position) v = rng.uniform(0.0, extent);
        p.raw_features.resize(c_raw);
        for (auto& f : p.raw_features) f = rng.normal();
        cloud.push_back(std::move(p));
    }
    return cloud;
}

/// Monte-Carlo estimate of KL(p || q) = E_p[log p(x) - log q(x)] for 3D Gaussians.
inline double monte_carlo_kl(const rgdet::Mat3& sp, const rgdet::Vec3& mp, const rgdet::Mat3& sq,
                             const rgdet::Vec3& mq, std::size_t samples, std::uint64_t seed) {
    // Cholesky of sp for sampling; log densities via explicit quadratic forms.
    double l[3][3] = {};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j <= i; ++j) {
            double s = sp(i, j);
            for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
            l[i][j] = i == j ? std::sqrt(s) : s / l[j][j];
        }
    auto logpdf = [](const rgdet::Mat3& s, const rgdet::Vec3& m, const rgdet::Vec3& x) {
        const rgdet::Mat3 inv = rgdet::mat3_inverse(s);
        const rgdet::Vec3 d = x - m;
        return -0.5 * rgdet::dot(d, inv * d) - 0.5 * std::log(rgdet::mat3_det(s)) - 1.5 * std::log(2.0 * M_PI);
    };
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> n01;
    double acc = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const double z[3] = {n01(gen), n01(gen), n01(gen)};
        rgdet::Vec3 x = mp;
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k <= i; ++k) x[i] += l[i][k] * z[k];
        acc += logpdf(sp, mp, x) - logpdf(sq, mq, x);
    }
    return acc / static_cast<double>(samples);
}

} // namespace oracle
