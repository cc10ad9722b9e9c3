#pragma once

#include "rgdet/geom.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rgdet {

/// Center (m), dimensions along heading / across / vertical (m), yaw (rad).
struct Box3D {
    double x = 0.0, y = 0.0, z = 0.0;
    double l = 1.0, w = 1.0, h = 1.0;
    double theta = 0.0;

    bool operator==(const Box3D&) const = default;
};

inline constexpr double kBoxSizeFloor = 1e-3;

struct GaussianDistribution3D {
    Vec3 mu{};
    Mat3 sigma{};
    /// log|sigma| when known in closed form; computed from sigma otherwise.
    std::optional<double> log_det;
};

/// mu = center, sigma = R(theta) diag((l/2a)^2, (w/2a)^2, (h/2a)^2) R(theta)^T.
/// Dimensions below kBoxSizeFloor are clamped, or rejected with DegenerateBox
/// when strict is set.
GaussianDistribution3D box_to_gaussian(const Box3D& b, double a, bool strict = false);

struct KlTerms {
    double mahalanobis = 0.0;  // (mu_hat - mu)^T sigma^-1 (mu_hat - mu)
    double trace = 0.0;        // tr(sigma^-1 sigma_hat)
    double logdet = 0.0;       // log(|sigma| / |sigma_hat|)
    double total = 0.0;        // 0.5 (mahalanobis + trace + logdet - 3)
};

/// KL(pred || target). The trace term is evaluated as 3 + tr(sigma^-1 (sigma_hat - sigma))
/// so identical inputs give exactly 0. Throws SingularCovariance.
KlTerms kl_divergence(const GaussianDistribution3D& pred, const GaussianDistribution3D& target);

struct BglConfig {
    std::map<std::string, double> a_per_class{{"car", 3.0}, {"truck", 3.0}, {"pedestrian", 1.0}, {"cyclist", 1.0}};
    double default_a = 1.0;
    double lambda = 1.0;

    /// Scaling for a class label; unknown or empty labels use default_a.
    double a_for(const std::string& cls) const;
    void validate() const;
    bool operator==(const BglConfig&) const = default;
};

/// Per-pair KL terms for index-aligned matches; a is resolved per class.
/// Throws EmptyBatch, LengthMismatch.
std::vector<KlTerms> bgl_terms(const std::vector<Box3D>& pred, const std::vector<Box3D>& gt,
                               const std::vector<std::string>& classes, const BglConfig& cfg);

/// Mean of per-pair totals, summed by a fixed pairwise tree.
double bgl(const std::vector<Box3D>& pred, const std::vector<Box3D>& gt, const std::vector<std::string>& classes,
           const BglConfig& cfg);

/// Pairwise (recursive halving) sum; order depends only on the length.
double pairwise_sum(const double* v, std::size_t n);

/// d KL / d (x, y, z, l, w, h, theta) of the predicted box.
std::array<double, 7> bgl_gradient(const Box3D& pred, const Box3D& gt, double a);

/// Central differences of the same loss, one parameter at a time.
std::array<double, 7> bgl_gradient_fd(const Box3D& pred, const Box3D& gt, double a, double step = 1e-5);

/// max_k |analytic_k - fd_k| / max(1, |analytic_k|)
double gradient_rel_error(const std::array<double, 7>& analytic, const std::array<double, 7>& fd);

inline double combined_reg_loss(double l_ori, double l_bgl, double lambda) { return l_ori + lambda * l_bgl; }

struct BoxList {
    std::vector<Box3D> boxes;
    std::vector<std::string> classes;  // empty strings when the file has no class column
};

/// CSV with header "x,y,z,l,w,h,theta" or "x,y,z,l,w,h,theta,class".
BoxList read_boxes(const std::filesystem::path& path);
void write_boxes(const BoxList& boxes, const std::filesystem::path& path);

} // namespace rgdet
