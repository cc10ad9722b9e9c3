#include "rgdet/box_loss.hpp"

#include "rgdet/error.hpp"

#include <cmath>
#include <charconv>
#include <fstream>
#include <sstream>

namespace rgdet {

namespace {

Box3D sanitize(const Box3D& b, bool strict) {
    Box3D s = b;
    for (double* d : {&s.l, &s.w, &s.h}) {
        if (!std::isfinite(*d)) throw numerical_error("DegenerateBox", "non-finite box dimension");
        if (*d < kBoxSizeFloor) {
            if (strict) throw numerical_error("DegenerateBox", "box dimension " + std::to_string(*d) + " below floor");
            *d = kBoxSizeFloor;
        }
    }
    if (!std::isfinite(s.theta)) throw numerical_error("DegenerateBox", "non-finite yaw");
    return s;
}

} // namespace

GaussianDistribution3D box_to_gaussian(const Box3D& box, double a, bool strict) {
    if (!(a > 0.0)) throw usage_error("InvalidOption", "scaling hyperparameter a must be > 0");
    const Box3D b = sanitize(box, strict);
    GaussianDistribution3D g;
    g.mu = {b.x, b.y, b.z};
    g.sigma = covariance_from_scale_rot({b.l / (2.0 * a), b.w / (2.0 * a), b.h / (2.0 * a)}, rot_z(b.theta));
    g.log_det = 2.0 * (std::log(b.l) + std::log(b.w) + std::log(b.h) - 3.0 * std::log(2.0 * a));
    return g;
}

KlTerms kl_divergence(const GaussianDistribution3D& pred, const GaussianDistribution3D& target) {
    Mat3 inv;
    try {
        inv = mat3_inverse(target.sigma);
    } catch (const Error&) {
        throw numerical_error("SingularCovariance", "target covariance is singular");
    }
    auto log_det = [](const GaussianDistribution3D& g) {
        if (g.log_det) return *g.log_det;
        const double det = mat3_det(g.sigma);
        if (!(det > 0.0)) throw numerical_error("SingularCovariance", "covariance determinant is not positive");
        return std::log(det);
    };
    const double ld_target = log_det(target);
    const double ld_pred = log_det(pred);

    const Vec3 d = pred.mu - target.mu;
    KlTerms t;
    t.mahalanobis = dot(d, inv * d);
    const double excess = mat3_trace(inv * (pred.sigma - target.sigma));
    t.trace = 3.0 + excess;
    t.logdet = ld_target - ld_pred;
    t.total = 0.5 * (t.mahalanobis + excess + t.logdet);
    return t;
}

double BglConfig::a_for(const std::string& cls) const {
    auto it = a_per_class.find(cls);
    return it == a_per_class.end() ? default_a : it->second;
}

void BglConfig::validate() const {
    if (!(default_a > 0.0)) throw usage_error("InvalidOption", "default a must be > 0");
    for (const auto& [cls, a] : a_per_class)
        if (!(a > 0.0)) throw usage_error("InvalidOption", "a for class '" + cls + "' must be > 0");
    if (!(lambda >= 0.0)) throw usage_error("InvalidOption", "lambda must be >= 0");
}

std::vector<KlTerms> bgl_terms(const std::vector<Box3D>& pred, const std::vector<Box3D>& gt,
                               const std::vector<std::string>& classes, const BglConfig& cfg) {
    cfg.validate();
    if (gt.empty()) throw data_error("EmptyBatch", "no ground-truth boxes");
    if (pred.size() != gt.size() || (!classes.empty() && classes.size() != gt.size())) {
        throw data_error("LengthMismatch", "prediction, ground-truth and class lists must align");
    }
    std::vector<KlTerms> out(gt.size());
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const double a = cfg.a_for(classes.empty() ? std::string{} : classes[i]);
        out[i] = kl_divergence(box_to_gaussian(pred[i], a), box_to_gaussian(gt[i], a));
    }
    return out;
}

double pairwise_sum(const double* v, std::size_t n) {
    if (n == 0) return 0.0;
    if (n == 1) return v[0];
    const std::size_t half = n / 2;
    return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

double bgl(const std::vector<Box3D>& pred, const std::vector<Box3D>& gt, const std::vector<std::string>& classes,
           const BglConfig& cfg) {
    const auto terms = bgl_terms(pred, gt, classes, cfg);
    std::vector<double> totals(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) totals[i] = terms[i].total;
    return pairwise_sum(totals.data(), totals.size()) / static_cast<double>(totals.size());
}

std::array<double, 7> bgl_gradient(const Box3D& pred, const Box3D& gt, double a) {
    const GaussianDistribution3D g_hat = box_to_gaussian(pred, a);
    const GaussianDistribution3D g = box_to_gaussian(gt, a);
    Mat3 inv;
    try {
        inv = mat3_inverse(g.sigma);
    } catch (const Error&) {
        throw numerical_error("SingularCovariance", "target covariance is singular");
    }

    std::array<double, 7> grad{};
    // Mahalanobis: d/dmu_hat of 0.5 d^T S^-1 d = S^-1 d.
    const Vec3 d = g_hat.mu - g.mu;
    const Vec3 gm = inv * d;
    grad[0] = gm[0];
    grad[1] = gm[1];
    grad[2] = gm[2];

    // Covariance: dL/dSigma_hat = 0.5 (S^-1 - Sigma_hat^-1) =: G.
    // Sigma_hat = R D R^T with D = diag(l^2, w^2, h^2) / (4 a^2), so in the box
    // frame G' = R^T G R and dL/dl = G'_00 * l / (2 a^2), etc. The Sigma_hat^-1
    // part of G' is D^-1, known in closed form.
    const Mat3 rot = rot_z(pred.theta);
    const Mat3 g_box = transpose(rot) * inv * rot;
    const double four_a2 = 4.0 * a * a;
    const std::array<double, 3> dims{pred.l, pred.w, pred.h};
    std::array<double, 3> diag_d{};
    for (int k = 0; k < 3; ++k) {
        diag_d[k] = dims[k] * dims[k] / four_a2;
        // 0.5 (g_box_kk - 1 / D_k) * dD_k/ddim with dD_k/ddim = 2 dim / (4 a^2)
        grad[3 + k] = 0.5 * g_box(k, k) * 2.0 * dims[k] / four_a2 - 1.0 / dims[k];
    }

    // Yaw: only tr(S^-1 Sigma_hat) depends on theta. With dR/dtheta = R K,
    // K = [[0,-1,0],[1,0,0],[0,0,0]], d tr(S^-1 R D R^T) = tr(g_box (K D - D K))
    // = 2 g_box_01 (D_0 - D_1); the 0.5 prefactor cancels the 2.
    grad[6] = g_box(0, 1) * (diag_d[0] - diag_d[1]);
    return grad;
}

std::array<double, 7> bgl_gradient_fd(const Box3D& pred, const Box3D& gt, double a, double step) {
    const GaussianDistribution3D g = box_to_gaussian(gt, a);
    auto loss = [&](const Box3D& b) { return kl_divergence(box_to_gaussian(b, a), g).total; };
    std::array<double, 7> grad{};
    for (int k = 0; k < 7; ++k) {
        Box3D plus = pred, minus = pred;
        double* pp[] = {&plus.x, &plus.y, &plus.z, &plus.l, &plus.w, &plus.h, &plus.theta};
        double* pm[] = {&minus.x, &minus.y, &minus.z, &minus.l, &minus.w, &minus.h, &minus.theta};
        *pp[k] += step;
        *pm[k] -= step;
        grad[k] = (loss(plus) - loss(minus)) / (2.0 * step);
    }
    return grad;
}

double gradient_rel_error(const std::array<double, 7>& analytic, const std::array<double, 7>& fd) {
    double worst = 0.0;
    for (int k = 0; k < 7; ++k)
        worst = std::max(worst, std::abs(analytic[k] - fd[k]) / std::max(1.0, std::abs(analytic[k])));
    return worst;
}

BoxList read_boxes(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw data_error("IoError", "cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw data_error("FormatError", "missing box header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool has_class = false;
    if (line == "x,y,z,l,w,h,theta,class") {
        has_class = true;
    } else if (line != "x,y,z,l,w,h,theta") {
        throw data_error("FormatError", "box header must be 'x,y,z,l,w,h,theta[,class]'");
    }

    BoxList out;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) cols.push_back(tok);
        if (!line.empty() && line.back() == ',') cols.emplace_back();
        const std::size_t expect = has_class ? 8 : 7;
        if (cols.size() != expect) {
            throw data_error("FormatError", "line " + std::to_string(line_no) + ": expected " +
                                                std::to_string(expect) + " columns");
        }
        std::array<double, 7> v{};
        for (int k = 0; k < 7; ++k) {
            const std::string& tok = cols[k];
            const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v[k]);
            if (tok.empty() || res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
                throw data_error("FormatError", "line " + std::to_string(line_no) + ": bad number '" + tok + "'");
            }
        }
        out.boxes.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6]});
        out.classes.push_back(has_class ? cols[7] : std::string{});
    }
    return out;
}

void write_boxes(const BoxList& list, const std::filesystem::path& path) {
    const bool has_class = !list.classes.empty();
    std::ofstream os(path);
    if (!os) throw data_error("IoError", "cannot write " + path.string());
    os << (has_class ? "x,y,z,l,w,h,theta,class\n" : "x,y,z,l,w,h,theta\n");
    char buf[40];
    for (std::size_t i = 0; i < list.boxes.size(); ++i) {
        const Box3D& b = list.boxes[i];
        const double v[] = {b.x, b.y, b.z, b.l, b.w, b.h, b.theta};
        for (int k = 0; k < 7; ++k) {
            const auto res = std::to_chars(buf, buf + sizeof(buf), v[k], std::chars_format::general, 17);
            os << (k ? "," : "") << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        if (has_class) os << ',' << list.classes[i];
        os << '\n';
    }
    if (!os) throw data_error("IoError", "cannot write " + path.string());
}

} // namespace rgdet
