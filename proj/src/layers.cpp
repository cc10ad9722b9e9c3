#include "rgdet/layers.hpp"

#include "rgdet/parallel.hpp"

#include "rgdet/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace rgdet {

LinearLayer::LinearLayer(std::size_t in, std::size_t out, bool bias)
    : weight_(out, in), bias_(out, 0.0), has_bias_(bias) {
    if (in == 0 || out == 0) throw data_error("ShapeMismatch", "linear layer with zero dimension");
}

LinearLayer::LinearLayer(Matrix weight, std::vector<double> bias, bool has_bias)
    : weight_(std::move(weight)), bias_(std::move(bias)), has_bias_(has_bias) {
    if (weight_.data.size() != weight_.rows * weight_.cols) {
        throw data_error("ShapeMismatch", "weight storage does not match its shape");
    }
    if (bias_.empty()) bias_.assign(weight_.rows, 0.0);
    if (bias_.size() != weight_.rows) {
        throw data_error("ShapeMismatch", "bias length " + std::to_string(bias_.size()) +
                                              " != out dim " + std::to_string(weight_.rows));
    }
}

void LinearLayer::apply(std::span<const double> x, std::span<double> y) const {
    const std::size_t in = weight_.cols, out = weight_.rows;
    for (std::size_t o = 0; o < out; ++o) {
        const double* w = weight_.data.data() + o * in;
        double acc = has_bias_ ? bias_[o] : 0.0;
        for (std::size_t k = 0; k < in; ++k) acc += w[k] * x[k];
        y[o] = acc;
    }
}

Matrix LinearLayer::apply_rows(const Matrix& x) const {
    if (x.cols != in_dim()) {
        throw data_error("ShapeMismatch", "input has " + std::to_string(x.cols) + " columns, layer expects " +
                                              std::to_string(in_dim()));
    }
    const std::size_t in = weight_.cols, out = weight_.rows;
    // Output index innermost so the loop vectorises; per output the terms
    // are still added bias first, then k ascending, as in apply().
    std::vector<double> wt(in * out);
    for (std::size_t o = 0; o < out; ++o)
        for (std::size_t k = 0; k < in; ++k) wt[k * out + o] = weight_.data[o * in + k];
    Matrix y(x.rows, out);
    parallel_for(x.rows, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            double* yr = y.data.data() + r * out;
            const double* xr = x.data.data() + r * in;
            if (has_bias_)
                std::copy(bias_.begin(), bias_.end(), yr);
            for (std::size_t k = 0; k < in; ++k) {
                const double xk = xr[k];
                const double* w = wt.data() + k * out;
                for (std::size_t o = 0; o < out; ++o) yr[o] += w[o] * xk;
            }
        }
    });
    return y;
}

void LayerNorm::apply(std::span<const double> x, std::span<double> y) const {
    const auto n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) * inv * gamma[i] + beta[i];
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void AttentionBlock::validate() const {
    const std::size_t c = model_dim();
    auto fail = [](const std::string& what) { throw data_error("ShapeMismatch", "attention block: " + what); };
    if (heads == 0 || c % heads != 0) fail("model dim not divisible by head count");
    if (ln1.gamma.size() != c || ln1.beta.size() != c) fail("ln1 size");
    if (ln2.gamma.size() != c || ln2.beta.size() != c) fail("ln2 size");
    if (qkv.in_dim() != c || qkv.out_dim() != 3 * c) fail("qkv shape");
    if (out.in_dim() != c || out.out_dim() != c) fail("output projection shape");
    if (ffn_in.in_dim() != c || ffn_out.out_dim() != c || ffn_out.in_dim() != ffn_in.out_dim()) fail("ffn shape");
}

} // namespace rgdet
