#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rgdet {

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

/// y = W x + b, W is out x in.
class LinearLayer {
public:
    LinearLayer() = default;
    /// Zero-initialised. Throws ShapeMismatch on a zero dimension.
    LinearLayer(std::size_t in, std::size_t out, bool bias = true);
    LinearLayer(Matrix weight, std::vector<double> bias, bool has_bias);

    std::size_t in_dim() const { return weight_.cols; }
    std::size_t out_dim() const { return weight_.rows; }
    bool has_bias() const { return has_bias_; }

    Matrix& weight() { return weight_; }
    const Matrix& weight() const { return weight_; }
    std::vector<double>& bias() { return bias_; }
    const std::vector<double>& bias() const { return bias_; }

    /// Writes W x + b into y. Sizes must match in_dim / out_dim.
    void apply(std::span<const double> x, std::span<double> y) const;
    /// Row-wise apply over an rows x in_dim matrix.
    Matrix apply_rows(const Matrix& x) const;

    bool operator==(const LinearLayer&) const = default;

private:
    Matrix weight_;
    std::vector<double> bias_;
    bool has_bias_ = true;
};

struct LayerNorm {
    std::vector<double> gamma;
    std::vector<double> beta;
    double eps = 1e-5;

    /// (x - mean) / sqrt(var + eps) * gamma + beta, biased variance.
    void apply(std::span<const double> x, std::span<double> y) const;

    bool operator==(const LayerNorm&) const = default;
};

/// Exact GELU: 0.5 x (1 + erf(x / sqrt 2)).
double gelu(double x);
/// log(1 + e^x), overflow-safe.
double softplus(double x);

/// Single pre-norm attention block over a point set:
///   f1 = input(f)
///   q, k, v = qkv(ln1(f1))            joint C -> 3C projection
///   f2 = out(MultiHeadAttn(q, k, v)) + f1
///   y  = ffn_out(gelu(ffn_in(ln2(f2)))) + f2
struct AttentionBlock {
    LinearLayer input;     // c_raw -> C
    LayerNorm ln1;
    LinearLayer qkv;       // C -> 3C, rows [q | k | v]
    LinearLayer out;       // C -> C
    LayerNorm ln2;
    LinearLayer ffn_in;    // C -> hidden
    LinearLayer ffn_out;   // hidden -> C
    std::size_t heads = 1;

    std::size_t in_dim() const { return input.in_dim(); }
    std::size_t model_dim() const { return input.out_dim(); }
    /// Throws ShapeMismatch when the layer shapes do not chain.
    void validate() const;

    bool operator==(const AttentionBlock&) const = default;
};

} // namespace rgdet
