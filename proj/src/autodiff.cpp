#include "galattice/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace galattice::autodiff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

CMapMat as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
    return CMapMat(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MapMat as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
    return MapMat(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

std::size_t rows_of(const Shape& s) {
    if (s.size() <= 1) return 1;
    return shape_size(s) / s.back();
}
std::size_t cols_of(const Shape& s) { return s.empty() ? 1 : s.back(); }

struct AxisSplit {
    std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
    AxisSplit a;
    for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
    a.n = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
    return a;
}

// ---------------------------------------------------------------- dense

class DenseOp final : public Op {
public:
    explicit DenseOp(bool bias) : bias_(bias) {}
    std::string kind() const override { return "dense"; }
    Shape output_shape(std::span<const Shape> in) const override {
        const Shape& x = in[0];
        const Shape& w = in[1];
        if (x.empty() || w.size() != 2 || x.back() != w[0])
            throw ShapeError("dense: input " + shape_string(x) + " incompatible with weight " + shape_string(w));
        if (bias_ && shape_size(in[2]) != w[1])
            throw ShapeError("dense: bias " + shape_string(in[2]) + " does not match output width " +
                             std::to_string(w[1]));
        Shape out = x;
        out.back() = w[1];
        return out;
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const Tensor& x = *in[0];
        const Tensor& w = *in[1];
        const std::size_t n = x.rows(), din = w.dim(0), dout = w.dim(1);
        auto y = as_matrix(out, n, dout);
        y.noalias() = as_matrix(x, n, din) * as_matrix(w, din, dout);
        if (bias_) y.rowwise() += as_matrix(*in[2], 1, dout).row(0);
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        const Tensor& x = *in[0];
        const Tensor& w = *in[1];
        const std::size_t n = x.rows(), din = w.dim(0), dout = w.dim(1);
        auto gy = as_matrix(gout, n, dout);
        if (gin[0]) as_matrix(*gin[0], n, din).noalias() += gy * as_matrix(w, din, dout).transpose();
        if (gin[1]) as_matrix(*gin[1], din, dout).noalias() += as_matrix(x, n, din).transpose() * gy;
        if (bias_ && gin[2]) as_matrix(*gin[2], 1, dout) += gy.colwise().sum();
    }

private:
    bool bias_;
};

// ---------------------------------------------------------------- unary

class ReluOp final : public Op {
public:
    std::string kind() const override { return "relu"; }
    Shape output_shape(std::span<const Shape> in) const override { return in[0]; }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const double* x = in[0]->data();
        double* y = out.data();
        for (std::size_t i = 0; i < out.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        if (!gin[0]) return;
        const double* x = in[0]->data();
        double* g = gin[0]->data();
        for (std::size_t i = 0; i < gout.size(); ++i)
            if (x[i] > 0.0) g[i] += gout[i];
    }
};

class ExpOp final : public Op {
public:
    std::string kind() const override { return "exp"; }
    Shape output_shape(std::span<const Shape> in) const override { return in[0]; }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp((*in[0])[i]);
    }
    void backward(std::span<const Tensor* const>, const Tensor& out, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        if (!gin[0]) return;
        for (std::size_t i = 0; i < out.size(); ++i) (*gin[0])[i] += gout[i] * out[i];
    }
};

class ScaleOp final : public Op {
public:
    explicit ScaleOp(double f) : f_(f) {}
    std::string kind() const override { return "scale"; }
    Shape output_shape(std::span<const Shape> in) const override { return in[0]; }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = f_ * (*in[0])[i];
    }
    void backward(std::span<const Tensor* const>, const Tensor&, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        if (!gin[0]) return;
        for (std::size_t i = 0; i < gout.size(); ++i) (*gin[0])[i] += f_ * gout[i];
    }

private:
    double f_;
};

// ---------------------------------------------------------------- softmax

class SoftmaxOp final : public Op {
public:
    explicit SoftmaxOp(std::size_t axis) : axis_(axis) {}
    std::string kind() const override { return "softmax"; }
    Shape output_shape(std::span<const Shape> in) const override {
        if (axis_ >= in[0].size())
            throw ShapeError("softmax: axis " + std::to_string(axis_) + " out of range for " + shape_string(in[0]));
        return in[0];
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const AxisSplit a = split_axis(in[0]->shape(), axis_);
        const double* x = in[0]->data();
        double* y = out.data();
        for (std::size_t o = 0; o < a.outer; ++o)
            for (std::size_t i = 0; i < a.inner; ++i) {
                const std::size_t base = o * a.n * a.inner + i;
                double m = -std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < a.n; ++k) m = std::max(m, x[base + k * a.inner]);
                double s = 0.0;
                for (std::size_t k = 0; k < a.n; ++k) {
                    const double e = std::exp(x[base + k * a.inner] - m);
                    y[base + k * a.inner] = e;
                    s += e;
                }
                for (std::size_t k = 0; k < a.n; ++k) y[base + k * a.inner] /= s;
            }
    }
    void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        if (!gin[0]) return;
        const AxisSplit a = split_axis(in[0]->shape(), axis_);
        const double* y = out.data();
        const double* gy = gout.data();
        double* gx = gin[0]->data();
        for (std::size_t o = 0; o < a.outer; ++o)
            for (std::size_t i = 0; i < a.inner; ++i) {
                const std::size_t base = o * a.n * a.inner + i;
                double dot = 0.0;
                for (std::size_t k = 0; k < a.n; ++k) dot += gy[base + k * a.inner] * y[base + k * a.inner];
                for (std::size_t k = 0; k < a.n; ++k) {
                    const std::size_t idx = base + k * a.inner;
                    gx[idx] += y[idx] * (gy[idx] - dot);
                }
            }
    }

private:
    std::size_t axis_;
};

// ---------------------------------------------------------------- layer norm

class LayerNormOp final : public Op {
public:
    explicit LayerNormOp(double eps) : eps_(eps) {}
    std::string kind() const override { return "layer_norm"; }
    Shape output_shape(std::span<const Shape> in) const override {
        const std::size_t d = cols_of(in[0]);
        if (shape_size(in[1]) != d || shape_size(in[2]) != d)
            throw ShapeError("layer_norm: gain/bias " + shape_string(in[1]) + "/" + shape_string(in[2]) +
                             " do not match feature width " + std::to_string(d));
        return in[0];
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const Tensor& x = *in[0];
        const std::size_t n = x.rows(), d = x.cols();
        xhat_.resize(x.size());
        inv_std_.resize(n);
        for (std::size_t r = 0; r < n; ++r) {
            const double* xr = x.data() + r * d;
            double m = 0.0;
            for (std::size_t c = 0; c < d; ++c) m += xr[c];
            m /= static_cast<double>(d);
            double v = 0.0;
            for (std::size_t c = 0; c < d; ++c) v += (xr[c] - m) * (xr[c] - m);
            v /= static_cast<double>(d);
            const double is = 1.0 / std::sqrt(v + eps_);
            inv_std_[r] = is;
            for (std::size_t c = 0; c < d; ++c) {
                const double h = (xr[c] - m) * is;
                xhat_[r * d + c] = h;
                out[r * d + c] = (*in[1])[c] * h + (*in[2])[c];
            }
        }
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        const Tensor& x = *in[0];
        const std::size_t n = x.rows(), d = x.cols();
        const Tensor& gain = *in[1];
        for (std::size_t r = 0; r < n; ++r) {
            const double* gy = gout.data() + r * d;
            const double* h = xhat_.data() + r * d;
            if (gin[1])
                for (std::size_t c = 0; c < d; ++c) (*gin[1])[c] += gy[c] * h[c];
            if (gin[2])
                for (std::size_t c = 0; c < d; ++c) (*gin[2])[c] += gy[c];
            if (gin[0]) {
                double mg = 0.0, mgh = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    const double gh = gy[c] * gain[c];
                    mg += gh;
                    mgh += gh * h[c];
                }
                mg /= static_cast<double>(d);
                mgh /= static_cast<double>(d);
                double* gx = gin[0]->data() + r * d;
                for (std::size_t c = 0; c < d; ++c) gx[c] += inv_std_[r] * (gy[c] * gain[c] - mg - h[c] * mgh);
            }
        }
    }

private:
    double eps_;
    std::vector<double> xhat_;
    std::vector<double> inv_std_;
};

// ---------------------------------------------------------------- concat

class ConcatOp final : public Op {
public:
    explicit ConcatOp(std::size_t axis) : axis_(axis) {}
    std::string kind() const override { return "concat"; }
    Shape output_shape(std::span<const Shape> in) const override {
        if (in.empty()) throw ShapeError("concat: no inputs");
        Shape out = in[0];
        if (axis_ >= out.size()) throw ShapeError("concat: axis out of range for " + shape_string(out));
        out[axis_] = 0;
        for (const Shape& s : in) {
            if (s.size() != in[0].size()) throw ShapeError("concat: rank mismatch " + shape_string(s));
            for (std::size_t i = 0; i < s.size(); ++i)
                if (i != axis_ && s[i] != in[0][i])
                    throw ShapeError("concat: " + shape_string(s) + " incompatible with " + shape_string(in[0]));
            out[axis_] += s[axis_];
        }
        return out;
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const AxisSplit a = split_axis(out.shape(), axis_);
        const std::size_t out_chunk = a.n * a.inner;
        std::size_t offset = 0;
        for (const Tensor* t : in) {
            const std::size_t chunk = t->dim(axis_) * a.inner;
            for (std::size_t o = 0; o < a.outer; ++o)
                std::copy_n(t->data() + o * chunk, chunk, out.data() + o * out_chunk + offset);
            offset += chunk;
        }
    }
    void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        const AxisSplit a = split_axis(out.shape(), axis_);
        const std::size_t out_chunk = a.n * a.inner;
        std::size_t offset = 0;
        for (std::size_t i = 0; i < in.size(); ++i) {
            const std::size_t chunk = in[i]->dim(axis_) * a.inner;
            if (gin[i])
                for (std::size_t o = 0; o < a.outer; ++o) {
                    const double* src = gout.data() + o * out_chunk + offset;
                    double* dst = gin[i]->data() + o * chunk;
                    for (std::size_t c = 0; c < chunk; ++c) dst[c] += src[c];
                }
            offset += chunk;
        }
    }

private:
    std::size_t axis_;
};

// ---------------------------------------------------------------- binary

enum class Broadcast { Same, Scalar, Column, Row };

Broadcast broadcast_mode(const Shape& a, const Shape& b, const char* what) {
    if (a == b) return Broadcast::Same;
    if (shape_size(b) == 1) return Broadcast::Scalar;
    if (a.size() >= 2 && b.size() == 2 && b[1] == 1 && b[0] == rows_of(a)) return Broadcast::Column;
    if (shape_size(b) == cols_of(a) && (b.size() == 1 || (b.size() == 2 && b[0] == 1))) return Broadcast::Row;
    throw ShapeError(std::string(what) + ": cannot broadcast " + shape_string(b) + " against " + shape_string(a));
}

class BinaryOp final : public Op {
public:
    explicit BinaryOp(bool multiply) : multiply_(multiply) {}
    std::string kind() const override { return multiply_ ? "mul" : "add"; }
    Shape output_shape(std::span<const Shape> in) const override {
        mode_ = broadcast_mode(in[0], in[1], multiply_ ? "mul" : "add");
        return in[0];
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const Tensor& a = *in[0];
        const Tensor& b = *in[1];
        const std::size_t n = a.size(), cols = a.cols();
        for (std::size_t i = 0; i < n; ++i) {
            const double bv = b[b_index(i, cols)];
            out[i] = multiply_ ? a[i] * bv : a[i] + bv;
        }
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        const Tensor& a = *in[0];
        const Tensor& b = *in[1];
        const std::size_t n = a.size(), cols = a.cols();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = b_index(i, cols);
            if (multiply_) {
                if (gin[0]) (*gin[0])[i] += gout[i] * b[j];
                if (gin[1]) (*gin[1])[j] += gout[i] * a[i];
            } else {
                if (gin[0]) (*gin[0])[i] += gout[i];
                if (gin[1]) (*gin[1])[j] += gout[i];
            }
        }
    }

private:
    std::size_t b_index(std::size_t i, std::size_t cols) const {
        switch (mode_) {
            case Broadcast::Same: return i;
            case Broadcast::Scalar: return 0;
            case Broadcast::Column: return i / cols;
            case Broadcast::Row: return i % cols;
        }
        return i;
    }
    bool multiply_;
    mutable Broadcast mode_ = Broadcast::Same;
};

// ---------------------------------------------------------------- reductions

class ReduceOp final : public Op {
public:
    ReduceOp(std::size_t axis, bool mean) : axis_(axis), mean_(mean) {}
    std::string kind() const override { return mean_ ? "mean" : "sum"; }
    Shape output_shape(std::span<const Shape> in) const override {
        if (axis_ >= in[0].size())
            throw ShapeError(kind() + ": axis " + std::to_string(axis_) + " out of range for " + shape_string(in[0]));
        Shape out;
        for (std::size_t i = 0; i < in[0].size(); ++i)
            if (i != axis_) out.push_back(in[0][i]);
        if (out.empty()) out.push_back(1);
        return out;
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const AxisSplit a = split_axis(in[0]->shape(), axis_);
        const double f = mean_ ? 1.0 / static_cast<double>(a.n) : 1.0;
        out.fill(0.0);
        const double* x = in[0]->data();
        for (std::size_t o = 0; o < a.outer; ++o)
            for (std::size_t k = 0; k < a.n; ++k) {
                const double* src = x + (o * a.n + k) * a.inner;
                double* dst = out.data() + o * a.inner;
                for (std::size_t i = 0; i < a.inner; ++i) dst[i] += src[i];
            }
        if (mean_)
            for (double& v : out.storage()) v *= f;
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        if (!gin[0]) return;
        const AxisSplit a = split_axis(in[0]->shape(), axis_);
        const double f = mean_ ? 1.0 / static_cast<double>(a.n) : 1.0;
        for (std::size_t o = 0; o < a.outer; ++o)
            for (std::size_t k = 0; k < a.n; ++k) {
                double* dst = gin[0]->data() + (o * a.n + k) * a.inner;
                const double* src = gout.data() + o * a.inner;
                for (std::size_t i = 0; i < a.inner; ++i) dst[i] += f * src[i];
            }
    }

private:
    std::size_t axis_;
    bool mean_;
};

// ---------------------------------------------------------------- views

class ReshapeOp final : public Op {
public:
    explicit ReshapeOp(Shape s) : shape_(std::move(s)) {}
    std::string kind() const override { return "reshape"; }
    Shape output_shape(std::span<const Shape> in) const override {
        if (shape_size(in[0]) != shape_size(shape_))
            throw ShapeError("reshape: cannot view " + shape_string(in[0]) + " as " + shape_string(shape_));
        return shape_;
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        std::copy_n(in[0]->data(), out.size(), out.data());
    }
    void backward(std::span<const Tensor* const>, const Tensor&, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        if (!gin[0]) return;
        for (std::size_t i = 0; i < gout.size(); ++i) (*gin[0])[i] += gout[i];
    }

private:
    Shape shape_;
};

class GatherRowsOp final : public Op {
public:
    explicit GatherRowsOp(std::vector<std::size_t> rows) : rows_(std::move(rows)) {}
    std::string kind() const override { return "gather_rows"; }
    Shape output_shape(std::span<const Shape> in) const override {
        const std::size_t n = rows_of(in[0]);
        for (std::size_t r : rows_)
            if (r >= n)
                throw ShapeError("gather_rows: index " + std::to_string(r) + " out of range for " +
                                 shape_string(in[0]));
        return {rows_.size(), cols_of(in[0])};
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const std::size_t d = in[0]->cols();
        for (std::size_t i = 0; i < rows_.size(); ++i)
            std::copy_n(in[0]->data() + rows_[i] * d, d, out.data() + i * d);
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        if (!gin[0]) return;
        const std::size_t d = in[0]->cols();
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            const double* src = gout.data() + i * d;
            double* dst = gin[0]->data() + rows_[i] * d;
            for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
        }
    }

private:
    std::vector<std::size_t> rows_;
};

class SliceColsOp final : public Op {
public:
    SliceColsOp(std::size_t b, std::size_t e) : begin_(b), end_(e) {}
    std::string kind() const override { return "slice_cols"; }
    Shape output_shape(std::span<const Shape> in) const override {
        if (begin_ >= end_ || end_ > cols_of(in[0]))
            throw ShapeError("slice_cols: [" + std::to_string(begin_) + ", " + std::to_string(end_) +
                             ") out of range for " + shape_string(in[0]));
        return {rows_of(in[0]), end_ - begin_};
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const std::size_t d = in[0]->cols(), w = end_ - begin_;
        for (std::size_t r = 0; r < out.rows(); ++r)
            std::copy_n(in[0]->data() + r * d + begin_, w, out.data() + r * w);
    }
    void backward(std::span<const Tensor* const> in, const Tensor& out, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        if (!gin[0]) return;
        const std::size_t d = in[0]->cols(), w = end_ - begin_;
        for (std::size_t r = 0; r < out.rows(); ++r)
            for (std::size_t c = 0; c < w; ++c) (*gin[0])[r * d + begin_ + c] += gout[r * w + c];
    }

private:
    std::size_t begin_, end_;
};

// ---------------------------------------------------------------- losses

class MseOp final : public Op {
public:
    std::string kind() const override { return "mse"; }
    Shape output_shape(std::span<const Shape> in) const override {
        if (shape_size(in[0]) != shape_size(in[1]) || shape_size(in[0]) == 0)
            throw ShapeError("mse: prediction " + shape_string(in[0]) + " vs target " + shape_string(in[1]));
        return {1};
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        double s = 0.0;
        for (std::size_t i = 0; i < in[0]->size(); ++i) {
            const double d = (*in[0])[i] - (*in[1])[i];
            s += d * d;
        }
        out[0] = s / static_cast<double>(in[0]->size());
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        const double f = 2.0 * gout[0] / static_cast<double>(in[0]->size());
        for (std::size_t i = 0; i < in[0]->size(); ++i) {
            const double d = f * ((*in[0])[i] - (*in[1])[i]);
            if (gin[0]) (*gin[0])[i] += d;
            if (gin[1]) (*gin[1])[i] -= d;
        }
    }
};

class CrossEntropyOp final : public Op {
public:
    std::string kind() const override { return "cross_entropy"; }
    Shape output_shape(std::span<const Shape> in) const override {
        if (in[0].empty() || shape_size(in[1]) != rows_of(in[0]) || cols_of(in[0]) < 1)
            throw ShapeError("cross_entropy: logits " + shape_string(in[0]) + " vs labels " + shape_string(in[1]));
        return {1};
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const Tensor& z = *in[0];
        const std::size_t n = z.rows(), c = z.cols();
        probs_.resize(z.size());
        double loss = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double* zr = z.data() + r * c;
            const auto label = checked_label((*in[1])[r], c);
            double m = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < c; ++j) m = std::max(m, zr[j]);
            double s = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                probs_[r * c + j] = std::exp(zr[j] - m);
                s += probs_[r * c + j];
            }
            for (std::size_t j = 0; j < c; ++j) probs_[r * c + j] /= s;
            loss += (m + std::log(s)) - zr[label];
        }
        out[0] = loss / static_cast<double>(n);
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        if (!gin[0]) return;
        const Tensor& z = *in[0];
        const std::size_t n = z.rows(), c = z.cols();
        const double f = gout[0] / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
            const auto label = checked_label((*in[1])[r], c);
            for (std::size_t j = 0; j < c; ++j)
                (*gin[0])[r * c + j] += f * (probs_[r * c + j] - (j == label ? 1.0 : 0.0));
        }
    }

private:
    static std::size_t checked_label(double v, std::size_t classes) {
        if (!(v >= 0.0) || v != std::floor(v) || v >= static_cast<double>(classes))
            throw GraphError("cross_entropy: label " + std::to_string(v) + " is not a class index below " +
                             std::to_string(classes));
        return static_cast<std::size_t>(v);
    }
    std::vector<double> probs_;
};

class KlNormalOp final : public Op {
public:
    std::string kind() const override { return "kl_standard_normal"; }
    Shape output_shape(std::span<const Shape> in) const override {
        if (in[0] != in[1]) throw ShapeError("kl: mu " + shape_string(in[0]) + " vs logvar " + shape_string(in[1]));
        return {1};
    }
    void forward(std::span<const Tensor* const> in, Tensor& out) override {
        const std::size_t n = in[0]->rows();
        double s = 0.0;
        for (std::size_t i = 0; i < in[0]->size(); ++i) {
            const double mu = (*in[0])[i], lv = (*in[1])[i];
            s += 0.5 * (mu * mu + std::exp(lv) - 1.0 - lv);
        }
        out[0] = s / static_cast<double>(n);
    }
    void backward(std::span<const Tensor* const> in, const Tensor&, const Tensor& gout,
                  std::span<Tensor* const> gin) override {
        const double f = gout[0] / static_cast<double>(in[0]->rows());
        for (std::size_t i = 0; i < in[0]->size(); ++i) {
            if (gin[0]) (*gin[0])[i] += f * (*in[0])[i];
            if (gin[1]) (*gin[1])[i] += f * 0.5 * (std::exp((*in[1])[i]) - 1.0);
        }
    }
};

}  // namespace

// ---------------------------------------------------------------- Graph

Graph::Node& Graph::checked(NodeId id) {
    if (id >= nodes_.size()) throw GraphError("node id " + std::to_string(id) + " does not exist");
    return nodes_[id];
}

NodeId Graph::input(std::string name, Shape shape, bool requires_grad) {
    if (input_names_.count(name)) throw GraphError("duplicate input name '" + name + "'");
    Node n{};
    n.kind = NodeKind::Input;
    n.label = name;
    n.shape = shape;
    n.input_requires_grad = requires_grad;
    n.value = Tensor(shape);
    const NodeId id = nodes_.size();
    input_names_.emplace(std::move(name), id);
    nodes_.push_back(std::move(n));
    return id;
}

NodeId Graph::parameter(const ParameterStore& store, std::string_view name) {
    Node n{};
    n.kind = NodeKind::Parameter;
    n.label = std::string(name);
    n.param_index = store.index(name);
    n.shape = store.value(n.param_index).shape();
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

NodeId Graph::constant(Tensor value) {
    Node n{};
    n.kind = NodeKind::Constant;
    n.label = "constant";
    n.shape = value.shape();
    n.value = std::move(value);
    n.bound = true;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

NodeId Graph::apply(std::unique_ptr<Op> op, std::vector<NodeId> inputs, std::string label) {
    std::vector<Shape> shapes;
    shapes.reserve(inputs.size());
    for (NodeId i : inputs) {
        if (i >= nodes_.size())
            throw GraphError("operator '" + op->kind() + "' refers to node " + std::to_string(i) +
                             " that does not precede it");
        shapes.push_back(nodes_[i].shape);
    }
    const NodeId id = nodes_.size();
    if (label.empty()) label = op->kind() + "#" + std::to_string(id);
    Shape out;
    try {
        out = op->output_shape(shapes);
    } catch (const ShapeError& e) {
        throw ShapeError("shape mismatch at node '" + label + "': " + e.what());
    }
    Node n{};
    n.kind = NodeKind::Operation;
    n.label = std::move(label);
    n.shape = out;
    n.op = std::move(op);
    n.inputs = std::move(inputs);
    n.value = Tensor(out);
    nodes_.push_back(std::move(n));
    return id;
}

void Graph::bind(const ParameterStore& store) {
    for (const Node& n : nodes_)
        if (n.kind == NodeKind::Parameter) {
            if (n.param_index >= store.size() || store.name(n.param_index) != n.label ||
                store.value(n.param_index).shape() != n.shape)
                throw GraphError("parameter store does not match graph parameter '" + n.label + "'");
        }
    store_ = &store;
}

const Tensor& Graph::node_value(const Node& n) const {
    if (n.kind == NodeKind::Parameter) return store_->value(n.param_index);
    return n.value;
}

void Graph::set_input(std::string_view name, const Tensor& value) {
    auto it = input_names_.find(name);
    if (it == input_names_.end()) throw GraphError("graph has no input named '" + std::string(name) + "'");
    set_input(it->second, value);
}

void Graph::set_input(NodeId id, const Tensor& value) {
    Node& n = checked(id);
    if (n.kind != NodeKind::Input) throw GraphError("node '" + n.label + "' is not an input");
    if (value.shape() != n.shape)
        throw ShapeError("shape mismatch at input '" + n.label + "': expected " + shape_string(n.shape) + ", got " +
                         shape_string(value.shape()));
    std::copy(value.storage().begin(), value.storage().end(), n.value.storage().begin());
    n.bound = true;
}

void Graph::forward(const std::map<std::string, Tensor>& inputs) {
    for (const auto& [name, value] : inputs) set_input(name, value);
    forward();
}

void Graph::forward() {
    const bool has_params = std::any_of(nodes_.begin(), nodes_.end(),
                                        [](const Node& n) { return n.kind == NodeKind::Parameter; });
    if (has_params && !store_) throw GraphError("graph has parameters but no bound parameter store");
    for (Node& n : nodes_) {
        switch (n.kind) {
            case NodeKind::Input:
                if (!n.bound) throw GraphError("unbound input '" + n.label + "'");
                n.needs_grad = n.input_requires_grad;
                break;
            case NodeKind::Parameter:
                n.needs_grad = store_->trainable(n.param_index);
                break;
            case NodeKind::Constant:
                n.needs_grad = false;
                break;
            case NodeKind::Operation: {
                in_scratch_.clear();
                n.needs_grad = false;
                for (NodeId i : n.inputs) {
                    in_scratch_.push_back(&node_value(nodes_[i]));
                    n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
                }
                n.op->forward(in_scratch_, n.value);
                break;
            }
        }
    }
    for (Node& n : nodes_)
        if (n.kind == NodeKind::Input) n.bound = false;
}

void Graph::backward(NodeId loss) {
    Node& root = checked(loss);
    if (shape_size(root.shape) != 1)
        throw GraphError("loss node '" + root.label + "' is not scalar: " + shape_string(root.shape));
    for (Node& n : nodes_) {
        if (!n.needs_grad) continue;
        if (n.grad.shape() != n.shape) n.grad = Tensor(n.shape);
        else n.grad.fill(0.0);
    }
    if (!root.needs_grad) return;
    root.grad[0] = 1.0;
    for (NodeId id = loss + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.kind != NodeKind::Operation || !n.needs_grad) continue;
        in_scratch_.clear();
        gin_scratch_.clear();
        for (NodeId i : n.inputs) {
            in_scratch_.push_back(&node_value(nodes_[i]));
            gin_scratch_.push_back(nodes_[i].needs_grad ? &nodes_[i].grad : nullptr);
        }
        n.op->backward(in_scratch_, n.value, n.grad, gin_scratch_);
    }
}

const Tensor& Graph::value(NodeId id) const {
    if (id >= nodes_.size()) throw GraphError("node id " + std::to_string(id) + " does not exist");
    return node_value(nodes_[id]);
}

const Tensor& Graph::grad(NodeId id) const {
    if (id >= nodes_.size()) throw GraphError("node id " + std::to_string(id) + " does not exist");
    const Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.shape() != n.shape)
        throw GraphError("node '" + n.label + "' has no gradient");
    return n.grad;
}

std::string Graph::describe(NodeId id) const {
    const Node& n = nodes_.at(id);
    return n.label + " " + shape_string(n.shape);
}

void Graph::add_parameter_gradients(Gradients& into) const {
    for (const Node& n : nodes_) {
        if (n.kind != NodeKind::Parameter || !n.needs_grad || n.grad.shape() != n.shape) continue;
        Tensor& dst = into[n.param_index];
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
    }
}

// ---------------------------------------------------------------- builders

NodeId dense(Graph& g, NodeId x, NodeId w, NodeId b, std::string label) {
    if (b == kNoNode) return g.apply(std::make_unique<DenseOp>(false), {x, w}, std::move(label));
    return g.apply(std::make_unique<DenseOp>(true), {x, w, b}, std::move(label));
}
NodeId relu(Graph& g, NodeId x) { return g.apply(std::make_unique<ReluOp>(), {x}); }
NodeId exp(Graph& g, NodeId x) { return g.apply(std::make_unique<ExpOp>(), {x}); }
NodeId scale(Graph& g, NodeId x, double f) { return g.apply(std::make_unique<ScaleOp>(f), {x}); }
NodeId softmax(Graph& g, NodeId x, std::size_t axis, std::string label) {
    return g.apply(std::make_unique<SoftmaxOp>(axis), {x}, std::move(label));
}
NodeId layer_norm(Graph& g, NodeId x, NodeId gain, NodeId bias, double eps) {
    return g.apply(std::make_unique<LayerNormOp>(eps), {x, gain, bias});
}
NodeId concat(Graph& g, const std::vector<NodeId>& xs, std::size_t axis, std::string label) {
    return g.apply(std::make_unique<ConcatOp>(axis), xs, std::move(label));
}
NodeId add(Graph& g, NodeId a, NodeId b, std::string label) {
    return g.apply(std::make_unique<BinaryOp>(false), {a, b}, std::move(label));
}
NodeId mul(Graph& g, NodeId a, NodeId b, std::string label) {
    return g.apply(std::make_unique<BinaryOp>(true), {a, b}, std::move(label));
}
NodeId sum(Graph& g, NodeId x, std::size_t axis) { return g.apply(std::make_unique<ReduceOp>(axis, false), {x}); }
NodeId mean(Graph& g, NodeId x, std::size_t axis) { return g.apply(std::make_unique<ReduceOp>(axis, true), {x}); }
NodeId reshape(Graph& g, NodeId x, Shape shape) {
    return g.apply(std::make_unique<ReshapeOp>(std::move(shape)), {x});
}
NodeId gather_rows(Graph& g, NodeId x, std::vector<std::size_t> rows, std::string label) {
    return g.apply(std::make_unique<GatherRowsOp>(std::move(rows)), {x}, std::move(label));
}
NodeId slice_cols(Graph& g, NodeId x, std::size_t begin, std::size_t end) {
    return g.apply(std::make_unique<SliceColsOp>(begin, end), {x});
}
NodeId mse(Graph& g, NodeId p, NodeId t) { return g.apply(std::make_unique<MseOp>(), {p, t}); }
NodeId cross_entropy(Graph& g, NodeId logits, NodeId labels) {
    return g.apply(std::make_unique<CrossEntropyOp>(), {logits, labels});
}
NodeId kl_standard_normal(Graph& g, NodeId mu, NodeId logvar) {
    return g.apply(std::make_unique<KlNormalOp>(), {mu, logvar});
}

}  // namespace galattice::autodiff
