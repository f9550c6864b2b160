#include "flowembed/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

namespace flowembed::nn {

namespace {

std::string shape_str(const std::vector<size_t>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

void check_finite(const char* op, const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x))
            throw NonFiniteError(std::string(op) + " produced a non-finite value");
}

std::shared_ptr<TensorNode> make_node(std::vector<size_t> shape,
                                      std::vector<double> value,
                                      std::vector<std::shared_ptr<TensorNode>> parents,
                                      const char* op) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->parents = std::move(parents);
    for (const auto& p : node->parents)
        if (p->requires_grad) node->requires_grad = true;
    check_finite(op, node->value);
    return node;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

}  // namespace

const std::vector<size_t>& Tensor::shape() const { return node_->shape; }
size_t Tensor::numel() const { return node_->numel(); }
const std::vector<double>& Tensor::value() const { return node_->value; }
bool Tensor::requires_grad() const { return node_->requires_grad; }

std::vector<double>& Tensor::mutable_value() {
    if (!node_->parents.empty())
        throw ConfigError("mutable_value is restricted to leaf tensors");
    return node_->value;
}

const std::vector<double>& Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

Tensor Tensor::zeros(std::vector<size_t> shape, bool requires_grad) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value.assign(n, 0.0);
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor Tensor::from_data(std::vector<size_t> shape, std::vector<double> data,
                         bool requires_grad) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    if (n != data.size())
        throw ShapeError("from_data: " + std::to_string(data.size()) +
                         " values for shape " + shape_str(shape));
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    check_finite("from_data", node->value);
    return Tensor(node);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_data({1}, {v}, requires_grad);
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
    auto node = make_node(a.shape(), std::move(out), {a.node(), b.node()}, "add");
    node->backward_fn = [](TensorNode& self) {
        for (size_t p = 0; p < 2; ++p) {
            auto& parent = *self.parents[p];
            if (!parent.requires_grad) continue;
            parent.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) parent.grad[i] += self.grad[i];
        }
    };
    return Tensor(node);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
    auto node = make_node(a.shape(), std::move(out), {a.node(), b.node()}, "sub");
    node->backward_fn = [](TensorNode& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
        }
    };
    return Tensor(node);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
    auto node = make_node(a.shape(), std::move(out), {a.node(), b.node()}, "mul");
    node->backward_fn = [](TensorNode& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                pa.grad[i] += self.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                pb.grad[i] += self.grad[i] * pa.value[i];
        }
    };
    return Tensor(node);
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * c;
    auto node = make_node(a.shape(), std::move(out), {a.node()}, "scale");
    node->backward_fn = [c](TensorNode& self) {
        auto& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        pa.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * c;
    };
    return Tensor(node);
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, x.value()[i]);
    auto node = make_node(x.shape(), std::move(out), {x.node()}, "relu");
    node->backward_fn = [](TensorNode& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) return;
        px.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
            if (px.value[i] > 0.0) px.grad[i] += self.grad[i];
    };
    return Tensor(node);
}

Tensor sqrt_elem(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (size_t i = 0; i < out.size(); ++i) {
        if (x.value()[i] < 0.0) throw NonFiniteError("sqrt of a negative value");
        out[i] = std::sqrt(x.value()[i]);
    }
    auto node = make_node(x.shape(), std::move(out), {x.node()}, "sqrt");
    node->backward_fn = [](TensorNode& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) return;
        px.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
            if (self.value[i] == 0.0)
                throw NonFiniteError("sqrt gradient at zero");
            px.grad[i] += self.grad[i] * 0.5 / self.value[i];
        }
    };
    return Tensor(node);
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    std::vector<double> out(x.numel());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = std::min(hi, std::max(lo, x.value()[i]));
    auto node = make_node(x.shape(), std::move(out), {x.node()}, "clamp");
    node->backward_fn = [lo, hi](TensorNode& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) return;
        px.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
            if (px.value[i] > lo && px.value[i] < hi) px.grad[i] += self.grad[i];
    };
    return Tensor(node);
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.value()) total += v;
    auto node = make_node({1}, {total}, {x.node()}, "sum");
    node->backward_fn = [](TensorNode& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) return;
        px.ensure_grad();
        for (size_t i = 0; i < px.grad.size(); ++i) px.grad[i] += self.grad[0];
    };
    return Tensor(node);
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.shape().size() != 1 || w.shape().size() != 2 || b.shape().size() != 1)
        throw ShapeError("dense expects x [in], w [out, in], b [out]");
    size_t in = x.shape()[0], out_dim = w.shape()[0];
    if (w.shape()[1] != in || b.shape()[0] != out_dim)
        throw ShapeError("dense: shape mismatch x " + shape_str(x.shape()) + " w " +
                         shape_str(w.shape()) + " b " + shape_str(b.shape()));
    std::vector<double> out(out_dim);
    for (size_t o = 0; o < out_dim; ++o) {
        double acc = b.value()[o];
        const double* wrow = w.value().data() + o * in;
        for (size_t i = 0; i < in; ++i) acc += wrow[i] * x.value()[i];
        out[o] = acc;
    }
    auto node =
        make_node({out_dim}, std::move(out), {x.node(), w.node(), b.node()}, "dense");
    node->backward_fn = [in, out_dim](TensorNode& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        if (px.requires_grad) {
            px.ensure_grad();
            for (size_t o = 0; o < out_dim; ++o) {
                double g = self.grad[o];
                const double* wrow = pw.value.data() + o * in;
                for (size_t i = 0; i < in; ++i) px.grad[i] += g * wrow[i];
            }
        }
        if (pw.requires_grad) {
            pw.ensure_grad();
            for (size_t o = 0; o < out_dim; ++o) {
                double g = self.grad[o];
                double* grow = pw.grad.data() + o * in;
                for (size_t i = 0; i < in; ++i) grow[i] += g * px.value[i];
            }
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (size_t o = 0; o < out_dim; ++o) pb.grad[o] += self.grad[o];
        }
    };
    return Tensor(node);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[1])
        throw ShapeError("matmul_nt: incompatible shapes " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[0];
    std::vector<double> out(n * m, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const double* arow = a.value().data() + i * k;
        for (size_t j = 0; j < m; ++j) {
            const double* brow = b.value().data() + j * k;
            double acc = 0.0;
            for (size_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
            out[i * m + j] = acc;
        }
    }
    auto node = make_node({n, m}, std::move(out), {a.node(), b.node()}, "matmul_nt");
    node->backward_fn = [n, k, m](TensorNode& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < n; ++i)
                for (size_t j = 0; j < m; ++j) {
                    double g = self.grad[i * m + j];
                    const double* brow = pb.value.data() + j * k;
                    double* garow = pa.grad.data() + i * k;
                    for (size_t t = 0; t < k; ++t) garow[t] += g * brow[t];
                }
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < n; ++i)
                for (size_t j = 0; j < m; ++j) {
                    double g = self.grad[i * m + j];
                    const double* arow = pa.value.data() + i * k;
                    double* gbrow = pb.grad.data() + j * k;
                    for (size_t t = 0; t < k; ++t) gbrow[t] += g * arow[t];
                }
        }
    };
    return Tensor(node);
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, size_t stride, size_t padding) {
    if (x.shape().size() != 3 || kernels.shape().size() != 4)
        throw ShapeError("conv2d expects x [C, H, W], kernels [Co, Ci, kh, kw]");
    if (stride == 0) throw ConfigError("conv2d stride must be >= 1");
    size_t ci = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    size_t co = kernels.shape()[0], kci = kernels.shape()[1];
    size_t kh = kernels.shape()[2], kw = kernels.shape()[3];
    if (kci != ci)
        throw ShapeError("conv2d: input has " + std::to_string(ci) +
                         " channels, kernels expect " + std::to_string(kci));
    if (kh > h + 2 * padding || kw > w + 2 * padding)
        throw ShapeError("conv2d: kernel larger than padded input");
    size_t oh = (h + 2 * padding - kh) / stride + 1;
    size_t ow = (w + 2 * padding - kw) / stride + 1;

    std::vector<double> out(co * oh * ow, 0.0);
    const auto& xv = x.value();
    const auto& kv = kernels.value();
    for (size_t o = 0; o < co; ++o)
        for (size_t oy = 0; oy < oh; ++oy)
            for (size_t ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (size_t c = 0; c < ci; ++c)
                    for (size_t ky = 0; ky < kh; ++ky) {
                        long iy = long(oy * stride + ky) - long(padding);
                        if (iy < 0 || iy >= long(h)) continue;
                        for (size_t kx = 0; kx < kw; ++kx) {
                            long ix = long(ox * stride + kx) - long(padding);
                            if (ix < 0 || ix >= long(w)) continue;
                            acc += xv[(c * h + size_t(iy)) * w + size_t(ix)] *
                                   kv[((o * ci + c) * kh + ky) * kw + kx];
                        }
                    }
                out[(o * oh + oy) * ow + ox] = acc;
            }

    auto node = make_node({co, oh, ow}, std::move(out), {x.node(), kernels.node()},
                          "conv2d");
    node->backward_fn = [ci, h, w, co, kh, kw, oh, ow, stride, padding](TensorNode& self) {
        auto& px = *self.parents[0];
        auto& pk = *self.parents[1];
        if (px.requires_grad) px.ensure_grad();
        if (pk.requires_grad) pk.ensure_grad();
        if (!px.requires_grad && !pk.requires_grad) return;
        for (size_t o = 0; o < co; ++o)
            for (size_t oy = 0; oy < oh; ++oy)
                for (size_t ox = 0; ox < ow; ++ox) {
                    double g = self.grad[(o * oh + oy) * ow + ox];
                    if (g == 0.0) continue;
                    for (size_t c = 0; c < ci; ++c)
                        for (size_t ky = 0; ky < kh; ++ky) {
                            long iy = long(oy * stride + ky) - long(padding);
                            if (iy < 0 || iy >= long(h)) continue;
                            for (size_t kx = 0; kx < kw; ++kx) {
                                long ix = long(ox * stride + kx) - long(padding);
                                if (ix < 0 || ix >= long(w)) continue;
                                size_t xi = (c * h + size_t(iy)) * w + size_t(ix);
                                size_t ki = ((o * ci + c) * kh + ky) * kw + kx;
                                if (px.requires_grad) px.grad[xi] += g * pk.value[ki];
                                if (pk.requires_grad) pk.grad[ki] += g * px.value[xi];
                            }
                        }
                }
    };
    return Tensor(node);
}

Tensor bias_channels(const Tensor& x, const Tensor& b) {
    if (x.shape().size() != 3 || b.shape().size() != 1 || b.shape()[0] != x.shape()[0])
        throw ShapeError("bias_channels expects x [C, H, W], b [C]");
    size_t c = x.shape()[0], hw = x.shape()[1] * x.shape()[2];
    std::vector<double> out(x.numel());
    for (size_t ch = 0; ch < c; ++ch)
        for (size_t i = 0; i < hw; ++i)
            out[ch * hw + i] = x.value()[ch * hw + i] + b.value()[ch];
    auto node = make_node(x.shape(), std::move(out), {x.node(), b.node()},
                          "bias_channels");
    node->backward_fn = [c, hw](TensorNode& self) {
        auto& px = *self.parents[0];
        auto& pb = *self.parents[1];
        if (px.requires_grad) {
            px.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (size_t ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (size_t i = 0; i < hw; ++i) acc += self.grad[ch * hw + i];
                pb.grad[ch] += acc;
            }
        }
    };
    return Tensor(node);
}

Tensor max_pool2d(const Tensor& x, size_t k, size_t stride) {
    if (x.shape().size() != 3) throw ShapeError("max_pool2d expects [C, H, W]");
    if (k == 0 || stride == 0) throw ConfigError("max_pool2d k and stride must be >= 1");
    size_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    if (k > h || k > w) throw ShapeError("max_pool2d: window larger than input");
    size_t oh = (h - k) / stride + 1;
    size_t ow = (w - k) / stride + 1;
    std::vector<double> out(c * oh * ow);
    auto argmax = std::make_shared<std::vector<size_t>>(c * oh * ow);
    for (size_t ch = 0; ch < c; ++ch)
        for (size_t oy = 0; oy < oh; ++oy)
            for (size_t ox = 0; ox < ow; ++ox) {
                size_t best = (ch * h + oy * stride) * w + ox * stride;
                double bv = x.value()[best];
                for (size_t ky = 0; ky < k; ++ky)
                    for (size_t kx = 0; kx < k; ++kx) {
                        size_t idx = (ch * h + oy * stride + ky) * w + ox * stride + kx;
                        if (x.value()[idx] > bv) {
                            bv = x.value()[idx];
                            best = idx;
                        }
                    }
                size_t oi = (ch * oh + oy) * ow + ox;
                out[oi] = bv;
                (*argmax)[oi] = best;
            }
    auto node = make_node({c, oh, ow}, std::move(out), {x.node()}, "max_pool2d");
    node->backward_fn = [argmax](TensorNode& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) return;
        px.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
            px.grad[(*argmax)[i]] += self.grad[i];
    };
    return Tensor(node);
}

Tensor global_avg_pool(const Tensor& x) {
    if (x.shape().size() != 3) throw ShapeError("global_avg_pool expects [C, H, W]");
    size_t c = x.shape()[0], hw = x.shape()[1] * x.shape()[2];
    std::vector<double> out(c);
    for (size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (size_t i = 0; i < hw; ++i) acc += x.value()[ch * hw + i];
        out[ch] = acc / double(hw);
    }
    auto node = make_node({c}, std::move(out), {x.node()}, "global_avg_pool");
    node->backward_fn = [c, hw](TensorNode& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) return;
        px.ensure_grad();
        for (size_t ch = 0; ch < c; ++ch) {
            double g = self.grad[ch] / double(hw);
            for (size_t i = 0; i < hw; ++i) px.grad[ch * hw + i] += g;
        }
    };
    return Tensor(node);
}

Tensor concat(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 1 || b.shape().size() != 1)
        throw ShapeError("concat expects 1-D tensors");
    size_t na = a.numel(), nb = b.numel();
    std::vector<double> out;
    out.reserve(na + nb);
    out.insert(out.end(), a.value().begin(), a.value().end());
    out.insert(out.end(), b.value().begin(), b.value().end());
    auto node = make_node({na + nb}, std::move(out), {a.node(), b.node()}, "concat");
    node->backward_fn = [na, nb](TensorNode& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < na; ++i) pa.grad[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < nb; ++i) pb.grad[i] += self.grad[na + i];
        }
    };
    return Tensor(node);
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw ShapeError("stack_rows needs at least one row");
    size_t d = rows[0].numel();
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::vector<double> out;
    out.reserve(rows.size() * d);
    for (const auto& r : rows) {
        if (r.shape().size() != 1 || r.numel() != d)
            throw ShapeError("stack_rows: rows must be 1-D of equal length");
        out.insert(out.end(), r.value().begin(), r.value().end());
        parents.push_back(r.node());
    }
    size_t n = rows.size();
    auto node = make_node({n, d}, std::move(out), std::move(parents), "stack_rows");
    node->backward_fn = [n, d](TensorNode& self) {
        for (size_t r = 0; r < n; ++r) {
            auto& p = *self.parents[r];
            if (!p.requires_grad) continue;
            p.ensure_grad();
            for (size_t i = 0; i < d; ++i) p.grad[i] += self.grad[r * d + i];
        }
    };
    return Tensor(node);
}

Tensor row_l2_normalize(const Tensor& x) {
    if (x.shape().size() != 2) throw ShapeError("row_l2_normalize expects [n, d]");
    size_t n = x.shape()[0], d = x.shape()[1];
    std::vector<double> out(n * d);
    auto norms = std::make_shared<std::vector<double>>(n);
    for (size_t r = 0; r < n; ++r) {
        double sq = 0.0;
        for (size_t i = 0; i < d; ++i) sq += x.value()[r * d + i] * x.value()[r * d + i];
        if (sq == 0.0) throw ZeroVectorError("row_l2_normalize: all-zero row");
        double norm = std::sqrt(sq);
        (*norms)[r] = norm;
        for (size_t i = 0; i < d; ++i) out[r * d + i] = x.value()[r * d + i] / norm;
    }
    auto node = make_node(x.shape(), std::move(out), {x.node()}, "row_l2_normalize");
    node->backward_fn = [n, d, norms](TensorNode& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) return;
        px.ensure_grad();
        for (size_t r = 0; r < n; ++r) {
            double dot = 0.0;
            for (size_t i = 0; i < d; ++i)
                dot += self.value[r * d + i] * self.grad[r * d + i];
            double inv = 1.0 / (*norms)[r];
            for (size_t i = 0; i < d; ++i)
                px.grad[r * d + i] +=
                    (self.grad[r * d + i] - self.value[r * d + i] * dot) * inv;
        }
    };
    return Tensor(node);
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.shape().size() != 2)
        throw ShapeError("softmax_cross_entropy expects logits [n, C]");
    size_t n = logits.shape()[0], c = logits.shape()[1];
    if (n == 0) throw ConfigError("softmax_cross_entropy: empty batch");
    if (labels.size() != n)
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
    for (int l : labels)
        if (l < 0 || size_t(l) >= c)
            throw ConfigError("label " + std::to_string(l) + " out of range");

    auto probs = std::make_shared<std::vector<double>>(n * c);
    double total = 0.0;
    for (size_t r = 0; r < n; ++r) {
        const double* row = logits.value().data() + r * c;
        double mx = row[0];
        for (size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (size_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
        double log_denom = std::log(denom);
        for (size_t j = 0; j < c; ++j)
            (*probs)[r * c + j] = std::exp(row[j] - mx) / denom;
        total += log_denom - (row[labels[r]] - mx);
    }
    auto node = make_node({1}, {total / double(n)}, {logits.node()},
                          "softmax_cross_entropy");
    node->backward_fn = [n, c, probs, labels](TensorNode& self) {
        auto& pl = *self.parents[0];
        if (!pl.requires_grad) return;
        pl.ensure_grad();
        double g = self.grad[0] / double(n);
        for (size_t r = 0; r < n; ++r)
            for (size_t j = 0; j < c; ++j) {
                double delta = (size_t(labels[r]) == j) ? 1.0 : 0.0;
                pl.grad[r * c + j] += g * ((*probs)[r * c + j] - delta);
            }
    };
    return Tensor(node);
}

void backward(const Tensor& loss) {
    if (!loss.defined()) throw ConfigError("backward on an undefined tensor");
    if (loss.numel() != 1) throw ShapeError("backward requires a scalar loss");

    // Reverse topological order via iterative post-order DFS.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, size_t>> stack{{loss.node().get(), 0}};
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* parent = node->parents[next++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.push_back({parent, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backward_fn && node->requires_grad) {
            node->ensure_grad();
            node->backward_fn(*node);
        }
    }
}

}  // namespace flowembed::nn
