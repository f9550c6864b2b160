#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "flowembed/errors.hpp"

namespace flowembed::nn {

struct TensorNode;

// Value-semantic handle to a node in a dynamically recorded compute graph.
// Forward values are eager; backward() walks the recorded graph in reverse
// topological order. 64-bit floats throughout; any non-finite forward value
// raises NonFiniteError at the op that produced it.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false);
    static Tensor from_data(std::vector<size_t> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<size_t>& shape() const;
    size_t numel() const;
    const std::vector<double>& value() const;
    std::vector<double>& mutable_value();  // leaf parameters only
    const std::vector<double>& grad() const;
    bool requires_grad() const;
    void zero_grad();

    std::shared_ptr<TensorNode> node() const { return node_; }
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  private:
    std::shared_ptr<TensorNode> node_;
};

struct TensorNode {
    std::vector<size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized on demand during backward
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;  // scatters grad into parents

    size_t numel() const {
        size_t n = 1;
        for (size_t d : shape) n *= d;
        return n;
    }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor relu(const Tensor& x);
Tensor sqrt_elem(const Tensor& x);
// Gradient passes only where lo < x < hi.
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor sum(const Tensor& x);  // -> shape {1}

// x: [in], w: [out, in], b: [out] -> [out]
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);

// a: [n, k], b: [m, k] -> a * b^T, [n, m]
Tensor matmul_nt(const Tensor& a, const Tensor& b);

// x: [C_in, H, W], k: [C_out, C_in, kh, kw]; cross-correlation.
Tensor conv2d(const Tensor& x, const Tensor& kernels, size_t stride, size_t padding);
Tensor bias_channels(const Tensor& x, const Tensor& b);  // b: [C]
Tensor max_pool2d(const Tensor& x, size_t k, size_t stride);
Tensor global_avg_pool(const Tensor& x);  // [C, H, W] -> [C]

Tensor concat(const Tensor& a, const Tensor& b);  // 1-D
Tensor stack_rows(const std::vector<Tensor>& rows);  // n x [d] -> [n, d]
Tensor row_l2_normalize(const Tensor& x);  // [n, d], rows must be non-zero

// logits: [n, C]; mean cross-entropy of softmax rows against labels.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Populates grads of every requires_grad tensor reachable from loss.
// loss must be scalar (numel 1).
void backward(const Tensor& loss);

}  // namespace flowembed::nn
