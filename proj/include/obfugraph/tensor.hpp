#pragma once

#include <cstdint>
#include <memory>
#include <vector>

// Minimal reverse-mode differentiable dense-tensor engine. Tensors are
// 2-D, row-major doubles; ops build a DAG of nodes whose inner loops run
// through the kernels dispatch table. backward() runs a topological sweep
// accumulating gradients into every tensor created with requires_grad.

namespace obfugraph {

class Tensor {
public:
    struct Node;  // defined in tensor.cpp

    Tensor() = default;

    size_t rows() const;
    size_t cols() const;
    size_t size() const { return rows() * cols(); }
    bool defined() const { return node_ != nullptr; }

    const std::vector<double>& values() const;
    std::vector<double>& values();  // in-place updates (optimizer steps)
    std::vector<double>& grad();    // lazily zero-initialized
    bool requires_grad() const;
    void zero_grad();

private:
    std::shared_ptr<Node> node_;
    friend struct TensorOps;
};

Tensor make_tensor(size_t rows, size_t cols, std::vector<double> values,
                   bool requires_grad = false);
Tensor zeros(size_t rows, size_t cols, bool requires_grad = false);

// C = A (m x k) * B (k x n)
Tensor matmul(const Tensor& a, const Tensor& b);
// Elementwise sum, equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
// Row-broadcast bias: out[r, c] = a[r, c] + bias[0, c]
Tensor add_rowvec(const Tensor& a, const Tensor& bias);
Tensor relu(const Tensor& a);
// (1 + eps) * h with eps a learnable 1x1 tensor (GIN self-weighting).
Tensor scale_shift(const Tensor& h, const Tensor& eps);

// Sparse weighted aggregation: out[dst[e]] += coeff[e] * h[src[e]].
struct EdgeList {
    std::vector<uint32_t> src;
    std::vector<uint32_t> dst;
    std::vector<double> coeff;
    size_t size() const { return src.size(); }
};
Tensor edge_aggregate(const Tensor& h, const EdgeList& edges, size_t out_rows);

// Per-graph readout over node rows; membership[r] = graph index.
Tensor segment_reduce(const Tensor& h, const std::vector<uint32_t>& membership,
                      size_t n_graphs, bool mean);

// Class-weighted mean cross-entropy over softmax(logits); returns a 1x1
// loss tensor. probs_out (optional) receives the softmax matrix.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             const std::vector<double>& class_weights,
                             std::vector<double>* probs_out = nullptr);

// Reverse sweep from a 1x1 loss tensor (seeds d(loss)/d(loss) = 1).
void backward(const Tensor& loss);

bool all_finite(const Tensor& t);

}  // namespace obfugraph
