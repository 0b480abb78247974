#include "obfugraph/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <unordered_set>

#include "obfugraph/kernels.hpp"

namespace obfugraph {

struct Tensor::Node {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> values;
    std::vector<double> grad;  // lazily sized
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward_fn;

    std::vector<double>& grad_buffer() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
        return grad;
    }
};

size_t Tensor::rows() const { return node_ ? node_->rows : 0; }
size_t Tensor::cols() const { return node_ ? node_->cols : 0; }
const std::vector<double>& Tensor::values() const { return node_->values; }
std::vector<double>& Tensor::values() { return node_->values; }
std::vector<double>& Tensor::grad() { return node_->grad_buffer(); }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::zero_grad() {
    if (node_) node_->grad.assign(node_->values.size(), 0.0);
}

struct TensorOps {
    static Tensor wrap(std::shared_ptr<Tensor::Node> node) {
        Tensor t;
        t.node_ = std::move(node);
        return t;
    }
    static const std::shared_ptr<Tensor::Node>& node(const Tensor& t) { return t.node_; }
};

namespace {

using Node = Tensor::Node;

std::shared_ptr<Node> new_node(size_t rows, size_t cols) {
    auto node = std::make_shared<Node>();
    node->rows = rows;
    node->cols = cols;
    node->values.assign(rows * cols, 0.0);
    return node;
}

void check_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

}  // namespace

Tensor make_tensor(size_t rows, size_t cols, std::vector<double> values, bool requires_grad) {
    if (values.size() != rows * cols)
        throw std::invalid_argument("make_tensor: values size does not match shape");
    auto node = std::make_shared<Node>();
    node->rows = rows;
    node->cols = cols;
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return TensorOps::wrap(std::move(node));
}

Tensor zeros(size_t rows, size_t cols, bool requires_grad) {
    return make_tensor(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_defined(a, "matmul");
    check_defined(b, "matmul");
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions do not match");
    const auto& k = kernels::active();
    auto pa = TensorOps::node(a);
    auto pb = TensorOps::node(b);
    auto out = new_node(pa->rows, pb->cols);
    k.matmul_nn(out->values.data(), pa->values.data(), pb->values.data(), pa->rows, pa->cols,
                pb->cols);
    out->requires_grad = pa->requires_grad || pb->requires_grad;
    if (out->requires_grad) {
        out->parents = {pa, pb};
        std::weak_ptr<Node> wout = out;
        out->backward_fn = [pa, pb, wout]() {
            auto o = wout.lock();
            const auto& kt = kernels::active();
            if (pa->requires_grad)
                kt.matmul_nt(pa->grad_buffer().data(), o->grad.data(), pb->values.data(),
                             pa->rows, o->cols, pa->cols);
            if (pb->requires_grad)
                kt.matmul_tn(pb->grad_buffer().data(), pa->values.data(), o->grad.data(),
                             pb->rows, pa->rows, pb->cols);
        };
    }
    return TensorOps::wrap(std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_defined(a, "add");
    check_defined(b, "add");
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("add: shape mismatch");
    const auto& k = kernels::active();
    auto pa = TensorOps::node(a);
    auto pb = TensorOps::node(b);
    auto out = new_node(pa->rows, pa->cols);
    out->values = pa->values;
    k.vadd(out->values.data(), pb->values.data(), out->values.size());
    out->requires_grad = pa->requires_grad || pb->requires_grad;
    if (out->requires_grad) {
        out->parents = {pa, pb};
        std::weak_ptr<Node> wout = out;
        out->backward_fn = [pa, pb, wout]() {
            auto o = wout.lock();
            const auto& kt = kernels::active();
            if (pa->requires_grad)
                kt.vadd(pa->grad_buffer().data(), o->grad.data(), o->grad.size());
            if (pb->requires_grad)
                kt.vadd(pb->grad_buffer().data(), o->grad.data(), o->grad.size());
        };
    }
    return TensorOps::wrap(std::move(out));
}

Tensor add_rowvec(const Tensor& a, const Tensor& bias) {
    check_defined(a, "add_rowvec");
    check_defined(bias, "add_rowvec");
    if (bias.rows() != 1 || bias.cols() != a.cols())
        throw std::invalid_argument("add_rowvec: bias must be (1, cols)");
    const auto& k = kernels::active();
    auto pa = TensorOps::node(a);
    auto pb = TensorOps::node(bias);
    auto out = new_node(pa->rows, pa->cols);
    out->values = pa->values;
    for (size_t r = 0; r < pa->rows; ++r)
        k.vadd(out->values.data() + r * pa->cols, pb->values.data(), pa->cols);
    out->requires_grad = pa->requires_grad || pb->requires_grad;
    if (out->requires_grad) {
        out->parents = {pa, pb};
        std::weak_ptr<Node> wout = out;
        out->backward_fn = [pa, pb, wout]() {
            auto o = wout.lock();
            const auto& kt = kernels::active();
            if (pa->requires_grad)
                kt.vadd(pa->grad_buffer().data(), o->grad.data(), o->grad.size());
            if (pb->requires_grad) {
                auto& gb = pb->grad_buffer();
                for (size_t r = 0; r < o->rows; ++r)
                    kt.vadd(gb.data(), o->grad.data() + r * o->cols, o->cols);
            }
        };
    }
    return TensorOps::wrap(std::move(out));
}

Tensor relu(const Tensor& a) {
    check_defined(a, "relu");
    const auto& k = kernels::active();
    auto pa = TensorOps::node(a);
    auto out = new_node(pa->rows, pa->cols);
    k.relu_forward(out->values.data(), pa->values.data(), pa->values.size());
    out->requires_grad = pa->requires_grad;
    if (out->requires_grad) {
        out->parents = {pa};
        std::weak_ptr<Node> wout = out;
        out->backward_fn = [pa, wout]() {
            auto o = wout.lock();
            kernels::active().relu_backward(pa->grad_buffer().data(), pa->values.data(),
                                            o->grad.data(), o->grad.size());
        };
    }
    return TensorOps::wrap(std::move(out));
}

Tensor scale_shift(const Tensor& h, const Tensor& eps) {
    check_defined(h, "scale_shift");
    check_defined(eps, "scale_shift");
    if (eps.rows() != 1 || eps.cols() != 1)
        throw std::invalid_argument("scale_shift: eps must be 1x1");
    const auto& k = kernels::active();
    auto ph = TensorOps::node(h);
    auto pe = TensorOps::node(eps);
    double factor = 1.0 + pe->values[0];
    auto out = new_node(ph->rows, ph->cols);
    out->values = ph->values;
    k.vscale(out->values.data(), factor, out->values.size());
    out->requires_grad = ph->requires_grad || pe->requires_grad;
    if (out->requires_grad) {
        out->parents = {ph, pe};
        std::weak_ptr<Node> wout = out;
        out->backward_fn = [ph, pe, factor, wout]() {
            auto o = wout.lock();
            const auto& kt = kernels::active();
            if (ph->requires_grad)
                kt.axpy(ph->grad_buffer().data(), factor, o->grad.data(), o->grad.size());
            if (pe->requires_grad)
                pe->grad_buffer()[0] +=
                    kt.dot(ph->values.data(), o->grad.data(), o->grad.size());
        };
    }
    return TensorOps::wrap(std::move(out));
}

Tensor edge_aggregate(const Tensor& h, const EdgeList& edges, size_t out_rows) {
    check_defined(h, "edge_aggregate");
    if (edges.dst.size() != edges.src.size() || edges.coeff.size() != edges.src.size())
        throw std::invalid_argument("edge_aggregate: ragged edge list");
    const auto& k = kernels::active();
    auto ph = TensorOps::node(h);
    size_t cols = ph->cols;
    auto out = new_node(out_rows, cols);
    for (size_t e = 0; e < edges.size(); ++e) {
        if (edges.src[e] >= ph->rows || edges.dst[e] >= out_rows)
            throw std::invalid_argument("edge_aggregate: edge index out of range");
        k.axpy(out->values.data() + edges.dst[e] * cols, edges.coeff[e],
               ph->values.data() + edges.src[e] * cols, cols);
    }
    out->requires_grad = ph->requires_grad;
    if (out->requires_grad) {
        out->parents = {ph};
        std::weak_ptr<Node> wout = out;
        EdgeList copy = edges;
        out->backward_fn = [ph, copy = std::move(copy), cols, wout]() {
            auto o = wout.lock();
            const auto& kt = kernels::active();
            auto& gh = ph->grad_buffer();
            for (size_t e = 0; e < copy.size(); ++e)
                kt.axpy(gh.data() + copy.src[e] * cols, copy.coeff[e],
                        o->grad.data() + copy.dst[e] * cols, cols);
        };
    }
    return TensorOps::wrap(std::move(out));
}

Tensor segment_reduce(const Tensor& h, const std::vector<uint32_t>& membership,
                      size_t n_graphs, bool mean) {
    check_defined(h, "segment_reduce");
    if (membership.size() != h.rows())
        throw std::invalid_argument("segment_reduce: membership size != rows");
    const auto& k = kernels::active();
    auto ph = TensorOps::node(h);
    size_t cols = ph->cols;

    std::vector<double> inv_count(n_graphs, 0.0);
    for (uint32_t g : membership) {
        if (g >= n_graphs) throw std::invalid_argument("segment_reduce: bad membership index");
        inv_count[g] += 1.0;
    }
    for (size_t g = 0; g < n_graphs; ++g) {
        if (inv_count[g] == 0.0)
            throw std::invalid_argument("segment_reduce: empty graph in batch");
        inv_count[g] = mean ? 1.0 / inv_count[g] : 1.0;
    }

    auto out = new_node(n_graphs, cols);
    for (size_t r = 0; r < ph->rows; ++r)
        k.axpy(out->values.data() + membership[r] * cols, inv_count[membership[r]],
               ph->values.data() + r * cols, cols);
    out->requires_grad = ph->requires_grad;
    if (out->requires_grad) {
        out->parents = {ph};
        std::weak_ptr<Node> wout = out;
        out->backward_fn = [ph, membership, inv_count, cols, wout]() {
            auto o = wout.lock();
            const auto& kt = kernels::active();
            auto& gh = ph->grad_buffer();
            for (size_t r = 0; r < ph->rows; ++r)
                kt.axpy(gh.data() + r * cols, inv_count[membership[r]],
                        o->grad.data() + membership[r] * cols, cols);
        };
    }
    return TensorOps::wrap(std::move(out));
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             const std::vector<double>& class_weights,
                             std::vector<double>* probs_out) {
    check_defined(logits, "softmax_cross_entropy");
    auto pl = TensorOps::node(logits);
    size_t n = pl->rows, k = pl->cols;
    if (labels.size() != n)
        throw std::invalid_argument("softmax_cross_entropy: labels size != rows");
    if (class_weights.size() != k)
        throw std::invalid_argument("softmax_cross_entropy: class_weights size != cols");

    std::vector<double> probs(pl->values);
    double weight_total = 0.0;
    double loss_value = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double* row = probs.data() + i * k;
        double m = row[0];
        for (size_t c = 1; c < k; ++c) m = std::max(m, row[c]);
        double sum = 0.0;
        for (size_t c = 0; c < k; ++c) {
            row[c] = std::exp(row[c] - m);
            sum += row[c];
        }
        for (size_t c = 0; c < k; ++c) row[c] /= sum;
        int label = labels[i];
        if (label < 0 || static_cast<size_t>(label) >= k)
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
        double w = class_weights[static_cast<size_t>(label)];
        weight_total += w;
        loss_value -= w * std::log(std::max(row[static_cast<size_t>(label)], 1e-300));
    }
    if (weight_total <= 0.0)
        throw std::invalid_argument("softmax_cross_entropy: non-positive weight total");
    loss_value /= weight_total;
    if (probs_out) *probs_out = probs;

    auto out = new_node(1, 1);
    out->values[0] = loss_value;
    out->requires_grad = pl->requires_grad;
    if (out->requires_grad) {
        out->parents = {pl};
        std::weak_ptr<Node> wout = out;
        out->backward_fn = [pl, probs = std::move(probs), labels, class_weights, weight_total,
                            k, n, wout]() {
            auto o = wout.lock();
            double upstream = o->grad[0];
            auto& gl = pl->grad_buffer();
            for (size_t i = 0; i < n; ++i) {
                double w = class_weights[static_cast<size_t>(labels[i])] / weight_total;
                const double* prow = probs.data() + i * k;
                double* grow = gl.data() + i * k;
                for (size_t c = 0; c < k; ++c) {
                    double indicator = static_cast<size_t>(labels[i]) == c ? 1.0 : 0.0;
                    grow[c] += upstream * w * (prow[c] - indicator);
                }
            }
        };
    }
    return TensorOps::wrap(std::move(out));
}

void backward(const Tensor& loss) {
    check_defined(loss, "backward");
    auto root = TensorOps::node(loss);
    if (root->rows != 1 || root->cols != 1)
        throw std::invalid_argument("backward: loss must be a 1x1 tensor");
    if (!root->requires_grad) return;

    // Iterative post-order topological sort over parents.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* node;
        size_t next;
    };
    std::vector<Frame> stack;
    stack.push_back({root.get(), 0});
    visited.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.node->parents.size()) {
            Node* parent = f.node->parents[f.next++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.push_back({parent, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    root->grad_buffer()[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn) {
            node->grad_buffer();  // ensure allocated even if untouched
            node->backward_fn();
        }
    }
}

bool all_finite(const Tensor& t) {
    if (!t.defined()) return false;
    for (double v : t.values())
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace obfugraph
