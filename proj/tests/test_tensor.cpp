#include <doctest.h>

#include <cmath>
#include <vector>

#include "obfugraph/gnn.hpp"
#include "obfugraph/rng.hpp"
#include "obfugraph/tensor.hpp"

using namespace obfugraph;

namespace {

Tensor random_param(Rng& rng, size_t rows, size_t cols) {
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = rng.range(-0.9, 0.9);
    return make_tensor(rows, cols, std::move(v), true);
}

}  // namespace

TEST_CASE("matmul forward and backward match hand computation") {
    auto a = make_tensor(2, 3, {1, 2, 3, 4, 5, 6}, true);
    auto b = make_tensor(3, 2, {7, 8, 9, 10, 11, 12}, true);
    auto c = matmul(a, b);
    CHECK(c.values() == std::vector<double>{58, 64, 139, 154});

    std::vector<Tensor> params = {a, b};
    auto loss_fn = [&]() {
        auto prod = matmul(a, b);
        // scalar = sum of all entries: segment_reduce to 1 row, then
        // aggregate columns with a fixed vector.
        auto row = segment_reduce(prod, {0, 0}, 1, false);          // 1x2
        auto col = matmul(row, make_tensor(2, 1, {1.0, 1.0}, false));  // 1x1
        return col;
    };
    double err = gradient_check(loss_fn, params, 1e-5);
    CHECK(err <= 1e-7);
}

TEST_CASE("add, add_rowvec, relu, scale_shift forward values") {
    auto a = make_tensor(2, 2, {1, -2, 3, -4}, false);
    auto b = make_tensor(2, 2, {10, 20, 30, 40}, false);
    CHECK(add(a, b).values() == std::vector<double>{11, 18, 33, 36});

    auto bias = make_tensor(1, 2, {100, 200}, false);
    CHECK(add_rowvec(a, bias).values() == std::vector<double>{101, 198, 103, 196});

    CHECK(relu(a).values() == std::vector<double>{1, 0, 3, 0});

    auto eps = make_tensor(1, 1, {0.5}, false);
    CHECK(scale_shift(a, eps).values() == std::vector<double>{1.5, -3, 4.5, -6});
}

TEST_CASE("edge_aggregate gathers weighted rows") {
    auto h = make_tensor(3, 2, {1, 2, 3, 4, 5, 6}, false);
    EdgeList edges;
    edges.src = {0, 1, 2};
    edges.dst = {1, 2, 2};
    edges.coeff = {1.0, 0.5, 2.0};
    auto out = edge_aggregate(h, edges, 3);
    CHECK(out.values() == std::vector<double>{0, 0, 1, 2, 11.5, 14});
}

TEST_CASE("segment_reduce sum and mean") {
    auto h = make_tensor(3, 2, {1, 2, 3, 4, 10, 20}, false);
    auto sum = segment_reduce(h, {0, 0, 1}, 2, false);
    CHECK(sum.values() == std::vector<double>{4, 6, 10, 20});
    auto mean = segment_reduce(h, {0, 0, 1}, 2, true);
    CHECK(mean.values() == std::vector<double>{2, 3, 10, 20});
    CHECK_THROWS(segment_reduce(h, {0, 0, 0}, 2, false));  // empty graph 1
}

TEST_CASE("softmax cross entropy value and gradient") {
    auto logits = make_tensor(2, 3, {1, 2, 3, 0, 0, 0}, true);
    std::vector<int> labels = {2, 0};
    std::vector<double> weights = {1, 1, 1};
    std::vector<double> probs;
    auto loss = softmax_cross_entropy(logits, labels, weights, &probs);

    // Hand computation: row 1 softmax of (1,2,3); row 2 uniform thirds.
    double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    double expected = (-std::log(std::exp(3.0) / z) - std::log(1.0 / 3.0)) / 2.0;
    CHECK(loss.values()[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(probs[5] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    std::vector<Tensor> params = {logits};
    auto loss_fn = [&]() { return softmax_cross_entropy(logits, labels, weights); };
    CHECK(gradient_check(loss_fn, params, 1e-6) <= 1e-6);
}

TEST_CASE("uniform class weights equal unweighted loss") {
    Rng rng(5);
    auto logits = random_param(rng, 6, 4);
    std::vector<int> labels = {0, 1, 2, 3, 1, 2};
    auto uniform = softmax_cross_entropy(logits, labels, {1, 1, 1, 1});
    auto scaled = softmax_cross_entropy(logits, labels, {2, 2, 2, 2});
    CHECK(uniform.values()[0] == doctest::Approx(scaled.values()[0]).epsilon(1e-12));
}

TEST_CASE("backward accumulates through shared subexpressions") {
    auto x = make_tensor(1, 1, {3.0}, true);
    // loss = relu(x) + relu(x) -> d/dx = 2.
    auto doubled = add(relu(x), relu(x));
    backward(doubled);
    CHECK(x.grad()[0] == doctest::Approx(2.0));
}

TEST_CASE("constant loss yields zero gradients") {
    auto w = make_tensor(2, 2, {1, 2, 3, 4}, true);
    auto constant = make_tensor(1, 1, {5.0}, true);
    std::vector<Tensor> params = {w};
    auto loss_fn = [&]() { return scale_shift(constant, zeros(1, 1, false)); };
    // w does not participate: analytic and numeric gradients are both zero.
    double err = gradient_check(loss_fn, params, 1e-5);
    CHECK(err == 0.0);
}

TEST_CASE("affine layer + relu passes gradient check away from kinks") {
    Rng rng(17);
    auto x = make_tensor(4, 3, {0.3, -0.7, 0.9, 0.2, 0.8, -0.4, -0.6, 0.5, 0.1, 0.7, -0.2,
                                0.6},
                         false);
    auto w = random_param(rng, 3, 5);
    auto b = random_param(rng, 1, 5);
    std::vector<int> labels = {0, 1, 2, 3};
    std::vector<double> class_weights = {1, 1, 1, 1, 1};

    std::vector<Tensor> params = {w, b};
    auto loss_fn = [&]() {
        auto z = relu(add_rowvec(matmul(x, w), b));
        auto pooled = segment_reduce(z, {0, 0, 1, 1}, 2, true);
        return softmax_cross_entropy(pooled, {0, 1}, {1, 1, 1, 1, 1});
    };
    CHECK(gradient_check(loss_fn, params, 1e-5) <= 1e-5);
}

TEST_CASE("all_finite flags NaN and Inf") {
    CHECK(all_finite(make_tensor(1, 2, {1.0, 2.0}, false)));
    CHECK_FALSE(all_finite(make_tensor(1, 2, {1.0, NAN}, false)));
    CHECK_FALSE(all_finite(make_tensor(1, 2, {INFINITY, 2.0}, false)));
}

TEST_CASE("shape mismatches throw") {
    auto a = make_tensor(2, 3, std::vector<double>(6, 1.0), false);
    auto b = make_tensor(2, 3, std::vector<double>(6, 1.0), false);
    CHECK_THROWS(matmul(a, b));
    CHECK_THROWS(add(a, make_tensor(3, 2, std::vector<double>(6, 1.0), false)));
    CHECK_THROWS(add_rowvec(a, make_tensor(1, 2, {1, 2}, false)));
    CHECK_THROWS(make_tensor(2, 2, {1.0}, false));
}
