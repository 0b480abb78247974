#include "obfugraph/kernels.hpp"

// Reference kernels. These define the semantics the SIMD variants are
// tested against.

namespace obfugraph::kernels {
namespace {

void matmul_nn_scalar(double* c, const double* a, const double* b,
                      size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t l = 0; l < k; ++l) {
            double av = arow[l];
            if (av == 0.0) continue;
            const double* brow = b + l * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_tn_scalar(double* c, const double* a, const double* b,
                      size_t m, size_t k, size_t n) {
    // a is (k x m); C[i,j] += sum_l a[l,i] * b[l,j]
    for (size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (size_t i = 0; i < m; ++i) {
            double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + i * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt_scalar(double* c, const double* a, const double* b,
                      size_t m, size_t k, size_t n) {
    // b is (n x k); C[i,j] += dot(a.row(i), b.row(j))
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
            crow[j] += acc;
        }
    }
}

void axpy_scalar(double* y, double alpha, const double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void vadd_scalar(double* y, const double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += x[i];
}

void vscale_scalar(double* y, double alpha, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] *= alpha;
}

void relu_forward_scalar(double* out, const double* in, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward_scalar(double* dx, const double* x, const double* dy, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (x[i] > 0.0) dx[i] += dy[i];
}

void vmuladd_scalar(double* out, const double* a, const double* b, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] += a[i] * b[i];
}

double dot_scalar(const double* a, const double* b, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double vsum_scalar(const double* x, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table = {
        matmul_nn_scalar, matmul_tn_scalar, matmul_nt_scalar,
        axpy_scalar,      vadd_scalar,      vscale_scalar,
        relu_forward_scalar, relu_backward_scalar,
        vmuladd_scalar,   dot_scalar,       vsum_scalar,
        "scalar",
    };
    return table;
}

}  // namespace obfugraph::kernels
