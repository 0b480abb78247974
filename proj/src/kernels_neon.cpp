#include "obfugraph/kernels.hpp"

// NEON variants for aarch64 (float64x2, FMA via vfmaq_f64). Mirrors the
// AVX2 file with half-width vectors.

#if defined(__aarch64__)

#include <arm_neon.h>

namespace obfugraph::kernels {
namespace {

void matmul_nn_neon(double* c, const double* a, const double* b,
                    size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t l = 0; l < k; ++l) {
            double av = arow[l];
            if (av == 0.0) continue;
            const double* brow = b + l * n;
            float64x2_t avec = vdupq_n_f64(av);
            size_t j = 0;
            for (; j + 2 <= n; j += 2) {
                float64x2_t cv = vld1q_f64(crow + j);
                cv = vfmaq_f64(cv, avec, vld1q_f64(brow + j));
                vst1q_f64(crow + j, cv);
            }
            for (; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_tn_neon(double* c, const double* a, const double* b,
                    size_t m, size_t k, size_t n) {
    for (size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (size_t i = 0; i < m; ++i) {
            double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + i * n;
            float64x2_t avec = vdupq_n_f64(av);
            size_t j = 0;
            for (; j + 2 <= n; j += 2) {
                float64x2_t cv = vld1q_f64(crow + j);
                cv = vfmaq_f64(cv, avec, vld1q_f64(brow + j));
                vst1q_f64(crow + j, cv);
            }
            for (; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt_neon(double* c, const double* a, const double* b,
                    size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            float64x2_t acc = vdupq_n_f64(0.0);
            size_t l = 0;
            for (; l + 2 <= k; l += 2)
                acc = vfmaq_f64(acc, vld1q_f64(arow + l), vld1q_f64(brow + l));
            double s = vaddvq_f64(acc);
            for (; l < k; ++l) s += arow[l] * brow[l];
            crow[j] += s;
        }
    }
}

void axpy_neon(double* y, double alpha, const double* x, size_t n) {
    float64x2_t avec = vdupq_n_f64(alpha);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t yv = vld1q_f64(y + i);
        yv = vfmaq_f64(yv, avec, vld1q_f64(x + i));
        vst1q_f64(y + i, yv);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void vadd_neon(double* y, const double* x, size_t n) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void vscale_neon(double* y, double alpha, size_t n) {
    float64x2_t avec = vdupq_n_f64(alpha);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vmulq_f64(vld1q_f64(y + i), avec));
    for (; i < n; ++i) y[i] *= alpha;
}

void relu_forward_neon(double* out, const double* in, size_t n) {
    float64x2_t zero = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vmaxq_f64(vld1q_f64(in + i), zero));
    for (; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward_neon(double* dx, const double* x, const double* dy, size_t n) {
    float64x2_t zero = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        uint64x2_t mask = vcgtq_f64(vld1q_f64(x + i), zero);
        float64x2_t gated = vreinterpretq_f64_u64(
            vandq_u64(vreinterpretq_u64_f64(vld1q_f64(dy + i)), mask));
        vst1q_f64(dx + i, vaddq_f64(vld1q_f64(dx + i), gated));
    }
    for (; i < n; ++i)
        if (x[i] > 0.0) dx[i] += dy[i];
}

void vmuladd_neon(double* out, const double* a, const double* b, size_t n) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t ov = vld1q_f64(out + i);
        ov = vfmaq_f64(ov, vld1q_f64(a + i), vld1q_f64(b + i));
        vst1q_f64(out + i, ov);
    }
    for (; i < n; ++i) out[i] += a[i] * b[i];
}

double dot_neon(const double* a, const double* b, size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double vsum_neon(const double* x, size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

}  // namespace

const KernelTable& neon_table() {
    static const KernelTable table = {
        matmul_nn_neon, matmul_tn_neon, matmul_nt_neon,
        axpy_neon,      vadd_neon,      vscale_neon,
        relu_forward_neon, relu_backward_neon,
        vmuladd_neon,   dot_neon,       vsum_neon,
        "neon",
    };
    return table;
}

}  // namespace obfugraph::kernels

#endif  // aarch64
