#include "obfugraph/kernels.hpp"

// AVX2+FMA variants. This translation unit is compiled with -mavx2 -mfma;
// callers must check CPU support before installing the table.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace obfugraph::kernels {
namespace {

void matmul_nn_avx2(double* c, const double* a, const double* b,
                    size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t l = 0; l < k; ++l) {
            double av = arow[l];
            if (av == 0.0) continue;
            const double* brow = b + l * n;
            __m256d avec = _mm256_set1_pd(av);
            size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d cv = _mm256_loadu_pd(crow + j);
                cv = _mm256_fmadd_pd(avec, _mm256_loadu_pd(brow + j), cv);
                _mm256_storeu_pd(crow + j, cv);
            }
            for (; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_tn_avx2(double* c, const double* a, const double* b,
                    size_t m, size_t k, size_t n) {
    for (size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (size_t i = 0; i < m; ++i) {
            double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + i * n;
            __m256d avec = _mm256_set1_pd(av);
            size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d cv = _mm256_loadu_pd(crow + j);
                cv = _mm256_fmadd_pd(avec, _mm256_loadu_pd(brow + j), cv);
                _mm256_storeu_pd(crow + j, cv);
            }
            for (; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline double hsum256(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

void matmul_nt_avx2(double* c, const double* a, const double* b,
                    size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            __m256d acc = _mm256_setzero_pd();
            size_t l = 0;
            for (; l + 4 <= k; l += 4)
                acc = _mm256_fmadd_pd(_mm256_loadu_pd(arow + l),
                                      _mm256_loadu_pd(brow + l), acc);
            double s = hsum256(acc);
            for (; l < k; ++l) s += arow[l] * brow[l];
            crow[j] += s;
        }
    }
}

void axpy_avx2(double* y, double alpha, const double* x, size_t n) {
    __m256d avec = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        yv = _mm256_fmadd_pd(avec, _mm256_loadu_pd(x + i), yv);
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void vadd_avx2(double* y, const double* x, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += x[i];
}

void vscale_avx2(double* y, double alpha, size_t n) {
    __m256d avec = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), avec));
    for (; i < n; ++i) y[i] *= alpha;
}

void relu_forward_avx2(double* out, const double* in, size_t n) {
    __m256d zero = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(in + i), zero));
    for (; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward_avx2(double* dx, const double* x, const double* dy, size_t n) {
    __m256d zero = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d xv = _mm256_loadu_pd(x + i);
        __m256d mask = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
        __m256d gated = _mm256_and_pd(_mm256_loadu_pd(dy + i), mask);
        _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), gated));
    }
    for (; i < n; ++i)
        if (x[i] > 0.0) dx[i] += dy[i];
}

void vmuladd_avx2(double* out, const double* a, const double* b, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d ov = _mm256_loadu_pd(out + i);
        ov = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), ov);
        _mm256_storeu_pd(out + i, ov);
    }
    for (; i < n; ++i) out[i] += a[i] * b[i];
}

double dot_avx2(const double* a, const double* b, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double s = hsum256(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double vsum_avx2(const double* x, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum256(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

}  // namespace

const KernelTable& avx2_table() {
    static const KernelTable table = {
        matmul_nn_avx2, matmul_tn_avx2, matmul_nt_avx2,
        axpy_avx2,      vadd_avx2,      vscale_avx2,
        relu_forward_avx2, relu_backward_avx2,
        vmuladd_avx2,   dot_avx2,       vsum_avx2,
        "avx2",
    };
    return table;
}

}  // namespace obfugraph::kernels

#endif  // x86-64
