#pragma once

#include <cstddef>
#include <string>

// Dense double-precision kernels behind the tensor engine. Every entry has
// a scalar reference implementation; SIMD variants (AVX2 on x86-64, NEON on
// aarch64) are selected once at startup from CPU capabilities and can be
// overridden with set_isa() or the OBFUGRAPH_ISA environment variable
// (values: scalar, avx2, neon). All matrices are row-major.
//
// SIMD variants may reassociate additions and contract to FMA, so results
// can differ from the scalar reference in the last bits; the equivalence
// suite bounds that difference. Within one process the selected table is
// fixed, which keeps seeded runs bit-reproducible.

namespace obfugraph::kernels {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
    // C (m x n) += A (m x k) * B (k x n)
    void (*matmul_nn)(double* c, const double* a, const double* b,
                      size_t m, size_t k, size_t n);
    // C (m x n) += A^T * B, A stored (k x m)
    void (*matmul_tn)(double* c, const double* a, const double* b,
                      size_t m, size_t k, size_t n);
    // C (m x n) += A * B^T, B stored (n x k)
    void (*matmul_nt)(double* c, const double* a, const double* b,
                      size_t m, size_t k, size_t n);
    // y += alpha * x
    void (*axpy)(double* y, double alpha, const double* x, size_t n);
    // y += x
    void (*vadd)(double* y, const double* x, size_t n);
    // y *= alpha
    void (*vscale)(double* y, double alpha, size_t n);
    // out[i] = max(in[i], 0)
    void (*relu_forward)(double* out, const double* in, size_t n);
    // dx[i] += dy[i] * (x[i] > 0)
    void (*relu_backward)(double* dx, const double* x, const double* dy, size_t n);
    // out[i] += a[i] * b[i]
    void (*vmuladd)(double* out, const double* a, const double* b, size_t n);
    double (*dot)(const double* a, const double* b, size_t n);
    double (*vsum)(const double* x, size_t n);
    const char* name;
};

const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif
#if defined(__aarch64__)
const KernelTable& neon_table();
#endif

// Active table for this process. First call resolves the best supported
// ISA (honoring OBFUGRAPH_ISA); afterwards the choice is stable unless
// set_isa() changes it.
const KernelTable& active();
Isa active_isa();
Isa best_supported();
bool isa_supported(Isa isa);
// Returns false (and leaves the table unchanged) if unsupported here.
bool set_isa(Isa isa);
std::string isa_name(Isa isa);

}  // namespace obfugraph::kernels
