#include "obfugraph/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace obfugraph::kernels {
namespace {

std::atomic<const KernelTable*> g_active{nullptr};

Isa parse_isa_env(const char* v, Isa fallback) {
    if (!v) return fallback;
    if (std::strcmp(v, "scalar") == 0) return Isa::scalar;
    if (std::strcmp(v, "avx2") == 0) return Isa::avx2;
    if (std::strcmp(v, "neon") == 0) return Isa::neon;
    return fallback;
}

const KernelTable* table_for(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return &scalar_table();
        case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return &avx2_table();
#else
            return nullptr;
#endif
        case Isa::neon:
#if defined(__aarch64__)
            return &neon_table();
#else
            return nullptr;
#endif
    }
    return nullptr;
}

const KernelTable* resolve_initial() {
    Isa wanted = parse_isa_env(std::getenv("OBFUGRAPH_ISA"), best_supported());
    if (!isa_supported(wanted)) wanted = best_supported();
    return table_for(wanted);
}

}  // namespace

bool isa_supported(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::neon:
#if defined(__aarch64__)
            return true;  // NEON is mandatory on aarch64
#else
            return false;
#endif
    }
    return false;
}

Isa best_supported() {
    if (isa_supported(Isa::avx2)) return Isa::avx2;
    if (isa_supported(Isa::neon)) return Isa::neon;
    return Isa::scalar;
}

const KernelTable& active() {
    const KernelTable* t = g_active.load(std::memory_order_acquire);
    if (!t) {
        t = resolve_initial();
        g_active.store(t, std::memory_order_release);
    }
    return *t;
}

Isa active_isa() {
    const char* n = active().name;
    if (std::strcmp(n, "avx2") == 0) return Isa::avx2;
    if (std::strcmp(n, "neon") == 0) return Isa::neon;
    return Isa::scalar;
}

bool set_isa(Isa isa) {
    if (!isa_supported(isa)) return false;
    g_active.store(table_for(isa), std::memory_order_release);
    return true;
}

std::string isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "scalar";
}

}  // namespace obfugraph::kernels
