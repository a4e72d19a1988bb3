#include <cstdlib>
#include <iostream>
#include <string>

#include "deepbf/kernels.hpp"

namespace deepbf::kernels {

#if defined(DEEPBF_HAVE_AVX2)
const KernelTable& avx2_kernel_table();
#endif

const KernelTable* avx2_kernels() {
#if defined(DEEPBF_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &avx2_kernel_table() : nullptr;
#else
    return nullptr;
#endif
}

std::vector<const KernelTable*> available() {
    std::vector<const KernelTable*> out{&scalar_kernels()};
    if (const KernelTable* t = avx2_kernels()) out.push_back(t);
    return out;
}

const KernelTable* find(std::string_view name) {
    for (const KernelTable* t : available())
        if (name == t->name) return t;
    return nullptr;
}

namespace {

const KernelTable& choose() {
    if (const char* env = std::getenv("DEEPBF_SIMD"); env != nullptr && *env != '\0') {
        if (const KernelTable* t = find(env)) return *t;
        std::cerr << "deepbf: DEEPBF_SIMD=" << env << " is not available here; using automatic selection\n";
    }
    if (const KernelTable* t = avx2_kernels()) return *t;
    return scalar_kernels();
}

} // namespace

const KernelTable& active() {
    static const KernelTable& table = choose();
    return table;
}

} // namespace deepbf::kernels
