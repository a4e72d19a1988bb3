#pragma once

// Data-parallel inner loops behind the network and the ABC distance scans.
//
// Every kernel has a portable scalar reference and, where the target allows,
// an AVX2/FMA variant. The variant in use is chosen once at startup from the
// CPU features; DEEPBF_SIMD=scalar|avx2 overrides the choice. The variants
// are not bitwise identical (FMA and reassociated sums), so a run is only
// reproducible bit-for-bit on the same kernel set; the tests pin their
// agreement to a relative tolerance instead.

#include <cstddef>
#include <string_view>
#include <vector>

namespace deepbf::kernels {

struct AdamCoefficients {
    double lr;
    double beta1;
    double beta2;
    double bias_correction1; // 1 - beta1^t
    double bias_correction2; // 1 - beta2^t
    double epsilon;
};

struct KernelTable {
    const char* name;

    /// y[r, :] = b + x[r, :] * w for a row-major x (rows x in) and w (in x out).
    void (*dense_forward)(const double* x, std::size_t rows, std::size_t in, const double* w, const double* b,
                          std::size_t out, double* y);

    /// Gradients of a dense layer. dw (in x out) and db (out) are overwritten;
    /// dx (rows x in) is skipped when null.
    void (*dense_backward)(const double* x, const double* dy, std::size_t rows, std::size_t in, std::size_t out,
                           const double* w, double* dx, double* dw, double* db);

    /// In-place Adam update of n parameters.
    void (*adam_update)(std::size_t n, double* params, const double* grads, double* m, double* v,
                        const AdamCoefficients& c);

    /// out[j] = sum_d (query[d] - refs[j, d])^2 for a row-major refs (count x dim).
    void (*sq_distances)(const double* query, const double* refs, std::size_t count, std::size_t dim, double* out);
};

const KernelTable& scalar_kernels();

/// Null when the build has no AVX2 translation unit or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

/// Every kernel set usable on this machine, scalar first.
std::vector<const KernelTable*> available();

/// The kernel set used by the library.
const KernelTable& active();

/// Looks a kernel set up by name; null if unknown or unavailable.
const KernelTable* find(std::string_view name);

} // namespace deepbf::kernels
