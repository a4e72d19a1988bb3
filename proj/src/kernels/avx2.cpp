// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma
// and only entered after a runtime CPU check.

#include <immintrin.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "deepbf/kernels.hpp"

namespace deepbf::kernels {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// One output row, columns [o, out), starting from the bias.
inline void dense_row_tail(const double* xr, std::size_t in, const double* w, const double* b, std::size_t out,
                           std::size_t o, double* yr) {
    for (; o + 4 <= out; o += 4) {
        __m256d acc = _mm256_loadu_pd(b + o);
        for (std::size_t i = 0; i < in; ++i)
            acc = _mm256_fmadd_pd(_mm256_set1_pd(xr[i]), _mm256_loadu_pd(w + i * out + o), acc);
        _mm256_storeu_pd(yr + o, acc);
    }
    for (; o < out; ++o) {
        double acc = b[o];
        for (std::size_t i = 0; i < in; ++i) acc = std::fma(xr[i], w[i * out + o], acc);
        yr[o] = acc;
    }
}

void dense_forward(const double* x, std::size_t rows, std::size_t in, const double* w, const double* b,
                   std::size_t out, double* y) {
    std::size_t r = 0;
    // Two rows share every weight load; 16 outputs per row live in registers.
    for (; r + 2 <= rows; r += 2) {
        const double* x0 = x + r * in;
        const double* x1 = x0 + in;
        double* y0 = y + r * out;
        double* y1 = y0 + out;
        std::size_t o = 0;
        for (; o + 16 <= out; o += 16) {
            __m256d a0 = _mm256_loadu_pd(b + o), a1 = _mm256_loadu_pd(b + o + 4);
            __m256d a2 = _mm256_loadu_pd(b + o + 8), a3 = _mm256_loadu_pd(b + o + 12);
            __m256d c0 = a0, c1 = a1, c2 = a2, c3 = a3;
            for (std::size_t i = 0; i < in; ++i) {
                const double* wi = w + i * out + o;
                const __m256d w0 = _mm256_loadu_pd(wi), w1 = _mm256_loadu_pd(wi + 4);
                const __m256d w2 = _mm256_loadu_pd(wi + 8), w3 = _mm256_loadu_pd(wi + 12);
                const __m256d s0 = _mm256_set1_pd(x0[i]);
                const __m256d s1 = _mm256_set1_pd(x1[i]);
                a0 = _mm256_fmadd_pd(s0, w0, a0);
                a1 = _mm256_fmadd_pd(s0, w1, a1);
                a2 = _mm256_fmadd_pd(s0, w2, a2);
                a3 = _mm256_fmadd_pd(s0, w3, a3);
                c0 = _mm256_fmadd_pd(s1, w0, c0);
                c1 = _mm256_fmadd_pd(s1, w1, c1);
                c2 = _mm256_fmadd_pd(s1, w2, c2);
                c3 = _mm256_fmadd_pd(s1, w3, c3);
            }
            _mm256_storeu_pd(y0 + o, a0);
            _mm256_storeu_pd(y0 + o + 4, a1);
            _mm256_storeu_pd(y0 + o + 8, a2);
            _mm256_storeu_pd(y0 + o + 12, a3);
            _mm256_storeu_pd(y1 + o, c0);
            _mm256_storeu_pd(y1 + o + 4, c1);
            _mm256_storeu_pd(y1 + o + 8, c2);
            _mm256_storeu_pd(y1 + o + 12, c3);
        }
        dense_row_tail(x0, in, w, b, out, o, y0);
        dense_row_tail(x1, in, w, b, out, o, y1);
    }
    for (; r < rows; ++r) dense_row_tail(x + r * in, in, w, b, out, 0, y + r * out);
}

// y = x * wt for a row-major wt (in x out), no bias; the forward tiling.
void matmul(const double* x, std::size_t rows, std::size_t in, const double* wt, std::size_t out, double* y,
            const double* zeros) {
    dense_forward(x, rows, in, wt, zeros, out, y);
}

void dense_backward(const double* x, const double* dy, std::size_t rows, std::size_t in, std::size_t out,
                    const double* w, double* dx, double* dw, double* db) {
    // db = column sums of dy.
    {
        std::size_t o = 0;
        for (; o + 4 <= out; o += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t r = 0; r < rows; ++r) acc = _mm256_add_pd(acc, _mm256_loadu_pd(dy + r * out + o));
            _mm256_storeu_pd(db + o, acc);
        }
        for (; o < out; ++o) {
            double acc = 0.0;
            for (std::size_t r = 0; r < rows; ++r) acc += dy[r * out + o];
            db[o] = acc;
        }
    }
    // dw = x' dy in 4 x 8 register tiles.
    std::size_t i = 0;
    for (; i + 4 <= in; i += 4) {
        std::size_t o = 0;
        for (; o + 8 <= out; o += 8) {
            __m256d a00 = _mm256_setzero_pd(), a01 = a00, a10 = a00, a11 = a00;
            __m256d a20 = a00, a21 = a00, a30 = a00, a31 = a00;
            for (std::size_t r = 0; r < rows; ++r) {
                const double* dyr = dy + r * out + o;
                const double* xr = x + r * in + i;
                const __m256d d0 = _mm256_loadu_pd(dyr), d1 = _mm256_loadu_pd(dyr + 4);
                __m256d s = _mm256_set1_pd(xr[0]);
                a00 = _mm256_fmadd_pd(s, d0, a00);
                a01 = _mm256_fmadd_pd(s, d1, a01);
                s = _mm256_set1_pd(xr[1]);
                a10 = _mm256_fmadd_pd(s, d0, a10);
                a11 = _mm256_fmadd_pd(s, d1, a11);
                s = _mm256_set1_pd(xr[2]);
                a20 = _mm256_fmadd_pd(s, d0, a20);
                a21 = _mm256_fmadd_pd(s, d1, a21);
                s = _mm256_set1_pd(xr[3]);
                a30 = _mm256_fmadd_pd(s, d0, a30);
                a31 = _mm256_fmadd_pd(s, d1, a31);
            }
            double* d = dw + i * out + o;
            _mm256_storeu_pd(d, a00);
            _mm256_storeu_pd(d + 4, a01);
            _mm256_storeu_pd(d + out, a10);
            _mm256_storeu_pd(d + out + 4, a11);
            _mm256_storeu_pd(d + 2 * out, a20);
            _mm256_storeu_pd(d + 2 * out + 4, a21);
            _mm256_storeu_pd(d + 3 * out, a30);
            _mm256_storeu_pd(d + 3 * out + 4, a31);
        }
        for (; o < out; ++o)
            for (std::size_t ii = i; ii < i + 4; ++ii) {
                double acc = 0.0;
                for (std::size_t r = 0; r < rows; ++r) acc = std::fma(x[r * in + ii], dy[r * out + o], acc);
                dw[ii * out + o] = acc;
            }
    }
    for (; i < in; ++i) {
        double* dwi = dw + i * out;
        std::size_t o = 0;
        for (; o + 4 <= out; o += 4) {
            __m256d a0 = _mm256_setzero_pd();
            for (std::size_t r = 0; r < rows; ++r)
                a0 = _mm256_fmadd_pd(_mm256_set1_pd(x[r * in + i]), _mm256_loadu_pd(dy + r * out + o), a0);
            _mm256_storeu_pd(dwi + o, a0);
        }
        for (; o < out; ++o) {
            double acc = 0.0;
            for (std::size_t r = 0; r < rows; ++r) acc = std::fma(x[r * in + i], dy[r * out + o], acc);
            dwi[o] = acc;
        }
    }
    if (dx == nullptr) return;
    // dx = dy w': transpose w once, then reuse the forward tiling.
    thread_local std::vector<double> wt, zeros;
    wt.resize(in * out);
    zeros.assign(in, 0.0);
    for (std::size_t a = 0; a < in; ++a)
        for (std::size_t b = 0; b < out; ++b) wt[b * in + a] = w[a * out + b];
    matmul(dy, rows, out, wt.data(), in, dx, zeros.data());
}

// Mirrors the scalar update operation for operation (no fusing), so both
// variants round identically.
void adam_update(std::size_t n, double* params, const double* grads, double* m, double* v,
                 const AdamCoefficients& c) {
    const __m256d b1 = _mm256_set1_pd(c.beta1), b2 = _mm256_set1_pd(c.beta2);
    const __m256d omb1 = _mm256_set1_pd(1.0 - c.beta1), omb2 = _mm256_set1_pd(1.0 - c.beta2);
    const __m256d bc1 = _mm256_set1_pd(c.bias_correction1), bc2 = _mm256_set1_pd(c.bias_correction2);
    const __m256d lr = _mm256_set1_pd(c.lr), eps = _mm256_set1_pd(c.epsilon);
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        const __m256d g = _mm256_loadu_pd(grads + k);
        const __m256d mk = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + k)), _mm256_mul_pd(omb1, g));
        const __m256d vk =
            _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + k)), _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
        _mm256_storeu_pd(m + k, mk);
        _mm256_storeu_pd(v + k, vk);
        const __m256d m_hat = _mm256_div_pd(mk, bc1);
        const __m256d v_hat = _mm256_div_pd(vk, bc2);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
        _mm256_storeu_pd(params + k, _mm256_sub_pd(_mm256_loadu_pd(params + k), step));
    }
    for (; k < n; ++k) {
        const double g = grads[k];
        m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g;
        v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * (g * g);
        const double m_hat = m[k] / c.bias_correction1;
        const double v_hat = v[k] / c.bias_correction2;
        params[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
}

void sq_distances(const double* query, const double* refs, std::size_t count, std::size_t dim, double* out) {
    if (dim < 4) {
        for (std::size_t j = 0; j < count; ++j) {
            const double* rj = refs + j * dim;
            double acc = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = query[d] - rj[d];
                acc += diff * diff;
            }
            out[j] = acc;
        }
        return;
    }
    for (std::size_t j = 0; j < count; ++j) {
        const double* rj = refs + j * dim;
        __m256d acc = _mm256_setzero_pd();
        std::size_t d = 0;
        for (; d + 4 <= dim; d += 4) {
            const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(query + d), _mm256_loadu_pd(rj + d));
            acc = _mm256_fmadd_pd(diff, diff, acc);
        }
        double s = hsum(acc);
        for (; d < dim; ++d) {
            const double diff = query[d] - rj[d];
            s = std::fma(diff, diff, s);
        }
        out[j] = s;
    }
}

} // namespace

const KernelTable& avx2_kernel_table() {
    static const KernelTable table{"avx2", dense_forward, dense_backward, adam_update, sq_distances};
    return table;
}

} // namespace deepbf::kernels
