#include <cmath>
#include <cstring>

#include "deepbf/kernels.hpp"

namespace deepbf::kernels {

namespace {

void dense_forward(const double* x, std::size_t rows, std::size_t in, const double* w, const double* b,
                   std::size_t out, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* yr = y + r * out;
        const double* xr = x + r * in;
        std::memcpy(yr, b, out * sizeof(double));
        for (std::size_t i = 0; i < in; ++i) {
            const double xi = xr[i];
            const double* wi = w + i * out;
            for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wi[o];
        }
    }
}

void dense_backward(const double* x, const double* dy, std::size_t rows, std::size_t in, std::size_t out,
                    const double* w, double* dx, double* dw, double* db) {
    std::memset(dw, 0, in * out * sizeof(double));
    std::memset(db, 0, out * sizeof(double));
    for (std::size_t r = 0; r < rows; ++r) {
        const double* dyr = dy + r * out;
        const double* xr = x + r * in;
        for (std::size_t o = 0; o < out; ++o) db[o] += dyr[o];
        for (std::size_t i = 0; i < in; ++i) {
            const double xi = xr[i];
            double* dwi = dw + i * out;
            for (std::size_t o = 0; o < out; ++o) dwi[o] += xi * dyr[o];
        }
        if (dx != nullptr) {
            double* dxr = dx + r * in;
            for (std::size_t i = 0; i < in; ++i) {
                const double* wi = w + i * out;
                double acc = 0.0;
                for (std::size_t o = 0; o < out; ++o) acc += dyr[o] * wi[o];
                dxr[i] = acc;
            }
        }
    }
}

void adam_update(std::size_t n, double* params, const double* grads, double* m, double* v,
                 const AdamCoefficients& c) {
    const double one_minus_b1 = 1.0 - c.beta1;
    const double one_minus_b2 = 1.0 - c.beta2;
    for (std::size_t k = 0; k < n; ++k) {
        const double g = grads[k];
        m[k] = c.beta1 * m[k] + one_minus_b1 * g;
        v[k] = c.beta2 * v[k] + one_minus_b2 * (g * g);
        const double m_hat = m[k] / c.bias_correction1;
        const double v_hat = v[k] / c.bias_correction2;
        params[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
}

void sq_distances(const double* query, const double* refs, std::size_t count, std::size_t dim, double* out) {
    for (std::size_t j = 0; j < count; ++j) {
        const double* rj = refs + j * dim;
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double diff = query[d] - rj[d];
            acc += diff * diff;
        }
        out[j] = acc;
    }
}

} // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{"scalar", dense_forward, dense_backward, adam_update, sq_distances};
    return table;
}

} // namespace deepbf::kernels
