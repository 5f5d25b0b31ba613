#pragma once

// Dense kernels, deterministic counter-based RNG streams, and weight
// initializers shared by every other module. All reductions accumulate in
// ascending index order so independently written reference loops compare
// bit-for-bit.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace colnn {

using Vector = std::vector<double>;

struct Matrix {
    int rows = 0;
    int cols = 0;
    Vector v;  // row-major

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), v(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
        if (r <= 0 || c <= 0) {
            throw std::invalid_argument("Matrix: dimensions must be positive");
        }
    }

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }
    size_t size() const { return v.size(); }
};

// Arithmetic-op accounting for the complexity-scaling checks. Thread-local so
// parallel seed workers do not pollute each other's counts.
namespace opcount {
inline uint64_t& counter() {
    thread_local uint64_t n = 0;
    return n;
}
inline void add(uint64_t n) { counter() += n; }
inline void reset() { counter() = 0; }
inline uint64_t get() { return counter(); }
}  // namespace opcount

inline double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    opcount::add(2 * static_cast<uint64_t>(n));
    return s;
}

inline double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    return dot(a.data(), b.data(), static_cast<int>(a.size()));
}

// out[r] = sum_c A[r][c] x[c], summed over ascending c.
inline void matvec(const Matrix& a, const Vector& x, Vector& out) {
    if (static_cast<int>(x.size()) != a.cols) throw std::invalid_argument("matvec: shape mismatch");
    out.assign(a.rows, 0.0);
    for (int r = 0; r < a.rows; ++r) {
        out[r] = dot(a.row(r), x.data(), a.cols);
    }
}

inline Vector matvec(const Matrix& a, const Vector& x) {
    Vector out;
    matvec(a, x, out);
    return out;
}

// out[c] = sum_r A[r][c] g[r], summed over ascending r.
inline void matvec_t(const Matrix& a, const Vector& g, Vector& out) {
    if (static_cast<int>(g.size()) != a.rows) throw std::invalid_argument("matvec_t: shape mismatch");
    out.assign(a.cols, 0.0);
    for (int c = 0; c < a.cols; ++c) {
        double s = 0.0;
        for (int r = 0; r < a.rows; ++r) s += a.at(r, c) * g[r];
        out[c] = s;
    }
    opcount::add(2 * static_cast<uint64_t>(a.rows) * a.cols);
}

// y += alpha * x
inline void axpy(double alpha, const double* x, double* y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
    opcount::add(2 * static_cast<uint64_t>(n));
}

inline void axpy(double alpha, const Vector& x, Vector& y) {
    if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
    axpy(alpha, x.data(), y.data(), static_cast<int>(x.size()));
}

// Counter-based stream: draw i of stream `key` is mix(key + (i+1)*GOLDEN),
// i.e. splitmix64 with O(1) jump-ahead. Forking derives an unrelated key from
// (key, child-id) alone, so fork trees are reproducible regardless of draw or
// fork order across workers. The construction is fixed; changing it changes
// every experiment's bytes.
struct RngStream {
    uint64_t key = 0;
    uint64_t ctr = 0;

    static constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    static uint64_t mix(uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    static RngStream from_seed(uint64_t seed) { return RngStream{mix(seed + kGolden), 0}; }

    RngStream fork(uint64_t child_id) const {
        return RngStream{mix(key ^ mix((child_id + 1) * 0xD2B74407B1CE6E93ULL)), 0};
    }

    uint64_t next_u64() {
        ++ctr;
        return mix(key + ctr * kGolden);
    }

    // Open interval (0, 1): (k + 0.5) / 2^53.
    double u01() { return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0); }

    double uniform(double lo, double hi) { return lo + u01() * (hi - lo); }

    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    int coin() { return static_cast<int>(next_u64() & 1ULL); }
};

// Entries uniform in (-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))).
inline Matrix xavier_init(int rows, int cols, RngStream& rng) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("xavier_init: dimensions must be >= 1");
    Matrix m(rows, cols);
    const double bound = std::sqrt(6.0 / (rows + cols));
    for (auto& e : m.v) e = rng.uniform(-bound, bound);
    return m;
}

// Entries uniform in (-sqrt(1/hidden_units), +sqrt(1/hidden_units)).
inline Matrix uniform_sqrtk_init(int rows, int cols, int hidden_units, RngStream& rng) {
    if (hidden_units < 1) throw std::invalid_argument("uniform_sqrtk_init: hidden_units must be >= 1");
    if (rows < 1 || cols < 1) throw std::invalid_argument("uniform_sqrtk_init: dimensions must be >= 1");
    Matrix m(rows, cols);
    const double bound = std::sqrt(1.0 / hidden_units);
    for (auto& e : m.v) e = rng.uniform(-bound, bound);
    return m;
}

// Generic central difference of a scalar function, used by gradient-check
// oracles. Exact (up to rounding) for quadratics.
template <typename Fn>
Vector central_diff(Fn&& fn, Vector x, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("central_diff: eps must be positive");
    Vector g(x.size(), 0.0);
    for (size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + eps;
        const double lp = fn(x);
        x[i] = keep - eps;
        const double lm = fn(x);
        x[i] = keep;
        g[i] = (lp - lm) / (2.0 * eps);
    }
    return g;
}

}  // namespace colnn
