#pragma once

// Columnar network: per-column 2-layer ReLU feature extractors feeding
// scalar recurrent states through a masked cell. Three cell variants share
// the column machinery:
//   AdditiveTanh: h_i(t) = h_i(t-1) + tanh(u_i.f(t) + r_i.h(t-1))
//   Static:      h_i(t) = tanh(u_i.f(t))
//   GruColumn:   scalar per-column GRU gates over the same masked rows
// Parameters are grouped per column (theta_i = {phi_i, row i of the cell
// matrices}); the flat canonical ordering is columns ascending, within a
// column W1, b1, W2, b2, U-row, R-row, then gate rows (Uz, Rz, Ur, Rr), and
// the prediction weights w after all groups.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "colnn/numkit.hpp"

namespace colnn {

enum class CellKind { AdditiveTanh, Static, GruColumn };

inline std::string cell_name(CellKind k) {
    switch (k) {
        case CellKind::AdditiveTanh: return "additive";
        case CellKind::Static: return "static";
        case CellKind::GruColumn: return "gru_column";
    }
    return "?";
}

inline CellKind cell_from_name(const std::string& s) {
    if (s == "additive" || s == "additive_tanh") return CellKind::AdditiveTanh;
    if (s == "static") return CellKind::Static;
    if (s == "gru_column" || s == "gru") return CellKind::GruColumn;
    throw std::invalid_argument("unknown cell kind: " + s);
}

struct NetConfig {
    int columns = 20;       // C
    int width = 50;         // W: units per layer, feature length
    int input_dim = 50;
    CellKind cell = CellKind::AdditiveTanh;
    double lateral_s = 0.0;  // percent: 10 means 10%
    bool mask_r = true;      // mask off-diagonal R entries with the same ratio

    void validate() const {
        if (columns < 1 || width < 1 || input_dim < 1) {
            throw std::invalid_argument("NetConfig: columns, width, input_dim must be >= 1");
        }
        if (lateral_s < 0.0) throw std::invalid_argument("NetConfig: lateral_s must be >= 0");
    }
};

struct ColumnParams {
    Matrix w1;  // W x (input_dim + 1); last input slot carries h_i(t-1)
    Vector b1;
    Matrix w2;  // W x W
    Vector b2;
};

struct CellParams {
    Matrix u;  // C x (C*W); row i concatenates the blocks U_i1..U_iC
    Matrix r;  // C x C
    // GruColumn only: update (z) and reset (r) gate rows of the same shapes.
    Matrix uz, rz, ur, rr;
};

struct LateralMask {
    Matrix u_mask;  // 0/1, shape of U
    Matrix r_mask;  // 0/1, shape of R
};

// Number of unmasked lateral entries per U row for ratio s (n = W own entries).
inline int lateral_count_u(double s_percent, int width) {
    return static_cast<int>(std::lround(s_percent * width / 100.0));
}

// R rows have a single own connection (the diagonal), so the lateral count is
// round(s/100).
inline int lateral_count_r(double s_percent) {
    return static_cast<int>(std::lround(s_percent / 100.0));
}

inline LateralMask sample_mask(const NetConfig& cfg, RngStream rng) {
    cfg.validate();
    const int c = cfg.columns, w = cfg.width;
    LateralMask mask{Matrix(c, c * w, 0.0), Matrix(c, c, 0.0)};
    if (c == 1) {
        // no off-diagonal blocks exist; the ratio is vacuous
        for (int k = 0; k < w; ++k) mask.u_mask.at(0, k) = 1.0;
        mask.r_mask.at(0, 0) = 1.0;
        return mask;
    }
    const int m = lateral_count_u(cfg.lateral_s, w);
    const int m_r = cfg.mask_r ? lateral_count_r(cfg.lateral_s) : c - 1;
    if (m > (c - 1) * w) {
        throw std::invalid_argument("sample_mask: requested " + std::to_string(m) +
                                    " lateral connections per row but only " +
                                    std::to_string((c - 1) * w) + " off-diagonal slots exist");
    }
    if (cfg.mask_r && m_r > c - 1) {
        throw std::invalid_argument("sample_mask: requested " + std::to_string(m_r) +
                                    " lateral R entries per row but only " + std::to_string(c - 1) +
                                    " off-diagonal slots exist");
    }
    for (int i = 0; i < c; ++i) {
        for (int k = 0; k < w; ++k) mask.u_mask.at(i, i * w + k) = 1.0;  // own block
        mask.r_mask.at(i, i) = 1.0;
        // choose m off-diagonal U slots uniformly without replacement
        std::vector<int> slots;
        slots.reserve(static_cast<size_t>(c - 1) * w);
        for (int j = 0; j < c * w; ++j) {
            if (j < i * w || j >= (i + 1) * w) slots.push_back(j);
        }
        for (int k = 0; k < m; ++k) {
            const int pick = k + static_cast<int>(rng.below(slots.size() - k));
            std::swap(slots[k], slots[pick]);
            mask.u_mask.at(i, slots[k]) = 1.0;
        }
        std::vector<int> rslots;
        for (int j = 0; j < c; ++j) {
            if (j != i) rslots.push_back(j);
        }
        const int take = std::min<int>(m_r, static_cast<int>(rslots.size()));
        for (int k = 0; k < take; ++k) {
            const int pick = k + static_cast<int>(rng.below(rslots.size() - k));
            std::swap(rslots[k], rslots[pick]);
            mask.r_mask.at(i, rslots[k]) = 1.0;
        }
    }
    return mask;
}

struct ColumnarNetwork {
    NetConfig cfg;
    std::vector<ColumnParams> columns;
    CellParams cell;
    LateralMask mask;
    Vector w;  // prediction weights, length C

    bool is_gru() const { return cfg.cell == CellKind::GruColumn; }

    int phi_size() const {
        const int w_ = cfg.width, d = cfg.input_dim;
        return w_ * (d + 1) + w_ + w_ * w_ + w_;
    }
    int row_block_size() const {
        const int base = cfg.columns * cfg.width + cfg.columns;
        return is_gru() ? 3 * base : base;
    }
    int group_size() const { return phi_size() + row_block_size(); }
    int group_offset(int i) const { return i * group_size(); }
    int theta_size() const { return cfg.columns * group_size(); }
    int group_of(int flat_index) const { return flat_index / group_size(); }

    // offsets inside a group
    int off_w1() const { return 0; }
    int off_b1() const { return cfg.width * (cfg.input_dim + 1); }
    int off_w2() const { return off_b1() + cfg.width; }
    int off_b2() const { return off_w2() + cfg.width * cfg.width; }
    int off_u() const { return off_b2() + cfg.width; }
    int off_r() const { return off_u() + cfg.columns * cfg.width; }
    int off_uz() const { return off_r() + cfg.columns; }
    int off_rz() const { return off_uz() + cfg.columns * cfg.width; }
    int off_ur() const { return off_rz() + cfg.columns; }
    int off_rr() const { return off_ur() + cfg.columns * cfg.width; }

    Vector theta_flat() const {
        Vector out(theta_size(), 0.0);
        for (int i = 0; i < cfg.columns; ++i) write_group(i, out.data() + group_offset(i));
        return out;
    }
    void set_theta_flat(const Vector& flat) {
        if (static_cast<int>(flat.size()) != theta_size()) {
            throw std::invalid_argument("set_theta_flat: length mismatch");
        }
        for (int i = 0; i < cfg.columns; ++i) read_group(i, flat.data() + group_offset(i));
    }

    void write_group(int i, double* dst) const {
        const ColumnParams& p = columns[i];
        const int cw = cfg.columns * cfg.width, c = cfg.columns;
        double* q = dst;
        for (double x : p.w1.v) *q++ = x;
        for (double x : p.b1) *q++ = x;
        for (double x : p.w2.v) *q++ = x;
        for (double x : p.b2) *q++ = x;
        for (int l = 0; l < cw; ++l) *q++ = cell.u.at(i, l);
        for (int j = 0; j < c; ++j) *q++ = cell.r.at(i, j);
        if (is_gru()) {
            for (int l = 0; l < cw; ++l) *q++ = cell.uz.at(i, l);
            for (int j = 0; j < c; ++j) *q++ = cell.rz.at(i, j);
            for (int l = 0; l < cw; ++l) *q++ = cell.ur.at(i, l);
            for (int j = 0; j < c; ++j) *q++ = cell.rr.at(i, j);
        }
    }
    void read_group(int i, const double* src) {
        ColumnParams& p = columns[i];
        const int cw = cfg.columns * cfg.width, c = cfg.columns;
        const double* q = src;
        for (double& x : p.w1.v) x = *q++;
        for (double& x : p.b1) x = *q++;
        for (double& x : p.w2.v) x = *q++;
        for (double& x : p.b2) x = *q++;
        for (int l = 0; l < cw; ++l) cell.u.at(i, l) = *q++;
        for (int j = 0; j < c; ++j) cell.r.at(i, j) = *q++;
        if (is_gru()) {
            for (int l = 0; l < cw; ++l) cell.uz.at(i, l) = *q++;
            for (int j = 0; j < c; ++j) cell.rz.at(i, j) = *q++;
            for (int l = 0; l < cw; ++l) cell.ur.at(i, l) = *q++;
            for (int j = 0; j < c; ++j) cell.rr.at(i, j) = *q++;
        }
    }
};

// rng fork channels, fixed so parallel construction is order-insensitive
namespace rng_channel {
constexpr uint64_t kColumnBase = 1000;
constexpr uint64_t kCellU = 2000;
constexpr uint64_t kCellR = 2001;
constexpr uint64_t kCellUz = 2002;
constexpr uint64_t kCellRz = 2003;
constexpr uint64_t kCellUr = 2004;
constexpr uint64_t kCellRr = 2005;
constexpr uint64_t kHead = 3000;
constexpr uint64_t kMask = 4000;
}  // namespace rng_channel

inline ColumnarNetwork build_network(const NetConfig& cfg, const RngStream& rng) {
    cfg.validate();
    ColumnarNetwork net;
    net.cfg = cfg;
    const int c = cfg.columns, w = cfg.width, d = cfg.input_dim;
    net.columns.resize(c);
    for (int i = 0; i < c; ++i) {
        RngStream cr = rng.fork(rng_channel::kColumnBase + i);
        net.columns[i].w1 = xavier_init(w, d + 1, cr);
        net.columns[i].b1.assign(w, 0.0);
        net.columns[i].w2 = xavier_init(w, w, cr);
        net.columns[i].b2.assign(w, 0.0);
    }
    {
        RngStream r = rng.fork(rng_channel::kCellU);
        net.cell.u = xavier_init(c, c * w, r);
    }
    {
        RngStream r = rng.fork(rng_channel::kCellR);
        net.cell.r = xavier_init(c, c, r);
    }
    if (cfg.cell == CellKind::GruColumn) {
        RngStream r1 = rng.fork(rng_channel::kCellUz);
        net.cell.uz = xavier_init(c, c * w, r1);
        RngStream r2 = rng.fork(rng_channel::kCellRz);
        net.cell.rz = xavier_init(c, c, r2);
        RngStream r3 = rng.fork(rng_channel::kCellUr);
        net.cell.ur = xavier_init(c, c * w, r3);
        RngStream r4 = rng.fork(rng_channel::kCellRr);
        net.cell.rr = xavier_init(c, c, r4);
    }
    {
        RngStream r = rng.fork(rng_channel::kHead);
        Matrix hw = xavier_init(1, c, r);
        net.w = hw.v;
    }
    net.mask = sample_mask(cfg, rng.fork(rng_channel::kMask));
    return net;
}

struct ColumnCache {
    Vector a1;  // pre-activation of layer 1
    Vector z1;  // relu(a1)
    Vector a2;  // pre-activation of layer 2 (f = relu(a2))
};

// f_i = relu(W2 relu(W1 [x; h_i_prev] + b1) + b2)
inline Vector column_forward(const ColumnParams& p, const Vector& x, double h_i_prev,
                             ColumnCache& cache) {
    const int w = p.w1.rows;
    const int d = p.w1.cols - 1;
    if (static_cast<int>(x.size()) != d) throw std::invalid_argument("column_forward: x length mismatch");
    cache.a1.assign(w, 0.0);
    for (int u = 0; u < w; ++u) {
        double s = dot(p.w1.row(u), x.data(), d);
        s += p.w1.at(u, d) * h_i_prev;
        cache.a1[u] = s + p.b1[u];
    }
    opcount::add(3 * static_cast<uint64_t>(w));
    cache.z1.assign(w, 0.0);
    for (int u = 0; u < w; ++u) cache.z1[u] = cache.a1[u] > 0.0 ? cache.a1[u] : 0.0;
    cache.a2.assign(w, 0.0);
    for (int u = 0; u < w; ++u) cache.a2[u] = dot(p.w2.row(u), cache.z1.data(), w) + p.b2[u];
    opcount::add(static_cast<uint64_t>(w));
    Vector f(w, 0.0);
    for (int u = 0; u < w; ++u) f[u] = cache.a2[u] > 0.0 ? cache.a2[u] : 0.0;
    return f;
}

struct CellCache {
    // AdditiveTanh / Static: tanh arguments per state.
    Vector pre;
    // GruColumn: gate pre-activations and values per state.
    Vector az, z, ar, rg, an, n;
    Vector s_rec;  // (r_mask . R)_i . h_prev, reused by the gru backward
};

inline double masked_row_dot(const Matrix& m, const Matrix& mask, int row, const Vector& x) {
    double s = 0.0;
    const double* mr = m.row(row);
    const double* kr = mask.row(row);
    for (size_t l = 0; l < x.size(); ++l) s += kr[l] * mr[l] * x[l];
    opcount::add(3 * x.size());
    return s;
}

inline Vector cell_forward_additive(const CellParams& cell, const LateralMask& mask,
                                    const Vector& f_all, const Vector& h_prev, CellCache& cache) {
    const int c = cell.u.rows;
    if (static_cast<int>(f_all.size()) != cell.u.cols || static_cast<int>(h_prev.size()) != c) {
        throw std::invalid_argument("cell_forward_additive: shape mismatch");
    }
    cache.pre.assign(c, 0.0);
    Vector h(c, 0.0);
    for (int i = 0; i < c; ++i) {
        const double pre =
            masked_row_dot(cell.u, mask.u_mask, i, f_all) + masked_row_dot(cell.r, mask.r_mask, i, h_prev);
        cache.pre[i] = pre;
        h[i] = h_prev[i] + std::tanh(pre);
    }
    return h;
}

inline Vector cell_forward_static(const CellParams& cell, const LateralMask& mask,
                                  const Vector& f_all, CellCache& cache) {
    const int c = cell.u.rows;
    if (static_cast<int>(f_all.size()) != cell.u.cols) {
        throw std::invalid_argument("cell_forward_static: shape mismatch");
    }
    cache.pre.assign(c, 0.0);
    Vector h(c, 0.0);
    for (int i = 0; i < c; ++i) {
        const double pre = masked_row_dot(cell.u, mask.u_mask, i, f_all);
        cache.pre[i] = pre;
        h[i] = std::tanh(pre);
    }
    return h;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar per-column GRU; update-gate convention h = (1-z) h_prev + z n, so
// z = 0 leaves the state unchanged. The reset gate multiplies only the
// recurrent R.h_prev term of the candidate.
inline Vector cell_forward_gru(const CellParams& cell, const LateralMask& mask, const Vector& f_all,
                               const Vector& h_prev, CellCache& cache) {
    const int c = cell.u.rows;
    if (static_cast<int>(f_all.size()) != cell.u.cols || static_cast<int>(h_prev.size()) != c) {
        throw std::invalid_argument("cell_forward_gru: shape mismatch");
    }
    cache.az.assign(c, 0.0);
    cache.z.assign(c, 0.0);
    cache.ar.assign(c, 0.0);
    cache.rg.assign(c, 0.0);
    cache.an.assign(c, 0.0);
    cache.n.assign(c, 0.0);
    cache.s_rec.assign(c, 0.0);
    Vector h(c, 0.0);
    for (int i = 0; i < c; ++i) {
        const double az = masked_row_dot(cell.uz, mask.u_mask, i, f_all) +
                          masked_row_dot(cell.rz, mask.r_mask, i, h_prev);
        const double ar = masked_row_dot(cell.ur, mask.u_mask, i, f_all) +
                          masked_row_dot(cell.rr, mask.r_mask, i, h_prev);
        const double z = sigmoid(az);
        const double rg = sigmoid(ar);
        const double s_rec = masked_row_dot(cell.r, mask.r_mask, i, h_prev);
        const double an = masked_row_dot(cell.u, mask.u_mask, i, f_all) + rg * s_rec;
        const double n = std::tanh(an);
        cache.az[i] = az;
        cache.z[i] = z;
        cache.ar[i] = ar;
        cache.rg[i] = rg;
        cache.an[i] = an;
        cache.n[i] = n;
        cache.s_rec[i] = s_rec;
        h[i] = (1.0 - z) * h_prev[i] + z * n;
    }
    return h;
}

inline double predict(const Vector& w, const Vector& h) {
    if (w.size() != h.size()) throw std::invalid_argument("predict: length mismatch");
    return dot(w, h);
}

// Everything a backward pass or replay needs from one step.
struct StepRecord {
    Vector x;
    Vector h_prev;
    Vector h;
    std::vector<ColumnCache> cols;
    Vector f_all;
    CellCache cell;
    double y = 0.0;
    double y_star = 0.0;
    double delta = 0.0;
    Vector w_step;  // prediction weights used at this step
};

using StepTape = std::vector<StepRecord>;

// One forward step through all columns, the configured cell, and the head.
// The caller fills y_star/delta afterwards (they need the target).
inline StepRecord rnn_step(const ColumnarNetwork& net, const Vector& x, const Vector& h_prev,
                           const Vector& w) {
    const int c = net.cfg.columns, wdt = net.cfg.width;
    StepRecord rec;
    rec.x = x;
    rec.h_prev = h_prev;
    rec.cols.resize(c);
    rec.f_all.assign(static_cast<size_t>(c) * wdt, 0.0);
    for (int i = 0; i < c; ++i) {
        Vector f = column_forward(net.columns[i], x, h_prev[i], rec.cols[i]);
        for (int u = 0; u < wdt; ++u) rec.f_all[static_cast<size_t>(i) * wdt + u] = f[u];
    }
    switch (net.cfg.cell) {
        case CellKind::AdditiveTanh:
            rec.h = cell_forward_additive(net.cell, net.mask, rec.f_all, h_prev, rec.cell);
            break;
        case CellKind::Static:
            rec.h = cell_forward_static(net.cell, net.mask, rec.f_all, rec.cell);
            break;
        case CellKind::GruColumn:
            rec.h = cell_forward_gru(net.cell, net.mask, rec.f_all, h_prev, rec.cell);
            break;
    }
    rec.w_step = w;
    rec.y = predict(w, rec.h);
    return rec;
}

}  // namespace colnn
