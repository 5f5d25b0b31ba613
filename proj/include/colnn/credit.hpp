#pragma once

// Gradient machinery. The per-column local gradients come from one modified
// backward pass that blocks flow across lateral edges (h_j <- f_i and
// h_j <- h_i(t-1) for j != i), which is exactly what the Master-User trace
// recursion consumes. The exact oracles (full BPTT over the tape, truncated
// BPTT, dense RTRL, central finite differences) live here too; they share the
// column backward kernel but follow the complete unrolled graph.

#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "colnn/network.hpp"

namespace colnn {

using GradEstimate = Vector;  // flat, canonical theta ordering (w appended when requested)

// Backward through one column MLP from a seed on f. Accumulates parameter
// gradients into the group's phi region (layout [W1,b1,W2,b2] at dst) and
// returns the gradient w.r.t. the scalar h input slot.
inline double column_backward(const ColumnParams& p, const ColumnCache& cache, const Vector& x,
                              double h_prev_i, const double* g_f, double* dst) {
    const int w = p.w1.rows;
    const int d = p.w1.cols - 1;
    const int off_b1 = w * (d + 1);
    const int off_w2 = off_b1 + w;
    const int off_b2 = off_w2 + w * w;

    Vector g_a2(w, 0.0);
    for (int u = 0; u < w; ++u) g_a2[u] = cache.a2[u] > 0.0 ? g_f[u] : 0.0;
    for (int u = 0; u < w; ++u) {
        if (g_a2[u] == 0.0) continue;
        axpy(g_a2[u], cache.z1.data(), dst + off_w2 + static_cast<size_t>(u) * w, w);
        dst[off_b2 + u] += g_a2[u];
    }
    Vector g_a1(w, 0.0);
    for (int v = 0; v < w; ++v) {
        if (cache.a1[v] <= 0.0) continue;
        double s = 0.0;
        for (int u = 0; u < w; ++u) s += p.w2.at(u, v) * g_a2[u];
        g_a1[v] = s;
    }
    opcount::add(2 * static_cast<uint64_t>(w) * w);
    double g_h = 0.0;
    for (int v = 0; v < w; ++v) {
        if (g_a1[v] == 0.0) continue;
        axpy(g_a1[v], x.data(), dst + static_cast<size_t>(v) * (d + 1), d);
        dst[static_cast<size_t>(v) * (d + 1) + d] += g_a1[v] * h_prev_i;
        dst[off_b1 + v] += g_a1[v];
        g_h += p.w1.at(v, d) * g_a1[v];
    }
    opcount::add(4 * static_cast<uint64_t>(w));
    return g_h;
}

struct LocalGrads {
    std::vector<Vector> d_theta;  // per column, group-sized, canonical in-group layout
    Vector d_hprev;               // per column, dh_i(t)/dh_i(t-1)
};

namespace detail {

struct GruFactors {
    double gz_h;   // dh/daz
    double gn_h;   // dh/dan
    double gar_h;  // dh/dar
};

inline GruFactors gru_factors(const CellCache& cc, double h_prev_i, int i) {
    const double z = cc.z[i], n = cc.n[i], rg = cc.rg[i], s_rec = cc.s_rec[i];
    GruFactors f;
    f.gz_h = (n - h_prev_i) * z * (1.0 - z);
    f.gn_h = z * (1.0 - n * n);
    f.gar_h = f.gn_h * s_rec * rg * (1.0 - rg);
    return f;
}

}  // namespace detail

// Single modified backward pass: every {dh_i/dtheta_i(t)} and
// {dh_i(t)/dh_i(t-1)} in one sweep. Lateral stop-gradients are structural
// here: column i's seed is row i's own block, so no cross-column flow exists.
inline LocalGrads local_grads_single_pass(const ColumnarNetwork& net, const StepRecord& rec) {
    const int c = net.cfg.columns, w = net.cfg.width;
    const int cw = c * w;
    if (rec.f_all.empty() || rec.cols.empty()) throw std::runtime_error("local_grads: incomplete tape record");
    LocalGrads lg;
    lg.d_theta.assign(c, Vector(net.group_size(), 0.0));
    lg.d_hprev.assign(c, 0.0);
    const int off_u = net.off_u(), off_r = net.off_r();
    for (int i = 0; i < c; ++i) {
        Vector& g = lg.d_theta[i];
        Vector seed(w, 0.0);
        double d_hprev = 0.0;
        if (net.cfg.cell == CellKind::AdditiveTanh || net.cfg.cell == CellKind::Static) {
            const double tv = net.cfg.cell == CellKind::AdditiveTanh ? rec.h[i] - rec.h_prev[i] : rec.h[i];
            const double th = 1.0 - tv * tv;
            for (int l = 0; l < cw; ++l) {
                g[off_u + l] = net.mask.u_mask.at(i, l) != 0.0 ? th * rec.f_all[l] : 0.0;
            }
            opcount::add(static_cast<uint64_t>(cw));
            if (net.cfg.cell == CellKind::AdditiveTanh) {
                for (int j = 0; j < c; ++j) {
                    g[off_r + j] = net.mask.r_mask.at(i, j) != 0.0 ? th * rec.h_prev[j] : 0.0;
                }
                d_hprev = 1.0 + th * net.cell.r.at(i, i);
                opcount::add(static_cast<uint64_t>(c) + 2);
            }
            for (int u = 0; u < w; ++u) seed[u] = th * net.cell.u.at(i, i * w + u);
            opcount::add(static_cast<uint64_t>(w));
        } else {
            const auto f = detail::gru_factors(rec.cell, rec.h_prev[i], i);
            const double rg = rec.cell.rg[i];
            const int off_uz = net.off_uz(), off_rz = net.off_rz();
            const int off_ur = net.off_ur(), off_rr = net.off_rr();
            for (int l = 0; l < cw; ++l) {
                const double mk = net.mask.u_mask.at(i, l);
                if (mk == 0.0) continue;
                g[off_u + l] = f.gn_h * rec.f_all[l];
                g[off_uz + l] = f.gz_h * rec.f_all[l];
                g[off_ur + l] = f.gar_h * rec.f_all[l];
            }
            for (int j = 0; j < c; ++j) {
                const double mk = net.mask.r_mask.at(i, j);
                if (mk == 0.0) continue;
                g[off_r + j] = f.gn_h * rg * rec.h_prev[j];
                g[off_rz + j] = f.gz_h * rec.h_prev[j];
                g[off_rr + j] = f.gar_h * rec.h_prev[j];
            }
            opcount::add(4 * static_cast<uint64_t>(cw + c));
            // composed in the same order as the full adjoint so the per-state
            // oracle comparison is bit-exact
            d_hprev = (1.0 - rec.cell.z[i]) +
                      (f.gn_h * rg * net.cell.r.at(i, i) + f.gz_h * net.cell.rz.at(i, i) +
                       f.gar_h * net.cell.rr.at(i, i));
            for (int u = 0; u < w; ++u) {
                seed[u] = f.gn_h * net.cell.u.at(i, i * w + u) + f.gz_h * net.cell.uz.at(i, i * w + u) +
                          f.gar_h * net.cell.ur.at(i, i * w + u);
            }
            opcount::add(6 * static_cast<uint64_t>(w));
        }
        d_hprev += column_backward(net.columns[i], rec.cols[i], rec.x, rec.h_prev[i], seed.data(), g.data());
        lg.d_hprev[i] = d_hprev;
    }
    return lg;
}

struct MasterUserTrace {
    std::vector<Vector> t;  // per column, group-sized

    static MasterUserTrace zeros(const ColumnarNetwork& net) {
        MasterUserTrace tr;
        tr.t.assign(net.cfg.columns, Vector(net.group_size(), 0.0));
        return tr;
    }
};

// T_i <- dh_i/dtheta_i(t) + dh_i(t)/dh_i(t-1) * T_i
inline void master_user_update(MasterUserTrace& trace, const LocalGrads& lg) {
    for (size_t i = 0; i < trace.t.size(); ++i) {
        Vector& t = trace.t[i];
        const Vector& d = lg.d_theta[i];
        const double s = lg.d_hprev[i];
        for (size_t k = 0; k < t.size(); ++k) t[k] = d[k] + s * t[k];
        opcount::add(2 * t.size());
    }
}

// Group block i of the estimate is -delta * w_i * T_i; optional w block is the
// plain LMS gradient -delta * h.
inline GradEstimate master_user_credit(const ColumnarNetwork& net, const MasterUserTrace& trace,
                                       double delta, const Vector& w, bool include_w = false,
                                       const Vector* h = nullptr) {
    GradEstimate out(net.theta_size() + (include_w ? net.cfg.columns : 0), 0.0);
    for (int i = 0; i < net.cfg.columns; ++i) {
        const double coef = -delta * w[i];
        double* dst = out.data() + net.group_offset(i);
        const Vector& t = trace.t[i];
        for (size_t k = 0; k < t.size(); ++k) dst[k] = coef * t[k];
        opcount::add(t.size());
    }
    if (include_w) {
        if (!h) throw std::invalid_argument("master_user_credit: include_w needs h");
        for (int i = 0; i < net.cfg.columns; ++i) out[net.theta_size() + i] = -delta * (*h)[i];
    }
    return out;
}

inline void accumulate(GradEstimate& into, const GradEstimate& g) {
    if (into.size() != g.size()) throw std::invalid_argument("accumulate: length mismatch");
    for (size_t k = 0; k < g.size(); ++k) into[k] += g[k];
}

// Full adjoint of one step: distributes g_h through the cell and columns into
// theta (flat canonical layout) and returns the gradient w.r.t. h(t-1).
inline Vector step_backward(const ColumnarNetwork& net, const StepRecord& rec, const Vector& g_h,
                            double* theta_grad) {
    const int c = net.cfg.columns, w = net.cfg.width, cw = c * w;
    const int off_u = net.off_u(), off_r = net.off_r();
    Vector g_f_all(cw, 0.0);
    Vector g_hprev(c, 0.0);
    if (net.cfg.cell == CellKind::AdditiveTanh || net.cfg.cell == CellKind::Static) {
        const bool additive = net.cfg.cell == CellKind::AdditiveTanh;
        for (int i = 0; i < c; ++i) {
            const double tv = additive ? rec.h[i] - rec.h_prev[i] : rec.h[i];
            const double g_pre = g_h[i] * (1.0 - tv * tv);
            if (additive) g_hprev[i] += g_h[i];
            if (g_pre == 0.0) continue;
            double* gu = theta_grad + net.group_offset(i) + off_u;
            const double* um = net.mask.u_mask.row(i);
            const double* ur = net.cell.u.row(i);
            for (int l = 0; l < cw; ++l) {
                if (um[l] == 0.0) continue;
                gu[l] += g_pre * rec.f_all[l];
                g_f_all[l] += g_pre * ur[l];
            }
            opcount::add(4 * static_cast<uint64_t>(cw));
            if (additive) {
                double* gr = theta_grad + net.group_offset(i) + off_r;
                const double* rm = net.mask.r_mask.row(i);
                const double* rr = net.cell.r.row(i);
                for (int j = 0; j < c; ++j) {
                    if (rm[j] == 0.0) continue;
                    gr[j] += g_pre * rec.h_prev[j];
                    g_hprev[j] += g_pre * rr[j];
                }
                opcount::add(4 * static_cast<uint64_t>(c));
            }
        }
    } else {
        const int off_uz = net.off_uz(), off_rz = net.off_rz();
        const int off_ur = net.off_ur(), off_rr = net.off_rr();
        for (int i = 0; i < c; ++i) {
            if (g_h[i] == 0.0) continue;
            const double z = rec.cell.z[i], n = rec.cell.n[i], rg = rec.cell.rg[i];
            const double s_rec = rec.cell.s_rec[i];
            const double gz = g_h[i] * (n - rec.h_prev[i]);
            const double gn = g_h[i] * z;
            g_hprev[i] += g_h[i] * (1.0 - z);
            const double gan = gn * (1.0 - n * n);
            const double g_rg = gan * s_rec;
            const double gar = g_rg * rg * (1.0 - rg);
            const double gaz = gz * z * (1.0 - z);
            double* base = theta_grad + net.group_offset(i);
            const double* um = net.mask.u_mask.row(i);
            for (int l = 0; l < cw; ++l) {
                if (um[l] == 0.0) continue;
                base[off_u + l] += gan * rec.f_all[l];
                base[off_uz + l] += gaz * rec.f_all[l];
                base[off_ur + l] += gar * rec.f_all[l];
                g_f_all[l] += gan * net.cell.u.at(i, l) + gaz * net.cell.uz.at(i, l) +
                              gar * net.cell.ur.at(i, l);
            }
            const double* rm = net.mask.r_mask.row(i);
            for (int j = 0; j < c; ++j) {
                if (rm[j] == 0.0) continue;
                base[off_r + j] += gan * rg * rec.h_prev[j];
                base[off_rz + j] += gaz * rec.h_prev[j];
                base[off_rr + j] += gar * rec.h_prev[j];
                g_hprev[j] += gan * rg * net.cell.r.at(i, j) + gaz * net.cell.rz.at(i, j) +
                              gar * net.cell.rr.at(i, j);
            }
            opcount::add(12 * static_cast<uint64_t>(cw + c));
        }
    }
    for (int j = 0; j < c; ++j) {
        g_hprev[j] += column_backward(net.columns[j], rec.cols[j], rec.x, rec.h_prev[j],
                                      g_f_all.data() + static_cast<size_t>(j) * w,
                                      theta_grad + net.group_offset(j));
    }
    return g_hprev;
}

// Forward pass over a sequence with frozen prediction weights.
inline StepTape forward_frozen(const ColumnarNetwork& net, const std::vector<Vector>& xs,
                               const Vector& ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("forward_frozen: xs/ys length mismatch");
    StepTape tape;
    tape.reserve(xs.size());
    Vector h(net.cfg.columns, 0.0);
    for (size_t t = 0; t < xs.size(); ++t) {
        StepRecord rec = rnn_step(net, xs[t], h, net.w);
        rec.y_star = ys[t];
        rec.delta = ys[t] - rec.y;
        h = rec.h;
        tape.push_back(std::move(rec));
    }
    return tape;
}

// Exact reverse-mode gradient of sum_t L(t) w.r.t. theta with w held constant,
// over the complete unrolled graph.
inline GradEstimate bptt_full(const ColumnarNetwork& net, const StepTape& tape) {
    GradEstimate grad(net.theta_size(), 0.0);
    Vector g_h(net.cfg.columns, 0.0);
    for (int t = static_cast<int>(tape.size()) - 1; t >= 0; --t) {
        const StepRecord& rec = tape[t];
        for (int j = 0; j < net.cfg.columns; ++j) g_h[j] += -rec.delta * rec.w_step[j];
        g_h = step_backward(net, rec, g_h, grad.data());
    }
    return grad;
}

enum class TbpttMode {
    Sliding,  // per-loss window: every L(t) backpropagated k steps, summed over t
    Tail      // the window an online learner holds at sequence end: losses in
              // (T-k, T] backpropagated with history cut at h(T-k)
};

// All requested windows in one sweep. For Sliding, the running prefix of the
// backward walk from L(t) at depth d equals the (d+1)-window truncation, so
// one walk to max(k) serves every window.
inline std::vector<GradEstimate> tbptt_multi(const ColumnarNetwork& net, const StepTape& tape,
                                             const std::vector<int>& windows, TbpttMode mode) {
    for (int k : windows) {
        if (k < 1) throw std::invalid_argument("tbptt: window must be >= 1");
    }
    const int bigT = static_cast<int>(tape.size());
    std::vector<GradEstimate> out(windows.size(), GradEstimate(net.theta_size(), 0.0));
    if (mode == TbpttMode::Tail) {
        for (size_t wi = 0; wi < windows.size(); ++wi) {
            const int start = std::max(0, bigT - windows[wi]);
            Vector g_h(net.cfg.columns, 0.0);
            for (int t = bigT - 1; t >= start; --t) {
                const StepRecord& rec = tape[t];
                for (int j = 0; j < net.cfg.columns; ++j) g_h[j] += -rec.delta * rec.w_step[j];
                g_h = step_backward(net, rec, g_h, out[wi].data());
            }
        }
        return out;
    }
    int kmax = 0;
    for (int k : windows) kmax = std::max(kmax, k);
    GradEstimate run(net.theta_size(), 0.0);
    for (int t = 0; t < bigT; ++t) {
        std::fill(run.begin(), run.end(), 0.0);
        Vector g_h(net.cfg.columns, 0.0);
        const StepRecord& rec0 = tape[t];
        for (int j = 0; j < net.cfg.columns; ++j) g_h[j] = -rec0.delta * rec0.w_step[j];
        const int depth = std::min(kmax, t + 1);
        for (int d = 0; d < depth; ++d) {
            g_h = step_backward(net, tape[t - d], g_h, run.data());
            for (size_t wi = 0; wi < windows.size(); ++wi) {
                if (std::min(windows[wi], t + 1) == d + 1) accumulate(out[wi], run);
            }
        }
    }
    return out;
}

inline GradEstimate tbptt(const ColumnarNetwork& net, const StepTape& tape, int k,
                          TbpttMode mode = TbpttMode::Sliding) {
    return tbptt_multi(net, tape, {k}, mode)[0];
}

// Dense RTRL: J = dh(t)/dtheta, updated by J <- P + S J with the complete
// one-step Jacobians (lateral paths included). This is an oracle, not an
// estimator; memory is |h| x |theta| by construction.
struct RtrlState {
    Matrix j;

    static RtrlState zeros(const ColumnarNetwork& net) {
        if (net.theta_size() > 200000) {
            throw std::invalid_argument("rtrl: gated to |theta| <= 2e5 (got " +
                                        std::to_string(net.theta_size()) + ")");
        }
        RtrlState st;
        st.j = Matrix(net.cfg.columns, net.theta_size(), 0.0);
        return st;
    }
};

// Updates J for this step and returns the per-step exact credit -delta w^T J.
inline GradEstimate rtrl_step(const ColumnarNetwork& net, RtrlState& state, const StepRecord& rec) {
    const int c = net.cfg.columns, w = net.cfg.width, cw = c * w;
    Matrix p(c, net.theta_size(), 0.0);
    Matrix s(c, c, 0.0);

    // own-group instantaneous rows match the single-pass local gradients
    LocalGrads lg = local_grads_single_pass(net, rec);
    for (int i = 0; i < c; ++i) {
        double* row = p.row(i) + net.group_offset(i);
        const Vector& d = lg.d_theta[i];
        for (size_t k = 0; k < d.size(); ++k) row[k] = d[k];
    }

    // cross-column phi blocks and the state Jacobian via per-(i,j) VJPs
    for (int i = 0; i < c; ++i) {
        // direct (cell-only) dh_i/dh_prev_j
        if (net.cfg.cell == CellKind::AdditiveTanh) {
            const double tv = rec.h[i] - rec.h_prev[i];
            const double th = 1.0 - tv * tv;
            for (int j = 0; j < c; ++j) {
                double v = (i == j) ? 1.0 : 0.0;
                if (net.mask.r_mask.at(i, j) != 0.0) v += th * net.cell.r.at(i, j);
                s.at(i, j) = v;
            }
        } else if (net.cfg.cell == CellKind::Static) {
            // no direct state path
        } else {
            const auto f = detail::gru_factors(rec.cell, rec.h_prev[i], i);
            const double rg = rec.cell.rg[i];
            for (int j = 0; j < c; ++j) {
                double v = (i == j) ? 1.0 - rec.cell.z[i] : 0.0;
                if (net.mask.r_mask.at(i, j) != 0.0) {
                    v += f.gz_h * net.cell.rz.at(i, j) + f.gn_h * rg * net.cell.r.at(i, j) +
                         f.gar_h * net.cell.rr.at(i, j);
                }
                s.at(i, j) = v;
            }
        }
        // seed over f_all = dh_i/df
        Vector seed(cw, 0.0);
        if (net.cfg.cell == CellKind::AdditiveTanh || net.cfg.cell == CellKind::Static) {
            const double tv =
                net.cfg.cell == CellKind::AdditiveTanh ? rec.h[i] - rec.h_prev[i] : rec.h[i];
            const double th = 1.0 - tv * tv;
            for (int l = 0; l < cw; ++l) {
                if (net.mask.u_mask.at(i, l) != 0.0) seed[l] = th * net.cell.u.at(i, l);
            }
        } else {
            const auto f = detail::gru_factors(rec.cell, rec.h_prev[i], i);
            for (int l = 0; l < cw; ++l) {
                if (net.mask.u_mask.at(i, l) == 0.0) continue;
                seed[l] = f.gn_h * net.cell.u.at(i, l) + f.gz_h * net.cell.uz.at(i, l) +
                          f.gar_h * net.cell.ur.at(i, l);
            }
        }
        for (int j = 0; j < c; ++j) {
            bool live = false;
            const double* blk = seed.data() + static_cast<size_t>(j) * w;
            for (int u = 0; u < w; ++u) {
                if (blk[u] != 0.0) {
                    live = true;
                    break;
                }
            }
            if (!live) continue;
            if (j == i) {
                // phi_i block already filled via local grads; only the state path
                Vector scratch(net.phi_size(), 0.0);
                s.at(i, j) += column_backward(net.columns[j], rec.cols[j], rec.x, rec.h_prev[j], blk,
                                              scratch.data());
            } else {
                s.at(i, j) += column_backward(net.columns[j], rec.cols[j], rec.x, rec.h_prev[j], blk,
                                              p.row(i) + net.group_offset(j));
            }
        }
    }

    // J <- P + S J
    Matrix jn = p;
    const int nt = net.theta_size();
    for (int i = 0; i < c; ++i) {
        for (int m = 0; m < c; ++m) {
            const double sv = s.at(i, m);
            if (sv == 0.0) continue;
            axpy(sv, state.j.row(m), jn.row(i), nt);
        }
    }
    state.j = std::move(jn);

    GradEstimate credit(nt, 0.0);
    for (int i = 0; i < c; ++i) axpy(rec.w_step[i], state.j.row(i), credit.data(), nt);
    for (int l = 0; l < nt; ++l) credit[l] *= -rec.delta;
    opcount::add(static_cast<uint64_t>(nt));
    return credit;
}

inline GradEstimate rtrl_full(const ColumnarNetwork& net, const StepTape& tape) {
    RtrlState st = RtrlState::zeros(net);
    GradEstimate total(net.theta_size(), 0.0);
    for (const StepRecord& rec : tape) accumulate(total, rtrl_step(net, st, rec));
    return total;
}

struct FiniteDiffResult {
    GradEstimate grad;
    std::vector<uint8_t> kink;  // 1 if the +/- replays disagree on a ReLU sign
};

namespace detail {

// Replays the sequence from scratch; records ReLU activation signs so kink
// crossings can be excluded from strict tolerance checks. alpha != nullptr
// replays the LMS weight updates too.
inline double replay_loss(const ColumnarNetwork& net, const std::vector<Vector>& xs, const Vector& ys,
                          const Vector* alpha, std::vector<uint8_t>* signs) {
    Vector h(net.cfg.columns, 0.0);
    Vector w = net.w;
    double loss = 0.0;
    if (signs) signs->clear();
    for (size_t t = 0; t < xs.size(); ++t) {
        StepRecord rec = rnn_step(net, xs[t], h, w);
        if (signs) {
            for (const ColumnCache& cc : rec.cols) {
                for (double a : cc.a1) signs->push_back(a > 0.0 ? 1 : 0);
                for (double a : cc.a2) signs->push_back(a > 0.0 ? 1 : 0);
            }
        }
        const double delta = ys[t] - rec.y;
        loss += 0.5 * delta * delta;
        if (alpha) {
            for (int i = 0; i < net.cfg.columns; ++i) w[i] += (*alpha)[i] * delta * rec.h[i];
        }
        h = rec.h;
    }
    return loss;
}

}  // namespace detail

inline FiniteDiffResult finite_diff(const ColumnarNetwork& net, const std::vector<Vector>& xs,
                                    const Vector& ys, double eps, const Vector* lms_alpha = nullptr) {
    if (eps <= 0.0) throw std::invalid_argument("finite_diff: eps must be positive");
    FiniteDiffResult res;
    res.grad.assign(net.theta_size(), 0.0);
    res.kink.assign(net.theta_size(), 0);
    ColumnarNetwork work = net;
    Vector flat = net.theta_flat();
    std::vector<uint8_t> sp, sm;
    for (int p = 0; p < net.theta_size(); ++p) {
        const double keep = flat[p];
        flat[p] = keep + eps;
        work.set_theta_flat(flat);
        const double lp = detail::replay_loss(work, xs, ys, lms_alpha, &sp);
        flat[p] = keep - eps;
        work.set_theta_flat(flat);
        const double lm = detail::replay_loss(work, xs, ys, lms_alpha, &sm);
        flat[p] = keep;
        res.grad[p] = (lp - lm) / (2.0 * eps);
        res.kink[p] = sp != sm ? 1 : 0;
    }
    work.set_theta_flat(flat);
    return res;
}

// Debug CSV for cross-estimator disagreements.
inline void dump_gradients(std::ostream& os, const ColumnarNetwork& net,
                           const std::vector<std::pair<std::string, const GradEstimate*>>& ests) {
    os << "param_index,group,estimator,value\n";
    char buf[64];
    for (const auto& [name, g] : ests) {
        for (size_t p = 0; p < g->size(); ++p) {
            const int group = static_cast<int>(p) < net.theta_size() ? net.group_of(static_cast<int>(p)) : -1;
            std::snprintf(buf, sizeof buf, "%.17g", (*g)[p]);
            os << p << "," << group << "," << name << "," << buf << "\n";
        }
    }
}

}  // namespace colnn
