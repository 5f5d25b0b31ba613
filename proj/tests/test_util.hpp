#pragma once

// Shared reference implementations for the gradient tests. These are written
// independently of the library code paths they check: plain loops, ascending
// index order, no shared helpers beyond the data structures.

#include <cmath>
#include <vector>

#include "colnn/bench.hpp"
#include "colnn/credit.hpp"
#include "colnn/meta.hpp"
#include "colnn/network.hpp"

namespace testutil {

using colnn::ColumnarNetwork;
using colnn::GradEstimate;
using colnn::Sequence;
using colnn::StepRecord;
using colnn::StepTape;
using colnn::Vector;

inline double max_abs_dev(const Vector& a, const Vector& b) {
    double dev = 0.0;
    for (size_t i = 0; i < a.size(); ++i) dev = std::max(dev, std::abs(a[i] - b[i]));
    return dev;
}

inline double rel_inf_dev(const Vector& a, const Vector& b) {
    double dev = 0.0, scale = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dev = std::max(dev, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(b[i]));
    }
    return dev / std::max(scale, 1e-300);
}

// Reference per-state stop-gradient backward for the additive-tanh cell,
// written from the chain rule with naive loops. Returns the group-i gradient
// in canonical in-group layout plus dh_i/dh_i(t-1).
struct RefLocalResult {
    Vector d_theta;
    double d_hprev = 0.0;
};

inline RefLocalResult ref_local_grads_additive(const ColumnarNetwork& net, const StepRecord& rec,
                                               int i) {
    const int c = net.cfg.columns, w = net.cfg.width, d = net.cfg.input_dim;
    const int cw = c * w;
    RefLocalResult out;
    out.d_theta.assign(net.group_size(), 0.0);

    const double tanh_pre = std::tanh(rec.cell.pre[i]);
    const double th = 1.0 - tanh_pre * tanh_pre;

    // cell rows
    for (int l = 0; l < cw; ++l) {
        if (net.mask.u_mask.at(i, l) != 0.0) out.d_theta[net.off_u() + l] = th * rec.f_all[l];
    }
    for (int j = 0; j < c; ++j) {
        if (net.mask.r_mask.at(i, j) != 0.0) out.d_theta[net.off_r() + j] = th * rec.h_prev[j];
    }

    // dh_i/df_i = th * U[i, own block]; backward through the column MLP
    Vector g_f(w, 0.0);
    for (int u = 0; u < w; ++u) g_f[u] = th * net.cell.u.at(i, i * w + u);

    const colnn::ColumnParams& p = net.columns[i];
    const colnn::ColumnCache& cc = rec.cols[i];
    Vector g_a2(w, 0.0);
    for (int u = 0; u < w; ++u) g_a2[u] = cc.a2[u] > 0.0 ? g_f[u] : 0.0;
    for (int u = 0; u < w; ++u) {
        for (int v = 0; v < w; ++v) {
            out.d_theta[net.off_w2() + u * w + v] = g_a2[u] * cc.z1[v];
        }
        out.d_theta[net.off_b2() + u] = g_a2[u];
    }
    Vector g_a1(w, 0.0);
    for (int v = 0; v < w; ++v) {
        double s = 0.0;
        for (int u = 0; u < w; ++u) s += p.w2.at(u, v) * g_a2[u];
        g_a1[v] = cc.a1[v] > 0.0 ? s : 0.0;
    }
    double g_h_slot = 0.0;
    for (int v = 0; v < w; ++v) {
        for (int k = 0; k < d; ++k) {
            out.d_theta[net.off_w1() + v * (d + 1) + k] = g_a1[v] * rec.x[k];
        }
        out.d_theta[net.off_w1() + v * (d + 1) + d] = g_a1[v] * rec.h_prev[i];
        out.d_theta[net.off_b1() + v] = g_a1[v];
        g_h_slot += p.w1.at(v, d) * g_a1[v];
    }
    out.d_hprev = 1.0 + th * net.cell.r.at(i, i) + g_h_slot;
    return out;
}

// Loss of the full frozen-w replay from scratch; used by finite-difference
// style oracles in the tests.
inline double replay_loss_frozen(const ColumnarNetwork& net, const Sequence& seq) {
    Vector h(net.cfg.columns, 0.0);
    double loss = 0.0;
    for (size_t t = 0; t < seq.xs.size(); ++t) {
        colnn::StepRecord rec = colnn::rnn_step(net, seq.xs[t], h, net.w);
        const double delta = seq.ys[t] - rec.y;
        loss += 0.5 * delta * delta;
        h = rec.h;
    }
    return loss;
}

// Truncated-graph oracle for sliding-window T-BPTT: the k-truncated gradient
// is the gradient of G_k(theta') = sum_t L_t where each window replays steps
// (t-k, t] from the BASE trajectory's h(t-k) with parameters theta'. Computed
// by central differences.
inline GradEstimate tbptt_sliding_fd_oracle(const ColumnarNetwork& net, const Sequence& seq, int k,
                                            double eps) {
    // base trajectory
    std::vector<Vector> base_h;
    base_h.push_back(Vector(net.cfg.columns, 0.0));
    {
        Vector h(net.cfg.columns, 0.0);
        for (size_t t = 0; t < seq.xs.size(); ++t) {
            colnn::StepRecord rec = colnn::rnn_step(net, seq.xs[t], h, net.w);
            h = rec.h;
            base_h.push_back(h);
        }
    }
    const int bigT = static_cast<int>(seq.xs.size());
    auto loss_fn = [&](const ColumnarNetwork& pert) {
        double total = 0.0;
        for (int t = 0; t < bigT; ++t) {
            const int start = std::max(0, t - k + 1);
            Vector h = base_h[start];
            double y = 0.0;
            for (int tau = start; tau <= t; ++tau) {
                colnn::StepRecord rec = colnn::rnn_step(pert, seq.xs[tau], h, pert.w);
                h = rec.h;
                y = rec.y;
            }
            const double delta = seq.ys[t] - y;
            total += 0.5 * delta * delta;
        }
        return total;
    };
    GradEstimate grad(net.theta_size(), 0.0);
    ColumnarNetwork work = net;
    Vector flat = net.theta_flat();
    for (int p = 0; p < net.theta_size(); ++p) {
        const double keep = flat[p];
        flat[p] = keep + eps;
        work.set_theta_flat(flat);
        const double lp = loss_fn(work);
        flat[p] = keep - eps;
        work.set_theta_flat(flat);
        const double lm = loss_fn(work);
        flat[p] = keep;
        grad[p] = (lp - lm) / (2.0 * eps);
    }
    return grad;
}

inline colnn::ColumnarNetwork small_net(int c, int w, int d, colnn::CellKind cell, double s,
                                        uint64_t seed, bool mask_r = true) {
    colnn::NetConfig cfg;
    cfg.columns = c;
    cfg.width = w;
    cfg.input_dim = d;
    cfg.cell = cell;
    cfg.lateral_s = s;
    cfg.mask_r = mask_r;
    return colnn::build_network(cfg, colnn::RngStream::from_seed(seed));
}

inline Sequence small_seq(int t, int d, uint64_t seed) {
    colnn::SequenceSpec sp;
    sp.length = t;
    sp.input_dim = d;
    return colnn::gen_sequence(sp, colnn::RngStream::from_seed(seed).fork(1));
}

}  // namespace testutil
