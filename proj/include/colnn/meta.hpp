#pragma once

// Meta-gradient machinery: the LMS prediction-weight update, the TW trace
// through the learning rule, the combined credit, and the exact oracle that
// backpropagates through every LMS update node of the unrolled process.
//
// Per-step order is part of the contract: forward, delta(t), credit, TW
// update (Eq.-level: uses step-t quantities), then the LMS step producing
// w(t+1).

#include <stdexcept>
#include <vector>

#include "colnn/credit.hpp"
#include "colnn/network.hpp"

namespace colnn {

struct LmsConfig {
    Vector alpha;  // per-weight step sizes

    static LmsConfig uniform(int c, double ss) { return LmsConfig{Vector(static_cast<size_t>(c), ss)}; }

    void validate() const {
        for (double a : alpha) {
            if (a < 0.0 || !std::isfinite(a)) throw std::invalid_argument("LmsConfig: alpha must be >= 0");
        }
    }
};

// w_i <- w_i + alpha_i delta h_i
inline Vector lms_step(const Vector& w, const LmsConfig& cfg, double delta, const Vector& h) {
    if (w.size() != h.size() || w.size() != cfg.alpha.size()) {
        throw std::invalid_argument("lms_step: length mismatch");
    }
    Vector out(w.size());
    for (size_t i = 0; i < w.size(); ++i) out[i] = w[i] + cfg.alpha[i] * delta * h[i];
    opcount::add(3 * w.size());
    return out;
}

struct MetaTrace {
    std::vector<Vector> tw;  // per column, group-sized: approx dw_i(t)/dtheta_i

    static MetaTrace zeros(const ColumnarNetwork& net) {
        MetaTrace m;
        m.tw.assign(net.cfg.columns, Vector(net.group_size(), 0.0));
        return m;
    }
};

// ddelta(t)/dtheta_i ~= -w_i T_i - h_i TW_i, per group.
inline std::vector<Vector> delta_grad(const MasterUserTrace& trace, const MetaTrace& meta,
                                      const Vector& w, const Vector& h) {
    std::vector<Vector> out(trace.t.size());
    for (size_t i = 0; i < trace.t.size(); ++i) {
        const Vector& t = trace.t[i];
        const Vector& tw = meta.tw[i];
        Vector g(t.size());
        for (size_t k = 0; k < t.size(); ++k) g[k] = -w[i] * t[k] - h[i] * tw[k];
        opcount::add(4 * t.size());
        out[i] = std::move(g);
    }
    return out;
}

// TW_i <- TW_i + alpha_i delta T_i + alpha_i h_i ddelta/dtheta_i
inline void meta_trace_update(MetaTrace& meta, const LmsConfig& cfg, double delta, const Vector& h,
                              const MasterUserTrace& trace, const std::vector<Vector>& dgrad) {
    for (size_t i = 0; i < meta.tw.size(); ++i) {
        Vector& tw = meta.tw[i];
        const Vector& t = trace.t[i];
        const Vector& dg = dgrad[i];
        const double a = cfg.alpha[i];
        const double c1 = a * delta, c2 = a * h[i];
        for (size_t k = 0; k < tw.size(); ++k) tw[k] += c1 * t[k] + c2 * dg[k];
        opcount::add(4 * tw.size());
    }
}

// Group block i: -delta (w_i T_i + h_i TW_i). With ablate_meta the TW term is
// dropped, reducing to the recurrent-only credit.
inline GradEstimate meta_credit(const ColumnarNetwork& net, const MasterUserTrace& trace,
                                const MetaTrace& meta, double delta, const Vector& w, const Vector& h,
                                bool ablate_meta) {
    GradEstimate out(net.theta_size(), 0.0);
    for (int i = 0; i < net.cfg.columns; ++i) {
        double* dst = out.data() + net.group_offset(i);
        const Vector& t = trace.t[i];
        const Vector& tw = meta.tw[i];
        if (ablate_meta) {
            const double c = -delta * w[i];
            for (size_t k = 0; k < t.size(); ++k) dst[k] = c * t[k];
            opcount::add(t.size());
        } else {
            const double cw = -delta * w[i], ch = -delta * h[i];
            for (size_t k = 0; k < t.size(); ++k) dst[k] = cw * t[k] + ch * tw[k];
            opcount::add(3 * t.size());
        }
    }
    return out;
}

// Forward pass with online LMS updates; the tape records w(t) per step.
inline StepTape forward_lms(const ColumnarNetwork& net, const std::vector<Vector>& xs, const Vector& ys,
                            const LmsConfig& cfg) {
    if (xs.size() != ys.size()) throw std::invalid_argument("forward_lms: xs/ys length mismatch");
    cfg.validate();
    StepTape tape;
    tape.reserve(xs.size());
    Vector h(net.cfg.columns, 0.0);
    Vector w = net.w;
    for (size_t t = 0; t < xs.size(); ++t) {
        StepRecord rec = rnn_step(net, xs[t], h, w);
        rec.y_star = ys[t];
        rec.delta = ys[t] - rec.y;
        h = rec.h;
        w = lms_step(w, cfg, rec.delta, rec.h);
        tape.push_back(std::move(rec));
    }
    return tape;
}

// Exact gradient of sum_t L(t) where the unrolled graph contains every LMS
// update as a differentiable node: w(t+1) = w(t) + alpha (.) delta(t) h(t).
inline GradEstimate bptt_through_learning(const ColumnarNetwork& net, const StepTape& tape,
                                          const LmsConfig& cfg) {
    cfg.validate();
    GradEstimate grad(net.theta_size(), 0.0);
    const int c = net.cfg.columns;
    Vector g_h(c, 0.0);
    Vector g_w(c, 0.0);  // adjoint of w(t+1)
    for (int t = static_cast<int>(tape.size()) - 1; t >= 0; --t) {
        const StepRecord& rec = tape[t];
        // delta adjoint: from the loss and from the w update node
        double g_delta = rec.delta;
        for (int i = 0; i < c; ++i) g_delta += g_w[i] * cfg.alpha[i] * rec.h[i];
        // h(t) adjoints: via the w update and via delta = y* - w.h
        for (int i = 0; i < c; ++i) {
            g_h[i] += g_w[i] * cfg.alpha[i] * rec.delta;
            g_h[i] += g_delta * -rec.w_step[i];
        }
        // w(t) adjoint: identity carry plus the prediction path
        for (int i = 0; i < c; ++i) g_w[i] += g_delta * -rec.h[i];
        g_h = step_backward(net, rec, g_h, grad.data());
    }
    return grad;
}

// Truncated variants over the learning process. Sliding: for each loss L(t),
// the window covers steps (t-k, t]; w-update nodes inside the window are
// differentiated, w at the window start is held constant. Tail: one backward
// over the losses in (T-k, T].
inline std::vector<GradEstimate> tbptt_through_learning_multi(const ColumnarNetwork& net,
                                                              const StepTape& tape,
                                                              const LmsConfig& cfg,
                                                              const std::vector<int>& windows,
                                                              TbpttMode mode) {
    for (int k : windows) {
        if (k < 1) throw std::invalid_argument("tbptt_through_learning: window must be >= 1");
    }
    cfg.validate();
    const int bigT = static_cast<int>(tape.size());
    const int c = net.cfg.columns;
    std::vector<GradEstimate> out(windows.size(), GradEstimate(net.theta_size(), 0.0));
    if (mode == TbpttMode::Tail) {
        for (size_t wi = 0; wi < windows.size(); ++wi) {
            const int start = std::max(0, bigT - windows[wi]);
            Vector g_h(c, 0.0), g_w(c, 0.0);
            for (int t = bigT - 1; t >= start; --t) {
                const StepRecord& rec = tape[t];
                double g_delta = rec.delta;
                for (int i = 0; i < c; ++i) g_delta += g_w[i] * cfg.alpha[i] * rec.h[i];
                for (int i = 0; i < c; ++i) {
                    g_h[i] += g_w[i] * cfg.alpha[i] * rec.delta + g_delta * -rec.w_step[i];
                }
                for (int i = 0; i < c; ++i) g_w[i] += g_delta * -rec.h[i];
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
        Vector g_h(c, 0.0), g_w(c, 0.0);
        const int depth = std::min(kmax, t + 1);
        for (int d = 0; d < depth; ++d) {
            const StepRecord& rec = tape[t - d];
            // only the window's anchor step injects its loss; earlier steps
            // contribute through the state and the w chain
            double g_delta = d == 0 ? rec.delta : 0.0;
            for (int i = 0; i < c; ++i) g_delta += g_w[i] * cfg.alpha[i] * rec.h[i];
            for (int i = 0; i < c; ++i) {
                g_h[i] += g_w[i] * cfg.alpha[i] * rec.delta + g_delta * -rec.w_step[i];
            }
            for (int i = 0; i < c; ++i) g_w[i] += g_delta * -rec.h[i];
            g_h = step_backward(net, rec, g_h, run.data());
            for (size_t wi = 0; wi < windows.size(); ++wi) {
                if (std::min(windows[wi], t + 1) == d + 1) accumulate(out[wi], run);
            }
        }
    }
    return out;
}

}  // namespace colnn
