#pragma once

// Standalone textbook LSTM/GRU cells for the information-decay experiment.
// Weights follow the uniform (-sqrt(1/hidden), sqrt(1/hidden)) default.

#include <stdexcept>

#include "colnn/numkit.hpp"
#include "colnn/network.hpp"

namespace colnn {

enum class StandardCellKind { LSTM, GRU };

struct StandardCellParams {
    int hidden = 0;
    int input = 0;
    bool with_bias = false;
    // gate rows stacked: LSTM [i, f, g, o] (4H), GRU [r, z, n] (3H)
    Matrix w_ih;
    Matrix w_hh;
    Vector b_ih;
    Vector b_hh;
};

inline StandardCellParams init_standard_cell(StandardCellKind kind, int hidden, int input,
                                             bool with_bias, RngStream& rng) {
    if (hidden < 1 || input < 1) throw std::invalid_argument("init_standard_cell: sizes must be >= 1");
    const int gates = kind == StandardCellKind::LSTM ? 4 : 3;
    StandardCellParams p;
    p.hidden = hidden;
    p.input = input;
    p.with_bias = with_bias;
    p.w_ih = uniform_sqrtk_init(gates * hidden, input, hidden, rng);
    p.w_hh = uniform_sqrtk_init(gates * hidden, hidden, hidden, rng);
    if (with_bias) {
        p.b_ih = uniform_sqrtk_init(1, gates * hidden, hidden, rng).v;
        p.b_hh = uniform_sqrtk_init(1, gates * hidden, hidden, rng).v;
    } else {
        p.b_ih.assign(gates * hidden, 0.0);
        p.b_hh.assign(gates * hidden, 0.0);
    }
    return p;
}

struct StandardCellState {
    Vector h;
    Vector c;  // LSTM only
};

inline StandardCellState standard_cell_step(StandardCellKind kind, const StandardCellParams& p,
                                            const StandardCellState& st, const Vector& x) {
    if (static_cast<int>(x.size()) != p.input || static_cast<int>(st.h.size()) != p.hidden) {
        throw std::invalid_argument("standard_cell_step: shape mismatch");
    }
    const int hd = p.hidden;
    Vector gi = matvec(p.w_ih, x);
    Vector gh = matvec(p.w_hh, st.h);
    StandardCellState out;
    out.h.assign(hd, 0.0);
    if (kind == StandardCellKind::LSTM) {
        if (static_cast<int>(st.c.size()) != hd) {
            throw std::invalid_argument("standard_cell_step: LSTM needs a cell state");
        }
        out.c.assign(hd, 0.0);
        for (int u = 0; u < hd; ++u) {
            const double ai = gi[u] + p.b_ih[u] + gh[u] + p.b_hh[u];
            const double af = gi[hd + u] + p.b_ih[hd + u] + gh[hd + u] + p.b_hh[hd + u];
            const double ag = gi[2 * hd + u] + p.b_ih[2 * hd + u] + gh[2 * hd + u] + p.b_hh[2 * hd + u];
            const double ao = gi[3 * hd + u] + p.b_ih[3 * hd + u] + gh[3 * hd + u] + p.b_hh[3 * hd + u];
            const double ig = sigmoid(ai), fg = sigmoid(af), gg = std::tanh(ag), og = sigmoid(ao);
            out.c[u] = fg * st.c[u] + ig * gg;
            out.h[u] = og * std::tanh(out.c[u]);
        }
    } else {
        // update-gate convention matching the columnar cell: z = 0 keeps the state
        for (int u = 0; u < hd; ++u) {
            const double arr = gi[u] + p.b_ih[u] + gh[u] + p.b_hh[u];
            const double az = gi[hd + u] + p.b_ih[hd + u] + gh[hd + u] + p.b_hh[hd + u];
            const double rg = sigmoid(arr);
            const double zg = sigmoid(az);
            const double an = gi[2 * hd + u] + p.b_ih[2 * hd + u] + rg * (gh[2 * hd + u] + p.b_hh[2 * hd + u]);
            const double ng = std::tanh(an);
            out.h[u] = (1.0 - zg) * st.h[u] + zg * ng;
        }
    }
    return out;
}

}  // namespace colnn
