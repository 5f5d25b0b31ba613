#pragma once

// Synthetic benchmark: random {0,1} inputs, uniform targets in (-50, 50),
// sign-alignment and MAE against the experiment's exact oracle, seed sweeps
// with a deterministic reduce. Every experiment is a pure function of
// (ExperimentConfig, master seed); wallclock columns are zero unless timing
// is explicitly enabled so output bytes stay reproducible.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "colnn/cells.hpp"
#include "colnn/credit.hpp"
#include "colnn/meta.hpp"
#include "colnn/network.hpp"

namespace colnn {

struct SequenceSpec {
    int length = 50;
    int input_dim = 50;

    void validate() const {
        if (length < 1 || input_dim < 1) throw std::invalid_argument("SequenceSpec: length and input_dim must be >= 1");
    }
};

struct Sequence {
    std::vector<Vector> xs;
    Vector ys;
};

inline Sequence gen_sequence(const SequenceSpec& spec, RngStream rng) {
    spec.validate();
    Sequence seq;
    seq.xs.reserve(spec.length);
    seq.ys.reserve(spec.length);
    for (int t = 0; t < spec.length; ++t) {
        Vector x(spec.input_dim, 0.0);
        for (int d = 0; d < spec.input_dim; ++d) x[d] = static_cast<double>(rng.coin());
        seq.xs.push_back(std::move(x));
        seq.ys.push_back(rng.uniform(-50.0, 50.0));
    }
    return seq;
}

// Percentage of components whose sign matches the oracle. Both exactly zero
// counts as aligned (masked/dead parameters); exactly one zero counts as
// misaligned.
inline double alignment(const GradEstimate& est, const GradEstimate& truth) {
    if (est.size() != truth.size()) throw std::invalid_argument("alignment: length mismatch");
    if (est.empty()) throw std::invalid_argument("alignment: empty vectors");
    size_t ok = 0;
    for (size_t j = 0; j < est.size(); ++j) {
        const double a = est[j], b = truth[j];
        if (a == 0.0 && b == 0.0) {
            ++ok;
        } else if ((a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0)) {
            ++ok;
        }
    }
    return 100.0 * static_cast<double>(ok) / static_cast<double>(est.size());
}

inline double mae(const GradEstimate& est, const GradEstimate& truth) {
    if (est.size() != truth.size()) throw std::invalid_argument("mae: length mismatch");
    if (est.empty()) throw std::invalid_argument("mae: empty vectors");
    double s = 0.0;
    for (size_t j = 0; j < est.size(); ++j) s += std::abs(est[j] - truth[j]);
    return s / static_cast<double>(est.size());
}

enum class ExperimentKind { AlignRnn, AlignMeta, MetaAblation, Decay, StepSizeSweep };

inline std::string experiment_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::AlignRnn: return "align-rnn";
        case ExperimentKind::AlignMeta: return "align-meta";
        case ExperimentKind::MetaAblation: return "meta-ablation";
        case ExperimentKind::Decay: return "decay";
        case ExperimentKind::StepSizeSweep: return "sweep";
    }
    return "?";
}

struct EstimatorId {
    enum class Kind { MasterUser, MasterUserNoMeta, Tbptt };
    Kind kind = Kind::MasterUser;
    int window = 0;

    std::string name() const {
        switch (kind) {
            case Kind::MasterUser: return "MasterUser";
            case Kind::MasterUserNoMeta: return "MasterUserNoMeta";
            case Kind::Tbptt: return "TBPTT(" + std::to_string(window) + ")";
        }
        return "?";
    }

    static EstimatorId parse(const std::string& s) {
        if (s == "MasterUser") return {Kind::MasterUser, 0};
        if (s == "MasterUserNoMeta") return {Kind::MasterUserNoMeta, 0};
        if (s.rfind("TBPTT(", 0) == 0 && s.back() == ')') {
            const int k = std::stoi(s.substr(6, s.size() - 7));
            if (k < 1) throw std::invalid_argument("estimator window must be >= 1: " + s);
            return {Kind::Tbptt, k};
        }
        throw std::invalid_argument("unknown estimator: " + s);
    }
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::AlignRnn;
    NetConfig net;
    SequenceSpec seq;
    std::vector<double> lateral_ratios = {0, 1, 5, 10, 50, 100, 500, 1000};
    std::vector<int> truncation_windows = {1, 3, 5, 20, 40};
    double step_size = 1e-2;                              // meta experiments
    std::vector<double> step_sizes = {1e-1, 1e-2, 1e-3};  // step-size sweep
    int seeds = 30;
    std::vector<std::string> estimators;  // empty: experiment default
    uint64_t master_seed = 1;
    int workers = 1;
    bool timing = false;
    TbpttMode rnn_tbptt_mode = TbpttMode::Tail;
    TbpttMode meta_tbptt_mode = TbpttMode::Sliding;
    int decay_hidden = 50;
    int decay_steps = 20;

    void validate() const {
        net.validate();
        seq.validate();
        if (seeds < 1) throw std::invalid_argument("ExperimentConfig: seeds must be >= 1");
        if (workers < 1) throw std::invalid_argument("ExperimentConfig: workers must be >= 1");
        for (double s : lateral_ratios) {
            if (s < 0) throw std::invalid_argument("ExperimentConfig: lateral ratios must be >= 0");
        }
        for (int k : truncation_windows) {
            if (k < 1) throw std::invalid_argument("ExperimentConfig: truncation windows must be >= 1");
        }
        for (const std::string& e : estimators) EstimatorId::parse(e);
    }

    std::vector<EstimatorId> resolved_estimators() const {
        std::vector<EstimatorId> out;
        if (!estimators.empty()) {
            for (const auto& e : estimators) out.push_back(EstimatorId::parse(e));
            return out;
        }
        if (experiment == ExperimentKind::MetaAblation) {
            out.push_back({EstimatorId::Kind::MasterUser, 0});
            out.push_back({EstimatorId::Kind::MasterUserNoMeta, 0});
            return out;
        }
        out.push_back({EstimatorId::Kind::MasterUser, 0});
        for (int k : truncation_windows) out.push_back({EstimatorId::Kind::Tbptt, k});
        return out;
    }
};

struct AlignmentRow {
    std::string config_id;
    std::string experiment;
    std::string cell;
    int c = 0, w = 0, t = 0;
    double s_percent = 0.0;
    double ss = 0.0;
    std::string estimator;
    uint64_t seed = 0;
    double alignment_percent = 0.0;
    double mae = 0.0;
    uint64_t wallclock_ns = 0;
};

namespace detail {

template <typename F>
void parallel_for(int n, int workers, F&& f) {
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) f(i);
        });
    }
    for (auto& th : pool) th.join();
}

inline uint64_t now_ns() {
    return static_cast<uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

struct RunInputs {
    ColumnarNetwork net;
    Sequence seq;
};

// Network and data derive from (master_seed, seed) only; the mask consumes a
// stream keyed the same way, so estimators, step sizes and re-runs all see
// identical inputs.
inline RunInputs make_run_inputs(const ExperimentConfig& cfg, double s_percent, uint64_t seed) {
    RngStream seed_stream = RngStream::from_seed(cfg.master_seed).fork(seed);
    NetConfig nc = cfg.net;
    nc.lateral_s = s_percent;
    RunInputs in;
    in.seq = gen_sequence(cfg.seq, seed_stream.fork(0));
    in.net = build_network(nc, seed_stream.fork(1));
    return in;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string make_config_id(const ExperimentConfig& cfg, double ss_override = -1.0) {
    std::string id = experiment_name(cfg.experiment) + "_C" + std::to_string(cfg.net.columns) + "_W" +
                     std::to_string(cfg.net.width) + "_T" + std::to_string(cfg.seq.length) + "_" +
                     cell_name(cfg.net.cell) + "_mr" + (cfg.net.mask_r ? "1" : "0");
    if (cfg.experiment == ExperimentKind::AlignMeta || cfg.experiment == ExperimentKind::MetaAblation ||
        cfg.experiment == ExperimentKind::StepSizeSweep) {
        id += "_ss" + format_double(ss_override >= 0.0 ? ss_override : cfg.step_size);
    }
    return id;
}

// Accumulated Master-User credit over a frozen-w run.
inline GradEstimate master_user_run_frozen(const ColumnarNetwork& net, const StepTape& tape) {
    MasterUserTrace trace = MasterUserTrace::zeros(net);
    GradEstimate total(net.theta_size(), 0.0);
    for (const StepRecord& rec : tape) {
        LocalGrads lg = local_grads_single_pass(net, rec);
        master_user_update(trace, lg);
        for (int i = 0; i < net.cfg.columns; ++i) {
            const double coef = -rec.delta * net.w[i];
            axpy(coef, trace.t[i].data(), total.data() + net.group_offset(i),
                 static_cast<int>(trace.t[i].size()));
        }
    }
    return total;
}

struct MetaRunResult {
    GradEstimate full;
    GradEstimate ablated;
};

// Accumulated meta credit (and its ablation) over an LMS run, following the
// pinned per-step order: trace update, credit, delta_grad, TW update.
inline MetaRunResult master_user_run_meta(const ColumnarNetwork& net, const StepTape& tape,
                                          const LmsConfig& lms) {
    MasterUserTrace trace = MasterUserTrace::zeros(net);
    MetaTrace meta = MetaTrace::zeros(net);
    MetaRunResult out;
    out.full.assign(net.theta_size(), 0.0);
    out.ablated.assign(net.theta_size(), 0.0);
    for (const StepRecord& rec : tape) {
        LocalGrads lg = local_grads_single_pass(net, rec);
        master_user_update(trace, lg);
        for (int i = 0; i < net.cfg.columns; ++i) {
            const double cw = -rec.delta * rec.w_step[i];
            const double ch = -rec.delta * rec.h[i];
            double* df = out.full.data() + net.group_offset(i);
            double* da = out.ablated.data() + net.group_offset(i);
            const Vector& t = trace.t[i];
            const Vector& tw = meta.tw[i];
            for (size_t k = 0; k < t.size(); ++k) {
                df[k] += cw * t[k] + ch * tw[k];
                da[k] += cw * t[k];
            }
            opcount::add(6 * t.size());
        }
        std::vector<Vector> dg = delta_grad(trace, meta, rec.w_step, rec.h);
        meta_trace_update(meta, lms, rec.delta, rec.h, trace, dg);
    }
    return out;
}

}  // namespace detail

inline std::vector<AlignmentRow> run_align_rnn(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.experiment = ExperimentKind::AlignRnn;
    c.validate();
    const auto ests = c.resolved_estimators();
    for (const auto& e : ests) {
        if (e.kind == EstimatorId::Kind::MasterUserNoMeta) {
            throw std::invalid_argument("run_align_rnn: MasterUserNoMeta is a meta-ablation estimator");
        }
    }
    const int n_tasks = static_cast<int>(c.lateral_ratios.size()) * c.seeds;
    std::vector<std::vector<AlignmentRow>> slots(n_tasks);
    detail::parallel_for(n_tasks, c.workers, [&](int task) {
        const int si = task / c.seeds;
        const uint64_t seed = static_cast<uint64_t>(task % c.seeds);
        const double s = c.lateral_ratios[si];
        detail::RunInputs in = detail::make_run_inputs(c, s, seed);
        StepTape tape = forward_frozen(in.net, in.seq.xs, in.seq.ys);
        const GradEstimate truth = bptt_full(in.net, tape);
        std::vector<AlignmentRow>& rows = slots[task];
        for (const auto& est : ests) {
            AlignmentRow row;
            row.config_id = detail::make_config_id(c);
            row.experiment = experiment_name(c.experiment);
            row.cell = cell_name(c.net.cell);
            row.c = c.net.columns;
            row.w = c.net.width;
            row.t = c.seq.length;
            row.s_percent = s;
            row.ss = 0.0;
            row.estimator = est.name();
            row.seed = seed;
            const uint64_t t0 = c.timing ? detail::now_ns() : 0;
            GradEstimate g;
            if (est.kind == EstimatorId::Kind::MasterUser) {
                g = detail::master_user_run_frozen(in.net, tape);
            } else {
                g = tbptt(in.net, tape, est.window, c.rnn_tbptt_mode);
            }
            row.wallclock_ns = c.timing ? detail::now_ns() - t0 : 0;
            row.alignment_percent = alignment(g, truth);
            row.mae = mae(g, truth);
            rows.push_back(std::move(row));
        }
    });
    std::vector<AlignmentRow> out;
    for (auto& s : slots) {
        for (auto& r : s) out.push_back(std::move(r));
    }
    return out;
}

namespace detail {

inline std::vector<AlignmentRow> run_meta_common(const ExperimentConfig& c, double ss) {
    const auto ests = c.resolved_estimators();
    const LmsConfig lms = LmsConfig::uniform(c.net.columns, ss);
    const int n_tasks = static_cast<int>(c.lateral_ratios.size()) * c.seeds;
    std::vector<std::vector<AlignmentRow>> slots(n_tasks);
    parallel_for(n_tasks, c.workers, [&](int task) {
        const int si = task / c.seeds;
        const uint64_t seed = static_cast<uint64_t>(task % c.seeds);
        const double s = c.lateral_ratios[si];
        RunInputs in = make_run_inputs(c, s, seed);
        StepTape tape = forward_lms(in.net, in.seq.xs, in.seq.ys, lms);
        const GradEstimate truth = bptt_through_learning(in.net, tape, lms);
        MetaRunResult mu;
        bool have_mu = false;
        std::vector<AlignmentRow>& rows = slots[task];
        for (const auto& est : ests) {
            AlignmentRow row;
            row.config_id = make_config_id(c, ss);
            row.experiment = experiment_name(c.experiment);
            row.cell = cell_name(c.net.cell);
            row.c = c.net.columns;
            row.w = c.net.width;
            row.t = c.seq.length;
            row.s_percent = s;
            row.ss = ss;
            row.estimator = est.name();
            row.seed = seed;
            const uint64_t t0 = c.timing ? now_ns() : 0;
            GradEstimate g;
            if (est.kind == EstimatorId::Kind::Tbptt) {
                g = tbptt_through_learning_multi(in.net, tape, lms, {est.window}, c.meta_tbptt_mode)[0];
            } else {
                if (!have_mu) {
                    mu = master_user_run_meta(in.net, tape, lms);
                    have_mu = true;
                }
                g = est.kind == EstimatorId::Kind::MasterUser ? mu.full : mu.ablated;
            }
            row.wallclock_ns = c.timing ? now_ns() - t0 : 0;
            row.alignment_percent = alignment(g, truth);
            row.mae = mae(g, truth);
            rows.push_back(std::move(row));
        }
    });
    std::vector<AlignmentRow> out;
    for (auto& s : slots) {
        for (auto& r : s) out.push_back(std::move(r));
    }
    return out;
}

}  // namespace detail

inline std::vector<AlignmentRow> run_align_meta(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.experiment = ExperimentKind::AlignMeta;
    if (c.truncation_windows == std::vector<int>{1, 3, 5, 20, 40} && cfg.estimators.empty()) {
        c.truncation_windows = {1, 5, 10, 40};
    }
    c.validate();
    return detail::run_meta_common(c, c.step_size);
}

inline std::vector<AlignmentRow> run_meta_ablation(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.experiment = ExperimentKind::MetaAblation;
    c.validate();
    return detail::run_meta_common(c, c.step_size);
}

inline std::vector<AlignmentRow> run_stepsize_sweep(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.experiment = ExperimentKind::StepSizeSweep;
    if (cfg.estimators.empty() && c.truncation_windows == std::vector<int>{1, 3, 5, 20, 40}) {
        c.truncation_windows = {1, 5, 10, 40};
    }
    c.validate();
    std::vector<AlignmentRow> out;
    for (double ss : c.step_sizes) {
        std::vector<AlignmentRow> rows = detail::run_meta_common(c, ss);
        for (auto& r : rows) out.push_back(std::move(r));
    }
    return out;
}

struct DecayRow {
    std::string cell;
    bool bias = false;
    int step = 0;
    double mean_abs_state = 0.0;
    double stderr_abs_state = 0.0;
    int n = 0;
};

// Untrained standard-cell information decay: states start at ones, input is a
// zero vector, mean |h| tracked per step and averaged over seeds.
inline std::vector<DecayRow> run_decay(int hidden, int steps, int seeds, uint64_t master_seed) {
    if (hidden < 1 || steps < 1 || seeds < 1) throw std::invalid_argument("run_decay: arguments must be >= 1");
    std::vector<DecayRow> out;
    const RngStream root = RngStream::from_seed(master_seed);
    const Vector x(hidden, 0.0);
    int channel = 0;
    for (StandardCellKind kind : {StandardCellKind::LSTM, StandardCellKind::GRU}) {
        for (bool bias : {false, true}) {
            std::vector<std::vector<double>> curves(static_cast<size_t>(seeds));
            for (int sd = 0; sd < seeds; ++sd) {
                RngStream r = root.fork(static_cast<uint64_t>(sd)).fork(10 + channel);
                StandardCellParams p = init_standard_cell(kind, hidden, hidden, bias, r);
                StandardCellState st;
                st.h.assign(hidden, 1.0);
                if (kind == StandardCellKind::LSTM) st.c.assign(hidden, 1.0);
                std::vector<double>& curve = curves[sd];
                curve.push_back(1.0);
                for (int t = 0; t < steps; ++t) {
                    st = standard_cell_step(kind, p, st, x);
                    double m = 0.0;
                    for (double v : st.h) m += std::abs(v);
                    curve.push_back(m / hidden);
                }
            }
            for (int t = 0; t <= steps; ++t) {
                double mean = 0.0;
                for (int sd = 0; sd < seeds; ++sd) mean += curves[sd][t];
                mean /= seeds;
                double var = 0.0;
                for (int sd = 0; sd < seeds; ++sd) {
                    const double d = curves[sd][t] - mean;
                    var += d * d;
                }
                const double sd_ = seeds > 1 ? std::sqrt(var / (seeds - 1)) : 0.0;
                DecayRow row;
                row.cell = kind == StandardCellKind::LSTM ? "lstm" : "gru";
                row.bias = bias;
                row.step = t;
                row.mean_abs_state = mean;
                row.stderr_abs_state = seeds > 1 ? sd_ / std::sqrt(static_cast<double>(seeds)) : 0.0;
                row.n = seeds;
                out.push_back(row);
            }
            ++channel;
        }
    }
    return out;
}

struct SummaryRow {
    std::string config_id;
    std::string experiment;
    std::string cell;
    int c = 0, w = 0, t = 0;
    double s_percent = 0.0;
    double ss = 0.0;
    std::string estimator;
    double mean_alignment = 0.0;
    double stderr_alignment = 0.0;
    int n = 0;
};

inline std::vector<SummaryRow> summarize(const std::vector<AlignmentRow>& rows) {
    if (rows.empty()) throw std::invalid_argument("summarize: empty rows");
    std::map<std::tuple<std::string, double, double, std::string>, std::vector<const AlignmentRow*>> groups;
    for (const auto& r : rows) {
        groups[{r.config_id, r.s_percent, r.ss, r.estimator}].push_back(&r);
    }
    std::vector<SummaryRow> out;
    for (const auto& [key, members] : groups) {
        SummaryRow s;
        const AlignmentRow& first = *members.front();
        s.config_id = first.config_id;
        s.experiment = first.experiment;
        s.cell = first.cell;
        s.c = first.c;
        s.w = first.w;
        s.t = first.t;
        s.s_percent = first.s_percent;
        s.ss = first.ss;
        s.estimator = first.estimator;
        s.n = static_cast<int>(members.size());
        double mean = 0.0;
        for (const auto* m : members) mean += m->alignment_percent;
        mean /= s.n;
        double var = 0.0;
        for (const auto* m : members) {
            const double d = m->alignment_percent - mean;
            var += d * d;
        }
        s.mean_alignment = mean;
        s.stderr_alignment = s.n > 1 ? std::sqrt(var / (s.n - 1)) / std::sqrt(static_cast<double>(s.n)) : 0.0;
        out.push_back(std::move(s));
    }
    return out;
}

inline std::string rows_csv(const std::vector<AlignmentRow>& rows) {
    std::ostringstream os;
    os << "config_id,experiment,cell,C,W,T,s_percent,SS,estimator,seed,alignment_percent,mae,wallclock_ns\n";
    char buf[48];
    for (const auto& r : rows) {
        os << r.config_id << "," << r.experiment << "," << r.cell << "," << r.c << "," << r.w << ","
           << r.t << "," << detail::format_double(r.s_percent) << "," << detail::format_double(r.ss)
           << "," << r.estimator << "," << r.seed << ",";
        std::snprintf(buf, sizeof buf, "%.10g", r.alignment_percent);
        os << buf << ",";
        std::snprintf(buf, sizeof buf, "%.17g", r.mae);
        os << buf << "," << r.wallclock_ns << "\n";
    }
    return os.str();
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream os;
    os << "config_id,experiment,cell,C,W,T,s_percent,SS,estimator,mean_alignment,stderr_alignment,n\n";
    char buf[48];
    for (const auto& r : rows) {
        os << r.config_id << "," << r.experiment << "," << r.cell << "," << r.c << "," << r.w << ","
           << r.t << "," << detail::format_double(r.s_percent) << "," << detail::format_double(r.ss)
           << "," << r.estimator << ",";
        std::snprintf(buf, sizeof buf, "%.10g", r.mean_alignment);
        os << buf << ",";
        std::snprintf(buf, sizeof buf, "%.10g", r.stderr_alignment);
        os << buf << "," << r.n << "\n";
    }
    return os.str();
}

inline std::string decay_csv(const std::vector<DecayRow>& rows) {
    std::ostringstream os;
    os << "cell,bias,step,mean_abs_state,stderr_abs_state,n\n";
    char buf[48];
    for (const auto& r : rows) {
        os << r.cell << "," << (r.bias ? 1 : 0) << "," << r.step << ",";
        std::snprintf(buf, sizeof buf, "%.17g", r.mean_abs_state);
        os << buf << ",";
        std::snprintf(buf, sizeof buf, "%.17g", r.stderr_abs_state);
        os << buf << "," << r.n << "\n";
    }
    return os.str();
}

}  // namespace colnn
