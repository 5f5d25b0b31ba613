#pragma once

// Command-line surface. Config files are JSON mirroring ExperimentConfig
// field names; flags override file values; unknown keys are rejected. Exit
// codes: 0 success, 1 experiment/selfcheck failure, 2 usage error. All
// outputs land under --out-dir.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "colnn/bench.hpp"
#include "colnn/svg.hpp"

namespace colnn::cli {

struct Invocation {
    ExperimentKind kind = ExperimentKind::AlignRnn;
    bool is_selfcheck = false;
    bool is_plot = false;
    bool is_sweep_grid = false;  // sweep without explicit --columns/--width: full grid
    ExperimentConfig cfg;
    std::string out_dir = "out";
    std::string plot_csv;
    PlotKind plot_kind = PlotKind::AlignmentVsS;
    bool json_stdout = false;
    std::string inject_fault;  // test hook for the selfcheck mutation check
};

namespace detail {

inline std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    if (out.empty()) throw std::invalid_argument("empty list: " + s);
    return out;
}

inline std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    for (double v : parse_double_list(s)) out.push_back(static_cast<int>(v));
    return out;
}

inline std::vector<std::string> parse_string_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline TbpttMode tbptt_mode_from_name(const std::string& s) {
    if (s == "sliding") return TbpttMode::Sliding;
    if (s == "tail") return TbpttMode::Tail;
    throw std::invalid_argument("unknown tbptt mode: " + s + " (expected sliding|tail)");
}

inline void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw std::invalid_argument("unknown config key '" + it.key() + "' in " + where);
        }
    }
}

inline void apply_config_json(ExperimentConfig& cfg, std::string& out_dir, const nlohmann::json& j) {
    require_keys(j, {"experiment", "net", "seq", "lateral_ratios", "truncation_windows", "step_size",
                     "step_sizes", "seeds", "estimators", "master_seed", "workers", "timing",
                     "tbptt_mode", "meta_tbptt_mode", "decay_hidden", "decay_steps", "out_dir"},
                 "config root");
    if (j.contains("net")) {
        const auto& n = j["net"];
        require_keys(n, {"num_columns", "width", "input_dim", "cell_kind", "lateral_ratio_s", "mask_r"},
                     "net");
        if (n.contains("num_columns")) cfg.net.columns = n["num_columns"].get<int>();
        if (n.contains("width")) cfg.net.width = n["width"].get<int>();
        if (n.contains("input_dim")) cfg.net.input_dim = n["input_dim"].get<int>();
        if (n.contains("cell_kind")) cfg.net.cell = cell_from_name(n["cell_kind"].get<std::string>());
        if (n.contains("lateral_ratio_s")) cfg.lateral_ratios = {n["lateral_ratio_s"].get<double>()};
        if (n.contains("mask_r")) cfg.net.mask_r = n["mask_r"].get<bool>();
    }
    if (j.contains("seq")) {
        const auto& sq = j["seq"];
        require_keys(sq, {"length", "input_dim"}, "seq");
        if (sq.contains("length")) cfg.seq.length = sq["length"].get<int>();
        if (sq.contains("input_dim")) {
            cfg.seq.input_dim = sq["input_dim"].get<int>();
            cfg.net.input_dim = cfg.seq.input_dim;
        }
    }
    if (j.contains("lateral_ratios")) cfg.lateral_ratios = j["lateral_ratios"].get<std::vector<double>>();
    if (j.contains("truncation_windows")) cfg.truncation_windows = j["truncation_windows"].get<std::vector<int>>();
    if (j.contains("step_size")) cfg.step_size = j["step_size"].get<double>();
    if (j.contains("step_sizes")) cfg.step_sizes = j["step_sizes"].get<std::vector<double>>();
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<int>();
    if (j.contains("estimators")) cfg.estimators = j["estimators"].get<std::vector<std::string>>();
    if (j.contains("master_seed")) cfg.master_seed = j["master_seed"].get<uint64_t>();
    if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
    if (j.contains("timing")) cfg.timing = j["timing"].get<bool>();
    if (j.contains("tbptt_mode")) cfg.rnn_tbptt_mode = tbptt_mode_from_name(j["tbptt_mode"].get<std::string>());
    if (j.contains("meta_tbptt_mode")) {
        cfg.meta_tbptt_mode = tbptt_mode_from_name(j["meta_tbptt_mode"].get<std::string>());
    }
    if (j.contains("decay_hidden")) cfg.decay_hidden = j["decay_hidden"].get<int>();
    if (j.contains("decay_steps")) cfg.decay_steps = j["decay_steps"].get<int>();
    if (j.contains("out_dir")) out_dir = j["out_dir"].get<std::string>();
}

struct Staging {
    std::string config_path;
    int columns = -1, width = -1, input_dim = -1, length = -1, seeds = -1, workers = -1;
    int decay_hidden = -1, decay_steps = -1;
    long long seed = -1;
    double step_size = -1.0;
    std::string out_dir, s_list, windows, step_sizes, cell, mask_r, tbptt_mode, meta_tbptt_mode,
        estimators;
    bool timing = false;
};

inline void add_common(CLI::App* sub, Staging& st) {
    sub->add_option("--config", st.config_path, "JSON config file (flags override file values)");
    sub->add_option("--seed", st.seed, "master seed");
    sub->add_option("--seeds", st.seeds, "number of seeds per cell");
    sub->add_option("--out-dir", st.out_dir, "output directory");
    sub->add_option("--columns", st.columns, "number of columns C");
    sub->add_option("--width", st.width, "units per layer / feature length W");
    sub->add_option("--input-dim", st.input_dim, "input vector length");
    sub->add_option("--length", st.length, "sequence length T");
    sub->add_option("--s-list", st.s_list, "comma list of lateral ratios (percent)");
    sub->add_option("--windows", st.windows, "comma list of T-BPTT windows");
    sub->add_option("--step-size", st.step_size, "LMS step size (meta experiments)");
    sub->add_option("--step-sizes", st.step_sizes, "comma list of step sizes (sweep)");
    sub->add_option("--cell", st.cell, "cell kind: additive|static|gru_column");
    sub->add_option("--mask-r", st.mask_r, "mask off-diagonal R entries: on|off");
    sub->add_option("--workers", st.workers, "parallel seed workers");
    sub->add_option("--estimators", st.estimators, "comma list of estimators");
    sub->add_option("--tbptt-mode", st.tbptt_mode, "recurrent T-BPTT window semantics: tail|sliding");
    sub->add_option("--meta-tbptt-mode", st.meta_tbptt_mode, "meta T-BPTT window semantics: sliding|tail");
    sub->add_flag("--timing", st.timing, "record wallclock_ns (breaks byte-reproducibility)");
}

inline void apply_staging(const Staging& st, ExperimentConfig& cfg, std::string& out_dir) {
    if (!st.config_path.empty()) {
        std::ifstream f(st.config_path);
        if (!f) throw std::invalid_argument("cannot open config file: " + st.config_path);
        nlohmann::json j = nlohmann::json::parse(f);
        apply_config_json(cfg, out_dir, j);
    }
    if (st.columns >= 0) cfg.net.columns = st.columns;
    if (st.width >= 0) cfg.net.width = st.width;
    if (st.input_dim >= 0) {
        cfg.net.input_dim = st.input_dim;
        cfg.seq.input_dim = st.input_dim;
    }
    if (st.length >= 0) cfg.seq.length = st.length;
    if (st.seeds >= 0) cfg.seeds = st.seeds;
    if (st.seed >= 0) cfg.master_seed = static_cast<uint64_t>(st.seed);
    if (!st.out_dir.empty()) out_dir = st.out_dir;
    if (!st.s_list.empty()) cfg.lateral_ratios = parse_double_list(st.s_list);
    if (!st.windows.empty()) cfg.truncation_windows = parse_int_list(st.windows);
    if (st.step_size >= 0) cfg.step_size = st.step_size;
    if (!st.step_sizes.empty()) cfg.step_sizes = parse_double_list(st.step_sizes);
    if (!st.cell.empty()) cfg.net.cell = cell_from_name(st.cell);
    if (!st.mask_r.empty()) {
        if (st.mask_r != "on" && st.mask_r != "off") throw std::invalid_argument("--mask-r expects on|off");
        cfg.net.mask_r = st.mask_r == "on";
    }
    if (st.workers >= 0) cfg.workers = st.workers;
    if (!st.estimators.empty()) cfg.estimators = parse_string_list(st.estimators);
    if (!st.tbptt_mode.empty()) cfg.rnn_tbptt_mode = tbptt_mode_from_name(st.tbptt_mode);
    if (!st.meta_tbptt_mode.empty()) cfg.meta_tbptt_mode = tbptt_mode_from_name(st.meta_tbptt_mode);
    if (st.decay_hidden >= 0) cfg.decay_hidden = st.decay_hidden;
    if (st.decay_steps >= 0) cfg.decay_steps = st.decay_steps;
    if (st.timing) cfg.timing = true;
    if (cfg.net.input_dim != cfg.seq.input_dim) {
        throw std::invalid_argument("net.input_dim and seq.input_dim must agree");
    }
}

// True when sampling a mask with this (C, W, s) is possible.
inline bool mask_feasible(const NetConfig& net, double s) {
    if (net.columns == 1) return true;  // no lateral slots; ratio is vacuous
    if (lateral_count_u(s, net.width) > (net.columns - 1) * net.width) return false;
    if (net.mask_r && lateral_count_r(s) > net.columns - 1) return false;
    return true;
}

}  // namespace detail

// The Appendix-B style grid: C x W combinations for the recurrent experiment
// plus C x W x SS combinations for the meta experiment.
struct SweepPlan {
    std::vector<ExperimentConfig> rnn;
    std::vector<ExperimentConfig> meta;
    std::vector<std::string> notes;  // skipped infeasible (C, s) cells
};

inline SweepPlan plan_sweep(const ExperimentConfig& base) {
    const std::vector<int> grid = {5, 10, 20, 50, 100};
    SweepPlan plan;
    for (int c : grid) {
        for (int w : grid) {
            ExperimentConfig rnn = base;
            rnn.experiment = ExperimentKind::AlignRnn;
            rnn.net.columns = c;
            rnn.net.width = w;
            rnn.net.cell = CellKind::AdditiveTanh;
            rnn.lateral_ratios.clear();
            for (double s : base.lateral_ratios) {
                NetConfig nc = rnn.net;
                if (detail::mask_feasible(nc, s)) {
                    rnn.lateral_ratios.push_back(s);
                } else {
                    plan.notes.push_back("skipping s=" + detail::format_double(s) + "% for C=" +
                                         std::to_string(c) + ",W=" + std::to_string(w) +
                                         " (not enough off-diagonal slots)");
                }
            }
            plan.rnn.push_back(rnn);
            for (double ss : base.step_sizes) {
                ExperimentConfig meta = rnn;
                meta.experiment = ExperimentKind::StepSizeSweep;
                meta.net.cell = CellKind::Static;
                meta.step_size = ss;
                meta.step_sizes = {ss};
                meta.truncation_windows = {1, 5, 10, 40};
                plan.meta.push_back(meta);
            }
        }
    }
    return plan;
}

// ---------------------------------------------------------------------------
// selfcheck

struct SelfcheckProperty {
    std::string property;
    bool pass = false;
    double max_abs_dev = 0.0;
    double tolerance = 0.0;
};

namespace detail {

inline double rel_inf_dev(const Vector& a, const Vector& b) {
    double dev = 0.0, scale = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dev = std::max(dev, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(b[i]));
    }
    return dev / std::max(scale, 1e-300);
}

inline double rel_inf_dev_masked(const Vector& a, const Vector& b, const std::vector<uint8_t>& skip) {
    double dev = 0.0, scale = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        if (skip[i]) continue;
        dev = std::max(dev, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(b[i]));
    }
    return dev / std::max(scale, 1e-300);
}

}  // namespace detail

inline std::vector<SelfcheckProperty> run_selfcheck(const std::string& inject_fault = "") {
    std::vector<SelfcheckProperty> report;

    // 1. single backward pass equals per-state backward passes, per group
    {
        SelfcheckProperty p{"single_pass_equivalence", true, 0.0, 1e-15};
        RngStream rng = RngStream::from_seed(2024);
        for (int inst = 0; inst < 100; ++inst) {
            NetConfig nc;
            nc.columns = 1 + static_cast<int>(rng.below(4));
            nc.width = 1 + static_cast<int>(rng.below(5));
            nc.input_dim = 1 + static_cast<int>(rng.below(6));
            nc.cell = static_cast<CellKind>(rng.below(3));
            nc.lateral_s = nc.columns > 1 ? static_cast<double>(rng.below(2) * 100) : 0.0;
            ColumnarNetwork net = build_network(nc, rng.fork(5000 + inst));
            SequenceSpec sp{2, nc.input_dim};
            Sequence seq = gen_sequence(sp, rng.fork(6000 + inst));
            StepTape tape = forward_frozen(net, seq.xs, seq.ys);
            const StepRecord& rec = tape.back();
            LocalGrads lg = local_grads_single_pass(net, rec);
            double scale = 1.0;
            for (int i = 0; i < nc.columns; ++i) {
                Vector g_h(nc.columns, 0.0);
                g_h[i] = 1.0;
                GradEstimate full(net.theta_size(), 0.0);
                Vector g_hprev = step_backward(net, rec, g_h, full.data());
                for (int k = 0; k < net.group_size(); ++k) {
                    const double ref = full[net.group_offset(i) + k];
                    p.max_abs_dev = std::max(p.max_abs_dev, std::abs(lg.d_theta[i][k] - ref));
                    scale = std::max(scale, std::abs(ref));
                }
                p.max_abs_dev = std::max(p.max_abs_dev, std::abs(lg.d_hprev[i] - g_hprev[i]));
            }
            p.max_abs_dev /= scale;
        }
        p.pass = p.max_abs_dev <= p.tolerance;
        report.push_back(p);
    }

    // 2. exactness with no lateral connections
    {
        SelfcheckProperty p{"s0_exactness", true, 0.0, 1e-8};
        const bool flip = inject_fault == "sign-flip";
        for (uint64_t seed = 0; seed < 5; ++seed) {
            ExperimentConfig cfg;
            cfg.net.columns = 5;
            cfg.net.width = 10;
            cfg.net.input_dim = 20;
            cfg.net.cell = CellKind::AdditiveTanh;
            cfg.seq = {50, 20};
            cfg.master_seed = 77;
            detail::RunInputs in = detail::make_run_inputs(cfg, 0.0, seed);
            StepTape tape = forward_frozen(in.net, in.seq.xs, in.seq.ys);
            GradEstimate truth = bptt_full(in.net, tape);
            MasterUserTrace trace = MasterUserTrace::zeros(in.net);
            GradEstimate total(in.net.theta_size(), 0.0);
            for (const StepRecord& rec : tape) {
                LocalGrads lg = local_grads_single_pass(in.net, rec);
                if (flip) {
                    for (auto& d : lg.d_theta) {
                        for (double& v : d) v = -v;
                    }
                }
                master_user_update(trace, lg);
                for (int i = 0; i < in.net.cfg.columns; ++i) {
                    axpy(-rec.delta * in.net.w[i], trace.t[i].data(),
                         total.data() + in.net.group_offset(i), static_cast<int>(trace.t[i].size()));
                }
            }
            p.max_abs_dev = std::max(p.max_abs_dev, detail::rel_inf_dev(total, truth));
            if (alignment(total, truth) != 100.0) p.max_abs_dev = std::max(p.max_abs_dev, 1.0);
        }
        p.pass = p.max_abs_dev <= p.tolerance;
        report.push_back(p);
    }

    // 3 + 4. oracle triangle and the finite-difference suite
    {
        SelfcheckProperty tri{"oracle_triangle", true, 0.0, 1e-8};
        SelfcheckProperty fds{"finite_difference_suite", true, 0.0, 1e-4};
        for (int c : {1, 2, 3}) {
            for (int w : {2, 5}) {
                for (int t : {1, 5, 20}) {
                    ExperimentConfig cfg;
                    cfg.net.columns = c;
                    cfg.net.width = w;
                    cfg.net.input_dim = 10;
                    cfg.net.cell = CellKind::AdditiveTanh;
                    cfg.net.lateral_s = c > 1 ? 100.0 : 0.0;
                    cfg.lateral_ratios = {cfg.net.lateral_s};
                    cfg.seq = {t, 10};
                    cfg.master_seed = 99;
                    detail::RunInputs in = detail::make_run_inputs(cfg, cfg.net.lateral_s, 0);
                    StepTape tape = forward_frozen(in.net, in.seq.xs, in.seq.ys);
                    GradEstimate b = bptt_full(in.net, tape);
                    GradEstimate r = rtrl_full(in.net, tape);
                    tri.max_abs_dev = std::max(tri.max_abs_dev, detail::rel_inf_dev(r, b));
                    FiniteDiffResult fd = finite_diff(in.net, in.seq.xs, in.seq.ys, 1e-5);
                    fds.max_abs_dev =
                        std::max(fds.max_abs_dev, detail::rel_inf_dev_masked(b, fd.grad, fd.kink));
                }
            }
        }
        tri.pass = tri.max_abs_dev <= tri.tolerance;
        fds.pass = fds.max_abs_dev <= fds.tolerance;
        report.push_back(tri);
        report.push_back(fds);
    }

    return report;
}

inline nlohmann::json selfcheck_json(const std::vector<SelfcheckProperty>& report) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : report) {
        arr.push_back({{"property", p.property},
                       {"status", p.pass ? "pass" : "fail"},
                       {"max_abs_dev", p.max_abs_dev},
                       {"tolerance", p.tolerance}});
    }
    return arr;
}

// ---------------------------------------------------------------------------
// parse + dispatch

inline int parse_and_validate(const std::vector<std::string>& args, Invocation& inv,
                              std::ostream& err) {
    CLI::App app{"columnar-network gradient benchmark"};
    app.require_subcommand(1);
    detail::Staging st;
    std::string plot_kind_name = "alignment_vs_s";

    CLI::App* align_rnn = app.add_subcommand("align-rnn", "recurrent gradient alignment vs the BPTT oracle");
    CLI::App* align_meta = app.add_subcommand("align-meta", "meta-gradient alignment with online LMS updates");
    CLI::App* ablation = app.add_subcommand("meta-ablation", "full vs meta-ablated credit");
    CLI::App* decay = app.add_subcommand("decay", "untrained LSTM/GRU state decay");
    CLI::App* sweep = app.add_subcommand("sweep", "hyperparameter grid sweep");
    CLI::App* selfcheck = app.add_subcommand("selfcheck", "run the oracle-equivalence suite");
    CLI::App* plot = app.add_subcommand("plot", "render a summary CSV to SVG");
    for (CLI::App* sub : {align_rnn, align_meta, ablation, decay, sweep}) detail::add_common(sub, st);
    decay->add_option("--decay-hidden", st.decay_hidden, "hidden units");
    decay->add_option("--decay-steps", st.decay_steps, "zero-input steps");
    selfcheck->add_option("--out-dir", st.out_dir, "output directory");
    selfcheck->add_flag("--json", inv.json_stdout, "print the JSON report to stdout");
    selfcheck->add_option("--inject-fault", inv.inject_fault, "test hook: sign-flip")->group("");
    plot->add_option("csv", inv.plot_csv, "summary CSV path")->required();
    plot->add_option("--kind", plot_kind_name, "alignment_vs_s|decay_curve|stepsize_panel");
    plot->add_option("--out-dir", st.out_dir, "output directory");

    std::vector<const char*> argv;
    argv.push_back("colnn");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return -1;  // handled: caller exits 0
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (align_rnn->parsed()) {
            inv.kind = ExperimentKind::AlignRnn;
        } else if (align_meta->parsed()) {
            inv.kind = ExperimentKind::AlignMeta;
            inv.cfg.net.cell = CellKind::Static;
            inv.cfg.truncation_windows = {1, 5, 10, 40};
        } else if (ablation->parsed()) {
            inv.kind = ExperimentKind::MetaAblation;
            inv.cfg.net.cell = CellKind::AdditiveTanh;
            inv.cfg.estimators = {"MasterUser", "MasterUserNoMeta"};
        } else if (decay->parsed()) {
            inv.kind = ExperimentKind::Decay;
        } else if (sweep->parsed()) {
            inv.kind = ExperimentKind::StepSizeSweep;
            inv.is_sweep_grid = st.columns < 0 && st.width < 0 && st.config_path.empty();
            inv.cfg.net.cell = CellKind::Static;
            inv.cfg.truncation_windows = {1, 5, 10, 40};
        } else if (selfcheck->parsed()) {
            inv.is_selfcheck = true;
            if (!st.out_dir.empty()) inv.out_dir = st.out_dir;
            return 0;
        } else if (plot->parsed()) {
            inv.is_plot = true;
            inv.plot_kind = plot_kind_from_name(plot_kind_name);
            if (!st.out_dir.empty()) inv.out_dir = st.out_dir;
            return 0;
        }
        inv.cfg.experiment = inv.kind;
        detail::apply_staging(st, inv.cfg, inv.out_dir);
        inv.cfg.validate();
        if (inv.kind != ExperimentKind::Decay && !inv.is_sweep_grid) {
            for (double s : inv.cfg.lateral_ratios) {
                if (!detail::mask_feasible(inv.cfg.net, s)) {
                    throw std::invalid_argument(
                        "s=" + detail::format_double(s) + "% is infeasible for C=" +
                        std::to_string(inv.cfg.net.columns) + ", W=" + std::to_string(inv.cfg.net.width));
                }
            }
        }
    } catch (const std::exception& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
}

}  // namespace detail

inline int dispatch(const Invocation& inv, std::ostream& out, std::ostream& err) {
    namespace fs = std::filesystem;
    try {
        fs::create_directories(inv.out_dir);
        if (inv.is_plot) {
            std::ifstream f(inv.plot_csv);
            if (!f) {
                err << "cannot open " << inv.plot_csv << "\n";
                return 1;
            }
            std::stringstream ss;
            ss << f.rdbuf();
            std::string svg;
            try {
                svg = render_svg(ss.str(), inv.plot_kind);
            } catch (const std::exception& e) {
                err << "plot failed: " << e.what() << "\n";
                return 1;
            }
            std::string name = inv.plot_kind == PlotKind::AlignmentVsS ? "alignment_vs_s"
                               : inv.plot_kind == PlotKind::DecayCurve ? "decay_curve"
                                                                       : "stepsize_panel";
            const fs::path dest = fs::path(inv.out_dir) / (name + ".svg");
            detail::write_file(dest, svg);
            err << "wrote " << dest.string() << "\n";
            return 0;
        }
        if (inv.is_selfcheck) {
            auto report = run_selfcheck(inv.inject_fault);
            bool all = true;
            for (const auto& p : report) {
                out << p.property << ": " << (p.pass ? "PASS" : "FAIL") << " (max_abs_dev=" << p.max_abs_dev
                    << ", tolerance=" << p.tolerance << ")\n";
                all = all && p.pass;
            }
            const nlohmann::json j = selfcheck_json(report);
            detail::write_file(fs::path(inv.out_dir) / "selfcheck_report.json", j.dump(2) + "\n");
            if (inv.json_stdout) out << j.dump(2) << "\n";
            return all ? 0 : 1;
        }
        const std::string name = experiment_name(inv.kind);
        if (inv.kind == ExperimentKind::Decay) {
            auto rows = run_decay(inv.cfg.decay_hidden, inv.cfg.decay_steps, inv.cfg.seeds,
                                  inv.cfg.master_seed);
            const fs::path dest = fs::path(inv.out_dir) / "decay.csv";
            detail::write_file(dest, decay_csv(rows));
            err << "wrote " << dest.string() << "\n";
            return 0;
        }
        std::vector<AlignmentRow> rows;
        if (inv.kind == ExperimentKind::AlignRnn) {
            rows = run_align_rnn(inv.cfg);
        } else if (inv.kind == ExperimentKind::AlignMeta) {
            rows = run_align_meta(inv.cfg);
        } else if (inv.kind == ExperimentKind::MetaAblation) {
            rows = run_meta_ablation(inv.cfg);
        } else if (inv.is_sweep_grid) {
            SweepPlan plan = plan_sweep(inv.cfg);
            for (const auto& note : plan.notes) err << note << "\n";
            for (const auto& c : plan.rnn) {
                auto r = run_align_rnn(c);
                rows.insert(rows.end(), r.begin(), r.end());
                err << "finished " << detail::make_config_id(c) << "\n";
            }
            for (const auto& c : plan.meta) {
                auto r = run_stepsize_sweep(c);
                rows.insert(rows.end(), r.begin(), r.end());
                err << "finished " << detail::make_config_id(c, c.step_size) << "\n";
            }
        } else {
            rows = run_stepsize_sweep(inv.cfg);
        }
        const fs::path raw = fs::path(inv.out_dir) / (name + "_rows.csv");
        const fs::path sum = fs::path(inv.out_dir) / (name + "_summary.csv");
        detail::write_file(raw, rows_csv(rows));
        detail::write_file(sum, summary_csv(summarize(rows)));
        err << "wrote " << raw.string() << "\n";
        err << "wrote " << sum.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Invocation inv;
    const int rc = parse_and_validate(args, inv, err);
    if (rc == -1) return 0;  // help
    if (rc != 0) return rc;
    return dispatch(inv, out, err);
}

}  // namespace colnn::cli
