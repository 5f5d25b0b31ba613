#pragma once

// Checkpoint format: <base>.bin holds the flat little-endian f64 parameter
// array (canonical theta ordering, then w); <base>.json records the config,
// the unmasked lateral indices, and the build seed. Reload is bit-exact.

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "colnn/network.hpp"

namespace colnn {

inline void write_f64_le(std::ostream& os, double d) {
    uint64_t bits = std::bit_cast<uint64_t>(d);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    os.write(buf, 8);
}

inline double read_f64_le(std::istream& is) {
    char buf[8];
    is.read(buf, 8);
    if (!is) throw std::runtime_error("checkpoint: truncated parameter file");
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return std::bit_cast<double>(bits);
}

inline void save_checkpoint(const ColumnarNetwork& net, const std::string& base_path,
                            uint64_t build_seed) {
    {
        std::ofstream bin(base_path + ".bin", std::ios::binary);
        if (!bin) throw std::runtime_error("checkpoint: cannot open " + base_path + ".bin");
        for (double d : net.theta_flat()) write_f64_le(bin, d);
        for (double d : net.w) write_f64_le(bin, d);
    }
    nlohmann::json j;
    j["columns"] = net.cfg.columns;
    j["width"] = net.cfg.width;
    j["input_dim"] = net.cfg.input_dim;
    j["cell_kind"] = cell_name(net.cfg.cell);
    j["lateral_ratio_s"] = net.cfg.lateral_s;
    j["mask_r"] = net.cfg.mask_r;
    j["seed"] = build_seed;
    std::vector<std::vector<int>> u_idx(net.cfg.columns), r_idx(net.cfg.columns);
    for (int i = 0; i < net.cfg.columns; ++i) {
        for (int l = 0; l < net.mask.u_mask.cols; ++l) {
            if (net.mask.u_mask.at(i, l) != 0.0) u_idx[i].push_back(l);
        }
        for (int jj = 0; jj < net.cfg.columns; ++jj) {
            if (net.mask.r_mask.at(i, jj) != 0.0) r_idx[i].push_back(jj);
        }
    }
    j["u_mask_indices"] = u_idx;
    j["r_mask_indices"] = r_idx;
    std::ofstream js(base_path + ".json");
    if (!js) throw std::runtime_error("checkpoint: cannot open " + base_path + ".json");
    js << j.dump(2) << "\n";
}

inline ColumnarNetwork load_checkpoint(const std::string& base_path, uint64_t* seed_out = nullptr) {
    std::ifstream js(base_path + ".json");
    if (!js) throw std::runtime_error("checkpoint: cannot open " + base_path + ".json");
    nlohmann::json j = nlohmann::json::parse(js);
    NetConfig cfg;
    cfg.columns = j.at("columns").get<int>();
    cfg.width = j.at("width").get<int>();
    cfg.input_dim = j.at("input_dim").get<int>();
    cfg.cell = cell_from_name(j.at("cell_kind").get<std::string>());
    cfg.lateral_s = j.at("lateral_ratio_s").get<double>();
    cfg.mask_r = j.at("mask_r").get<bool>();
    if (seed_out) *seed_out = j.at("seed").get<uint64_t>();

    ColumnarNetwork net;
    net.cfg = cfg;
    const int c = cfg.columns, w = cfg.width, d = cfg.input_dim;
    net.columns.resize(c);
    for (auto& col : net.columns) {
        col.w1 = Matrix(w, d + 1);
        col.b1.assign(w, 0.0);
        col.w2 = Matrix(w, w);
        col.b2.assign(w, 0.0);
    }
    net.cell.u = Matrix(c, c * w);
    net.cell.r = Matrix(c, c);
    if (net.is_gru()) {
        net.cell.uz = Matrix(c, c * w);
        net.cell.rz = Matrix(c, c);
        net.cell.ur = Matrix(c, c * w);
        net.cell.rr = Matrix(c, c);
    }
    net.mask.u_mask = Matrix(c, c * w, 0.0);
    net.mask.r_mask = Matrix(c, c, 0.0);
    auto u_idx = j.at("u_mask_indices").get<std::vector<std::vector<int>>>();
    auto r_idx = j.at("r_mask_indices").get<std::vector<std::vector<int>>>();
    for (int i = 0; i < c; ++i) {
        for (int l : u_idx.at(i)) net.mask.u_mask.at(i, l) = 1.0;
        for (int jj : r_idx.at(i)) net.mask.r_mask.at(i, jj) = 1.0;
    }

    std::ifstream bin(base_path + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("checkpoint: cannot open " + base_path + ".bin");
    Vector flat(net.theta_size(), 0.0);
    for (double& x : flat) x = read_f64_le(bin);
    net.set_theta_flat(flat);
    net.w.assign(c, 0.0);
    for (double& x : net.w) x = read_f64_le(bin);
    return net;
}

}  // namespace colnn
