#pragma once

#include <charconv>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "poisense/jmvae.hpp"
#include "poisense/net.hpp"

namespace poisense {

/// Shortest round-trip decimal representation (std::to_chars), so repeated
/// runs produce byte-identical files and readers recover the exact double.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path);
        write_cells(header);
    }

    void row(const std::vector<std::string>& cells) { write_cells(cells); }

private:
    void write_cells(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }
    std::ofstream out_;
};

// --- weight files -----------------------------------------------------------

inline nlohmann::json layer_to_json(const Layer& l) {
    return {{"rows", l.out},
            {"cols", l.in},
            {"weights", l.weights},
            {"bias", l.bias},
            {"activation", l.act == Activation::ReLU ? "relu" : "linear"}};
}

inline nlohmann::json net_to_json(const DenseNet& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers) layers.push_back(layer_to_json(l));
    return layers;
}

inline Layer layer_from_json(const nlohmann::json& j) {
    Layer l;
    l.out = j.at("rows").get<std::size_t>();
    l.in = j.at("cols").get<std::size_t>();
    l.weights = j.at("weights").get<std::vector<double>>();
    l.bias = j.at("bias").get<std::vector<double>>();
    const std::string act = j.at("activation").get<std::string>();
    if (act == "relu")
        l.act = Activation::ReLU;
    else if (act == "linear")
        l.act = Activation::Linear;
    else
        throw std::runtime_error("unknown activation in weight file: " + act);
    return l;
}

inline DenseNet net_from_json(const nlohmann::json& j) {
    DenseNet net;
    for (const auto& lj : j) net.layers.push_back(layer_from_json(lj));
    net.validate();
    return net;
}

inline nlohmann::json jmvae_to_json(const JmvaeModel& m) {
    return {{"dims", {{"d_x", m.d_x}, {"d_w", m.d_w}, {"d_z", m.d_z}}},
            {"nets",
             {{"enc_joint", net_to_json(m.enc_joint)},
              {"enc_x", net_to_json(m.enc_x)},
              {"enc_w", net_to_json(m.enc_w)},
              {"dec_x", net_to_json(m.dec_x)},
              {"dec_w", net_to_json(m.dec_w)}}}};
}

inline JmvaeModel jmvae_from_json(const nlohmann::json& j) {
    JmvaeModel m;
    m.d_x = j.at("dims").at("d_x").get<std::size_t>();
    m.d_w = j.at("dims").at("d_w").get<std::size_t>();
    m.d_z = j.at("dims").at("d_z").get<std::size_t>();
    const auto& nets = j.at("nets");
    m.enc_joint = net_from_json(nets.at("enc_joint"));
    m.enc_x = net_from_json(nets.at("enc_x"));
    m.enc_w = net_from_json(nets.at("enc_w"));
    m.dec_x = net_from_json(nets.at("dec_x"));
    m.dec_w = net_from_json(nets.at("dec_w"));
    m.validate();
    return m;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return nlohmann::json::parse(in);
}

inline void save_jmvae(const std::string& path, const JmvaeModel& m) {
    write_json_file(path, jmvae_to_json(m));
}

inline JmvaeModel load_jmvae(const std::string& path) {
    return jmvae_from_json(read_json_file(path));
}

inline void save_qnet(const std::string& path, const DenseNet& net, std::size_t n_poi,
                      std::size_t d_z) {
    write_json_file(path, {{"dims", {{"n_poi", n_poi}, {"d_z", d_z}}},
                           {"net", net_to_json(net)}});
}

inline DenseNet load_qnet(const std::string& path, std::size_t expected_n_poi,
                          std::size_t expected_d_z) {
    const nlohmann::json j = read_json_file(path);
    if (j.at("dims").at("n_poi").get<std::size_t>() != expected_n_poi ||
        j.at("dims").at("d_z").get<std::size_t>() != expected_d_z)
        throw std::runtime_error("q-network dims do not match the configuration: " + path);
    return net_from_json(j.at("net"));
}

} // namespace poisense
