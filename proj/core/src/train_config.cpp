#include "csr/train_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace csr {

void TrainConfig::validate() const {
    if (k < 1) throw std::invalid_argument("config: k must be >= 1");
    if (h < k) throw std::invalid_argument("config: h must be >= k");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be set (>= 1)");
    if (gamma > 0.0 && batch_size < 2) {
        throw std::invalid_argument("config: batch_size must be >= 2 when gamma > 0");
    }
    if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be > 0");
    if (!(adam_eps > 0.0)) throw std::invalid_argument("config: adam_eps must be > 0");
    if (weight_decay < 0.0) throw std::invalid_argument("config: weight_decay must be >= 0");
    if (beta < 0.0 || gamma < 0.0) throw std::invalid_argument("config: beta/gamma must be >= 0");
    if (dead_window < 1) throw std::invalid_argument("config: dead_window must be >= 1");
    for (double x : {beta, gamma, lr, adam_eps, weight_decay}) {
        if (!std::isfinite(x)) throw std::invalid_argument("config: non-finite value");
    }
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config: bad bool for " + key + ": '" + v + "'");
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("config: expected key=value: '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "k") cfg.k = parse_uint(key, val);
        else if (key == "h") cfg.h = parse_uint(key, val);
        else if (key == "k_aux") cfg.k_aux = parse_uint(key, val);
        else if (key == "beta") cfg.beta = parse_double(key, val);
        else if (key == "gamma") cfg.gamma = parse_double(key, val);
        else if (key == "lr") cfg.lr = parse_double(key, val);
        else if (key == "epochs") cfg.epochs = parse_uint(key, val);
        else if (key == "batch_size") cfg.batch_size = parse_uint(key, val);
        else if (key == "adam_eps") cfg.adam_eps = parse_double(key, val);
        else if (key == "weight_decay") cfg.weight_decay = parse_double(key, val);
        else if (key == "dead_window") cfg.dead_window = parse_uint(key, val);
        else if (key == "seed") cfg.seed = parse_uint(key, val);
        else if (key == "supervised") cfg.supervised = parse_bool(key, val);
        else if (key == "k_multi_enabled") cfg.k_multi_enabled = parse_bool(key, val);
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    return cfg;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument(path + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_train_config(buf.str());
}

std::string serialize_train_config(const TrainConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "k=" << cfg.k << "\n"
        << "h=" << cfg.h << "\n"
        << "k_aux=" << cfg.k_aux << "\n"
        << "beta=" << cfg.beta << "\n"
        << "gamma=" << cfg.gamma << "\n"
        << "lr=" << cfg.lr << "\n"
        << "epochs=" << cfg.epochs << "\n"
        << "batch_size=" << cfg.batch_size << "\n"
        << "adam_eps=" << cfg.adam_eps << "\n"
        << "weight_decay=" << cfg.weight_decay << "\n"
        << "dead_window=" << cfg.dead_window << "\n"
        << "seed=" << cfg.seed << "\n"
        << "supervised=" << (cfg.supervised ? "true" : "false") << "\n"
        << "k_multi_enabled=" << (cfg.k_multi_enabled ? "true" : "false") << "\n";
    return out.str();
}

}  // namespace csr
