#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "shuttlechain/common.hpp"
#include "shuttlechain/model.hpp"

namespace shuttlechain {

// Fully-resolved run configuration. Parsing is strict: unknown sections or
// keys and duplicate keys are rejected with their locations, and every
// default the parser fills in is visible in the canonical emitted form, so
// a stored resolved_config documents the complete run.
struct RunConfig {
    int schema_version = 1;

    ChainParams chain;  // [model] + [chain]; chain.phi defaults to 2pi/3

    // [dynamics]
    double t_end = 3000.0;
    double tol = 1e-8;
    double dt_out = 0.0;  // 0 = derive from the midgap period
    double transient_fraction = 0.6;
    double quiescence_threshold = 1e-3;  // units of lambda
    double bulk_leak_ratio = 0.25;
    std::string initial_kind = "random";
    int reference_shuttle = -1;  // 1-based; -1 = loudest
    std::string window_fn = "none";

    // [stability]
    double phi_min_over_pi = 0.2;
    double phi_max_over_pi = 1.1;
    int n_phi = 73;
    double edge_tag_threshold = 0.7;
    double omega_min = 0.3;
    double omega_max = 3.0;
    int n_omega = 200;

    // [disorder]
    std::vector<double> r_values = {0.0, 0.1, 0.4};
    int realizations = 30;
    bool correlated = false;
    bool two_point = false;

    // [chern]
    int chern_n_k = 64;
    int chern_n_phi = 64;

    // [spectrum]
    int spectrum_n_phi = 200;

    // [calibrate]
    std::string target_feature = "window_lower_edge";
    double target_value = 0.9;
    double gamma_lo = 0.1;
    double gamma_hi = 2.0;

    // [run]
    std::string out_dir;
    int threads = 0;  // 0 = hardware concurrency
    std::uint64_t master_seed = 12345;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct ConfigEntry {
    std::string value;
    int line = 0;
};

// section name -> key -> (value text, line); "" is the top-level section
using RawConfig = std::map<std::string, std::map<std::string, ConfigEntry>>;

inline RawConfig parse_raw_config(const std::string& text, const std::string& origin) {
    RawConfig raw;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    auto fail = [&](int ln, const std::string& msg) {
        throw config_error(origin + ":" + std::to_string(ln) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(lineno, "unterminated section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail(lineno, "empty section name");
            raw[section];  // an empty section is legal
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(lineno, "expected 'key = value', got '" + line + "' (column 1)");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(lineno, "empty key before '='");
        if (value.empty()) fail(lineno, "empty value for key '" + key + "'");
        auto& sec = raw[section];
        const auto prev = sec.find(key);
        if (prev != sec.end())
            fail(lineno, "duplicate key '" + key + "'" +
                             (section.empty() ? std::string() : " in [" + section + "]") +
                             " (first defined at line " + std::to_string(prev->second.line) + ")");
        sec[key] = {value, lineno};
    }
    return raw;
}

// Typed readers; every message carries origin:line and the key name.

inline double read_double(const std::string& origin, const std::string& key, const ConfigEntry& e) {
    const char* b = e.value.data();
    const char* end = b + e.value.size();
    double v = 0.0;
    const auto res = std::from_chars(b, end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw config_error(origin + ":" + std::to_string(e.line) + ": key '" + key +
                           "': expected a real number, got '" + e.value + "'");
    if (!std::isfinite(v))
        throw config_error(origin + ":" + std::to_string(e.line) + ": key '" + key +
                           "': value must be finite");
    return v;
}

inline long long read_int(const std::string& origin, const std::string& key, const ConfigEntry& e) {
    const char* b = e.value.data();
    const char* end = b + e.value.size();
    long long v = 0;
    const auto res = std::from_chars(b, end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw config_error(origin + ":" + std::to_string(e.line) + ": key '" + key +
                           "': expected an integer, got '" + e.value + "'");
    return v;
}

inline std::uint64_t read_u64(const std::string& origin, const std::string& key,
                              const ConfigEntry& e) {
    const char* b = e.value.data();
    const char* end = b + e.value.size();
    std::uint64_t v = 0;
    const auto res = std::from_chars(b, end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw config_error(origin + ":" + std::to_string(e.line) + ": key '" + key +
                           "': expected an unsigned integer, got '" + e.value + "'");
    return v;
}

inline bool read_bool(const std::string& origin, const std::string& key, const ConfigEntry& e) {
    if (e.value == "true") return true;
    if (e.value == "false") return false;
    throw config_error(origin + ":" + std::to_string(e.line) + ": key '" + key +
                       "': expected 'true' or 'false', got '" + e.value + "'");
}

inline std::vector<double> read_double_array(const std::string& origin, const std::string& key,
                                             const ConfigEntry& e) {
    const std::string& s = e.value;
    if (s.size() < 2 || s.front() != '[' || s.back() != ']')
        throw config_error(origin + ":" + std::to_string(e.line) + ": key '" + key +
                           "': expected a bracketed list like [a, b, c]");
    std::vector<double> out;
    std::string inner = trim(s.substr(1, s.size() - 2));
    if (inner.empty()) return out;
    std::size_t pos = 0;
    while (pos <= inner.size()) {
        auto comma = inner.find(',', pos);
        const std::string item =
            trim(comma == std::string::npos ? inner.substr(pos) : inner.substr(pos, comma - pos));
        out.push_back(read_double(origin, key, ConfigEntry{item, e.line}));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

// fraction "p/q" with integer p, q > 0
inline std::pair<long long, long long> read_fraction(const std::string& origin,
                                                     const std::string& key,
                                                     const ConfigEntry& e) {
    const auto slash = e.value.find('/');
    if (slash == std::string::npos)
        throw config_error(origin + ":" + std::to_string(e.line) + ": key '" + key +
                           "': expected a fraction like 1/3, got '" + e.value + "'");
    const auto p = read_int(origin, key, ConfigEntry{trim(e.value.substr(0, slash)), e.line});
    const auto q = read_int(origin, key, ConfigEntry{trim(e.value.substr(slash + 1)), e.line});
    if (q <= 0)
        throw config_error(origin + ":" + std::to_string(e.line) + ": key '" + key +
                           "': denominator must be positive");
    return {p, q};
}

// Angle value: '<radians>', '<x> pi', or '<p>/<q> pi'. The rational form is
// carried exactly so downstream trigonometry can use the rational phase.
inline void read_phi(const std::string& origin, const std::string& key, const ConfigEntry& e,
                     ChainParams& cp) {
    std::string s = e.value;
    const bool has_pi = s.size() >= 2 && s.substr(s.size() - 2) == "pi" &&
                        (s.size() == 2 || s[s.size() - 3] == ' ' || s[s.size() - 3] == '\t' ||
                         std::isdigit(static_cast<unsigned char>(s[s.size() - 3])) == 0);
    if (has_pi) {
        std::string head = trim(s.substr(0, s.size() - 2));
        if (head.empty())
            throw config_error(origin + ":" + std::to_string(e.line) + ": key '" + key +
                               "': expected a multiplier before 'pi'");
        if (head.find('/') != std::string::npos) {
            const auto [p, q] = read_fraction(origin, key, ConfigEntry{head, e.line});
            cp.set_phi_pi(p, q);
        } else {
            cp.set_phi(read_double(origin, key, ConfigEntry{head, e.line}) *
                       std::numbers::pi_v<double>);
        }
    } else {
        cp.set_phi(read_double(origin, key, e));
    }
}

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
    return std::string(buf, res.ptr);
}

struct SectionReader {
    const std::string& origin;
    std::map<std::string, ConfigEntry> entries;  // consumed as keys are read
    std::string section;

    std::optional<ConfigEntry> take(const std::string& key) {
        const auto it = entries.find(key);
        if (it == entries.end()) return std::nullopt;
        ConfigEntry e = it->second;
        entries.erase(it);
        return e;
    }
    void finish() const {
        if (entries.empty()) return;
        const auto& [key, entry] = *entries.begin();
        const std::string where =
            section.empty() ? "at top level (before any section)" : "in section [" + section + "]";
        throw config_error(origin + ":" + std::to_string(entry.line) + ": unknown key '" + key +
                           "' " + where);
    }

    void get(const std::string& key, double& out) {
        if (const auto e = take(key)) out = read_double(origin, key, *e);
    }
    void get(const std::string& key, int& out) {
        if (const auto e = take(key)) out = static_cast<int>(read_int(origin, key, *e));
    }
    void get(const std::string& key, bool& out) {
        if (const auto e = take(key)) out = read_bool(origin, key, *e);
    }
    void get(const std::string& key, std::uint64_t& out) {
        if (const auto e = take(key)) out = read_u64(origin, key, *e);
    }
    void get(const std::string& key, std::string& out) {
        if (const auto e = take(key)) out = e->value;
    }
    void get(const std::string& key, std::vector<double>& out) {
        if (const auto e = take(key)) out = read_double_array(origin, key, *e);
    }
};

}  // namespace detail

// Parse a configuration from text. `origin` names the source in error
// messages (a file path or a pseudo-name for inline text).
inline RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    auto raw = detail::parse_raw_config(text, origin);
    RunConfig cfg;
    cfg.chain.set_phi_pi(2, 3);

    static const char* known_sections[] = {"",          "model",    "chain", "dynamics",
                                           "stability", "disorder", "chern", "spectrum",
                                           "calibrate", "run"};
    for (const auto& [name, entries] : raw) {
        if (std::find_if(std::begin(known_sections), std::end(known_sections),
                         [&](const char* k) { return name == k; }) == std::end(known_sections)) {
            const int line = entries.empty() ? 0 : entries.begin()->second.line;
            throw config_error(origin + ":" + std::to_string(line) + ": unknown section [" + name +
                               "]");
        }
    }

    auto section = [&](const std::string& name) {
        detail::SectionReader r{origin, {}, name};
        const auto it = raw.find(name);
        if (it != raw.end()) r.entries = it->second;
        return r;
    };
    auto fail_key = [&](const std::string& sec, const std::string& key, const std::string& msg) {
        throw config_error(origin + ": [" + sec + "] " + key + ": " + msg);
    };

    {
        auto top = section("");
        top.get("schema_version", cfg.schema_version);
        top.finish();
        if (cfg.schema_version != 1)
            fail_key("", "schema_version",
                     "unsupported value " + std::to_string(cfg.schema_version) +
                         " (this tool reads schema_version 1)");
    }
    {
        auto m = section("model");
        m.get("gamma", cfg.chain.shuttle.gamma);
        m.get("Gamma", cfg.chain.shuttle.Gamma);
        m.get("alpha", cfg.chain.shuttle.alpha);
        m.get("lambda", cfg.chain.shuttle.lambda);
        m.get("V", cfg.chain.shuttle.V);
        m.get("beta", cfg.chain.shuttle.beta);
        m.get("epsilon", cfg.chain.shuttle.epsilon);
        m.finish();
    }
    {
        auto c = section("chain");
        c.get("N", cfg.chain.N);
        c.get("Delta", cfg.chain.Delta);
        c.get("g", cfg.chain.g);
        if (const auto e = c.take("b")) {
            const auto [p, q] = detail::read_fraction(origin, "b", *e);
            if (p <= 0) fail_key("chain", "b", "modulation must be a positive fraction");
            cfg.chain.b_num = static_cast<int>(p);
            cfg.chain.b_den = static_cast<int>(q);
        }
        if (const auto e = c.take("phi")) detail::read_phi(origin, "phi", *e, cfg.chain);
        c.finish();
        if (cfg.chain.N < 3 || cfg.chain.N % 3 != 0)
            fail_key("chain", "N",
                     "site count must be a positive multiple of 3 (three-site unit cell), got " +
                         std::to_string(cfg.chain.N));
        if (!(cfg.chain.g > 0.0)) fail_key("chain", "g", "coupling must be positive");
    }
    {
        auto d = section("dynamics");
        d.get("t_end", cfg.t_end);
        d.get("tol", cfg.tol);
        d.get("dt_out", cfg.dt_out);
        d.get("transient_fraction", cfg.transient_fraction);
        d.get("quiescence_threshold", cfg.quiescence_threshold);
        d.get("bulk_leak_ratio", cfg.bulk_leak_ratio);
        d.get("initial_kind", cfg.initial_kind);
        d.get("reference_shuttle", cfg.reference_shuttle);
        d.get("window_fn", cfg.window_fn);
        d.finish();
        if (!(cfg.t_end > 0.0)) fail_key("dynamics", "t_end", "must be positive");
        if (!(cfg.tol >= 1e-12 && cfg.tol <= 1e-4))
            fail_key("dynamics", "tol", "must lie in [1e-12, 1e-4]");
        if (cfg.dt_out < 0.0) fail_key("dynamics", "dt_out", "must be >= 0 (0 = automatic)");
        if (!(cfg.transient_fraction >= 0.0 && cfg.transient_fraction <= 0.95))
            fail_key("dynamics", "transient_fraction", "must lie in [0, 0.95]");
        if (!(cfg.quiescence_threshold > 0.0))
            fail_key("dynamics", "quiescence_threshold", "must be positive");
        if (!(cfg.bulk_leak_ratio > 0.0 && cfg.bulk_leak_ratio <= 1.0))
            fail_key("dynamics", "bulk_leak_ratio", "must lie in (0, 1]");
        if (cfg.initial_kind != "symmetric" && cfg.initial_kind != "antisymmetric" &&
            cfg.initial_kind != "random" && cfg.initial_kind != "near_fixed_point")
            fail_key("dynamics", "initial_kind",
                     "must be one of symmetric, antisymmetric, random, near_fixed_point");
        if (cfg.reference_shuttle != -1 &&
            (cfg.reference_shuttle < 1 || cfg.reference_shuttle > cfg.chain.N))
            fail_key("dynamics", "reference_shuttle", "must be -1 (auto) or in [1, N]");
        if (cfg.window_fn != "none" && cfg.window_fn != "hann")
            fail_key("dynamics", "window_fn", "must be 'none' or 'hann'");
    }
    {
        auto s = section("stability");
        s.get("phi_min_over_pi", cfg.phi_min_over_pi);
        s.get("phi_max_over_pi", cfg.phi_max_over_pi);
        s.get("n_phi", cfg.n_phi);
        s.get("edge_tag_threshold", cfg.edge_tag_threshold);
        s.get("omega_min", cfg.omega_min);
        s.get("omega_max", cfg.omega_max);
        s.get("n_omega", cfg.n_omega);
        s.finish();
        if (!(cfg.phi_min_over_pi < cfg.phi_max_over_pi))
            fail_key("stability", "phi_min_over_pi", "phi window must satisfy min < max");
        if (cfg.n_phi < 2) fail_key("stability", "n_phi", "need at least 2 sweep points");
        if (!(cfg.edge_tag_threshold > 0.5 && cfg.edge_tag_threshold < 1.0))
            fail_key("stability", "edge_tag_threshold", "must lie in (0.5, 1)");
        if (!(cfg.omega_min > 0.0 && cfg.omega_min < cfg.omega_max))
            fail_key("stability", "omega_min", "need 0 < omega_min < omega_max");
        if (cfg.n_omega < 2) fail_key("stability", "n_omega", "need at least 2 sweep points");
    }
    {
        auto d = section("disorder");
        d.get("r_values", cfg.r_values);
        d.get("realizations", cfg.realizations);
        d.get("correlated", cfg.correlated);
        d.get("two_point", cfg.two_point);
        d.finish();
        if (cfg.r_values.empty()) fail_key("disorder", "r_values", "need at least one r value");
        for (double r : cfg.r_values)
            if (r < 0.0 || r >= cfg.chain.g)
                fail_key("disorder", "r_values",
                         "entries must lie in [0, g) to keep bonds positive, got " +
                             detail::format_double(r));
        if (cfg.realizations < 1) fail_key("disorder", "realizations", "must be at least 1");
    }
    {
        auto c = section("chern");
        c.get("n_k", cfg.chern_n_k);
        c.get("n_phi", cfg.chern_n_phi);
        c.finish();
        if (cfg.chern_n_k < 8 || cfg.chern_n_phi < 8)
            fail_key("chern", "n_k", "grid must be at least 8x8 for a trustworthy lattice field");
    }
    {
        auto s = section("spectrum");
        s.get("n_phi", cfg.spectrum_n_phi);
        s.finish();
        if (cfg.spectrum_n_phi < 2) fail_key("spectrum", "n_phi", "need at least 2 phi points");
    }
    {
        auto c = section("calibrate");
        c.get("target_feature", cfg.target_feature);
        c.get("target_value", cfg.target_value);
        c.get("gamma_lo", cfg.gamma_lo);
        c.get("gamma_hi", cfg.gamma_hi);
        c.finish();
        if (cfg.target_feature != "window_lower_edge" && cfg.target_feature != "window_upper_edge" &&
            cfg.target_feature != "argmax")
            fail_key("calibrate", "target_feature",
                     "must be one of window_lower_edge, window_upper_edge, argmax");
        if (!(cfg.target_value > 0.0)) fail_key("calibrate", "target_value", "must be positive");
        if (!(cfg.gamma_lo > 0.0 && cfg.gamma_lo < cfg.gamma_hi))
            fail_key("calibrate", "gamma_lo", "need 0 < gamma_lo < gamma_hi");
    }
    {
        auto r = section("run");
        r.get("out_dir", cfg.out_dir);
        r.get("threads", cfg.threads);
        r.get("master_seed", cfg.master_seed);
        r.finish();
        if (cfg.threads < 0) fail_key("run", "threads", "must be >= 0 (0 = hardware threads)");
    }

    cfg.chain.validate();
    return cfg;
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

// Canonical resolved form: every key present, stable order, shortest
// round-trip number formatting. parse_config_text(emit_config(c)) rebuilds
// an identical configuration.
inline std::string emit_config(const RunConfig& cfg) {
    using detail::format_double;
    std::ostringstream out;
    out << "# resolved configuration\n";
    out << "schema_version = " << cfg.schema_version << "\n\n";

    const auto& sp = cfg.chain.shuttle;
    out << "[model]\n";
    out << "gamma = " << format_double(sp.gamma) << "\n";
    out << "Gamma = " << format_double(sp.Gamma) << "\n";
    out << "alpha = " << format_double(sp.alpha) << "\n";
    out << "lambda = " << format_double(sp.lambda) << "\n";
    out << "V = " << format_double(sp.V) << "\n";
    out << "beta = " << format_double(sp.beta) << "\n";
    out << "epsilon = " << format_double(sp.epsilon) << "\n\n";

    out << "[chain]\n";
    out << "N = " << cfg.chain.N << "\n";
    out << "Delta = " << format_double(cfg.chain.Delta) << "\n";
    out << "g = " << format_double(cfg.chain.g) << "\n";
    out << "b = " << cfg.chain.b_num << "/" << cfg.chain.b_den << "\n";
    if (cfg.chain.phi_is_rational)
        out << "phi = " << cfg.chain.phi_p << "/" << cfg.chain.phi_q << " pi\n\n";
    else
        out << "phi = " << format_double(cfg.chain.phi) << "\n\n";

    out << "[dynamics]\n";
    out << "t_end = " << format_double(cfg.t_end) << "\n";
    out << "tol = " << format_double(cfg.tol) << "\n";
    out << "dt_out = " << format_double(cfg.dt_out) << "\n";
    out << "transient_fraction = " << format_double(cfg.transient_fraction) << "\n";
    out << "quiescence_threshold = " << format_double(cfg.quiescence_threshold) << "\n";
    out << "bulk_leak_ratio = " << format_double(cfg.bulk_leak_ratio) << "\n";
    out << "initial_kind = " << cfg.initial_kind << "\n";
    out << "reference_shuttle = " << cfg.reference_shuttle << "\n";
    out << "window_fn = " << cfg.window_fn << "\n\n";

    out << "[stability]\n";
    out << "phi_min_over_pi = " << format_double(cfg.phi_min_over_pi) << "\n";
    out << "phi_max_over_pi = " << format_double(cfg.phi_max_over_pi) << "\n";
    out << "n_phi = " << cfg.n_phi << "\n";
    out << "edge_tag_threshold = " << format_double(cfg.edge_tag_threshold) << "\n";
    out << "omega_min = " << format_double(cfg.omega_min) << "\n";
    out << "omega_max = " << format_double(cfg.omega_max) << "\n";
    out << "n_omega = " << cfg.n_omega << "\n\n";

    out << "[disorder]\n";
    out << "r_values = [";
    for (std::size_t i = 0; i < cfg.r_values.size(); ++i)
        out << (i ? ", " : "") << format_double(cfg.r_values[i]);
    out << "]\n";
    out << "realizations = " << cfg.realizations << "\n";
    out << "correlated = " << (cfg.correlated ? "true" : "false") << "\n";
    out << "two_point = " << (cfg.two_point ? "true" : "false") << "\n\n";

    out << "[chern]\n";
    out << "n_k = " << cfg.chern_n_k << "\n";
    out << "n_phi = " << cfg.chern_n_phi << "\n\n";

    out << "[spectrum]\n";
    out << "n_phi = " << cfg.spectrum_n_phi << "\n\n";

    out << "[calibrate]\n";
    out << "target_feature = " << cfg.target_feature << "\n";
    out << "target_value = " << format_double(cfg.target_value) << "\n";
    out << "gamma_lo = " << format_double(cfg.gamma_lo) << "\n";
    out << "gamma_hi = " << format_double(cfg.gamma_hi) << "\n\n";

    out << "[run]\n";
    if (!cfg.out_dir.empty()) out << "out_dir = " << cfg.out_dir << "\n";
    out << "threads = " << cfg.threads << "\n";
    out << "master_seed = " << cfg.master_seed << "\n";
    return out.str();
}

}  // namespace shuttlechain
