#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fracwave/evolution.hpp"

namespace fracwave {

// ---------------------------------------------------------------------------
// flat dotted-key configuration text
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    if (!out.empty() && out.back().empty()) out.pop_back();
    return out;
}

}  // namespace detail

/// Parsed key/value configuration with typed access and consumption tracking
/// (every key must be recognized; leftovers are reported by name).
class ConfigMap {
  public:
    static ConfigMap from_text(const std::string& text) {
        ConfigMap cfg;
        std::stringstream ss(text);
        std::string line;
        int lineno = 0;
        while (std::getline(ss, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw validation_error("config", "line " + std::to_string(lineno) +
                                                     ": expected key = value");
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string val = detail::trim(line.substr(eq + 1));
            if (key.empty())
                throw validation_error("config", "line " + std::to_string(lineno) + ": empty key");
            if (cfg.entries_.count(key))
                throw validation_error(key, "duplicate key");
            cfg.entries_[key] = val;
        }
        return cfg;
    }

    static ConfigMap from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw validation_error("config", "cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return from_text(ss.str());
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& def) const {
        auto it = entries_.find(key);
        used_.push_back(key);
        return it == entries_.end() ? def : it->second;
    }

    double get_double(const std::string& key, double def) const {
        auto it = entries_.find(key);
        used_.push_back(key);
        if (it == entries_.end()) return def;
        try {
            std::size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw validation_error(key, "expected a number, got '" + it->second + "'");
        }
    }

    int get_int(const std::string& key, int def) const {
        const double v = get_double(key, static_cast<double>(def));
        const int i = static_cast<int>(std::llround(v));
        if (static_cast<double>(i) != v) throw validation_error(key, "expected an integer");
        return i;
    }

    std::vector<double> get_list(const std::string& key,
                                 const std::vector<double>& def) const {
        auto it = entries_.find(key);
        used_.push_back(key);
        if (it == entries_.end()) return def;
        std::vector<double> out;
        for (const auto& tok : detail::split(it->second, ',')) {
            try {
                out.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw validation_error(key, "expected a comma-separated number list");
            }
        }
        return out;
    }

    /// "n:value" pairs, e.g. "1:0.5, 2:0.3".
    std::vector<std::pair<int, double>> get_mode_list(const std::string& key) const {
        auto it = entries_.find(key);
        used_.push_back(key);
        std::vector<std::pair<int, double>> out;
        if (it == entries_.end()) return out;
        for (const auto& tok : detail::split(it->second, ',')) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos)
                throw validation_error(key, "expected mode:value pairs");
            try {
                out.emplace_back(std::stoi(tok.substr(0, colon)),
                                 std::stod(tok.substr(colon + 1)));
            } catch (const std::exception&) {
                throw validation_error(key, "expected mode:value pairs");
            }
        }
        return out;
    }

    /// Reject any key that no getter asked about.
    void reject_unknown() const {
        for (const auto& [key, val] : entries_) {
            if (std::find(used_.begin(), used_.end(), key) == used_.end())
                throw validation_error(key, "unknown key");
        }
    }

    /// Canonical serialization (sorted keys) for provenance/hashing.
    std::string canonical() const {
        std::string out;
        for (const auto& [key, val] : entries_) out += key + " = " + val + "\n";
        return out;
    }

    std::uint64_t hash() const {  // FNV-1a
        std::uint64_t h = 14695981039346656037ull;
        for (char c : canonical()) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return h;
    }

  private:
    std::map<std::string, std::string> entries_;
    mutable std::vector<std::string> used_;
};

// ---------------------------------------------------------------------------
// scenario assembly
// ---------------------------------------------------------------------------

/// Complete experiment description: the evolution problem, the terminal
/// target, the lambda grid, and reporting metadata.
struct Scenario {
    EvolutionProblem prob;
    SpectralField target;               // terminal target xi_p
    std::vector<double> lambda_grid;    // strictly decreasing positives
    unsigned seed = 0;
    double cnd_delta = 0.0;
    double cnd_zeta = 0.0;              // defaults to the delay constant L
    double picard_tol = 1e-8;
    int picard_max_iter = 200;
    std::string provenance;             // canonical config echo
    std::uint64_t config_hash = 0;

    CndInputs cnd_inputs(double lambda) const {
        CndInputs in;
        in.M = 1.0;
        in.Mtilde = prob.B.operator_norm_Mtilde;
        in.T = prob.schedule.T;
        in.gamma = prob.frac.gamma;
        in.delta = cnd_delta;
        in.K2 = prob.schedule.T;  // phase-space constant for the e^{a theta} weight
        in.zeta = cnd_zeta;
        in.p = prob.schedule.p();
        in.lambda = lambda;
        return in;
    }
};

namespace detail {

inline SpectralField field_from_modes(const GridPtr& g,
                                      const std::vector<std::pair<int, double>>& modes,
                                      const std::string& key) {
    std::vector<double> c(static_cast<std::size_t>(g->mode_count), 0.0);
    for (const auto& [n, v] : modes) {
        if (n < 1 || n > g->mode_count)
            throw validation_error(key, "mode index outside 1..N");
        c[static_cast<std::size_t>(n - 1)] = v;
    }
    return SpectralField::from_coeffs(g, std::move(c));
}

}  // namespace detail

/// Build a fully validated Scenario from configuration text. Function-valued
/// entries come from a registry of built-ins:
///   delay.b.type:     zero | exp            b(s) = scale * exp(-rate * s)
///   delay.beta.type:  zero | constant | rational    beta(r) = scale * r/(1+r)
///   impulse.<j>.type: zero | trig   rho_j = amp (1 + growth t) sin(xi) cos(z)
///   control.type:     identity | exp_kernel K(z,x) = scale * exp(z + x)
inline Scenario make_scenario(const ConfigMap& cfg) {
    Scenario s;

    const double alpha = cfg.get_double("alpha", 1.5);
    s.prob.frac = FractionalParams::from_alpha(alpha);

    const int N = cfg.get_int("modes", 32);
    const int points = cfg.get_int("grid.points", 4 * N + 1);
    s.prob.grid = make_grid(N, points);
    const auto& g = s.prob.grid;

    s.prob.space = LebesgueSpace{cfg.get_double("space.p", 2.0), g};
    s.prob.space.validate();

    const std::string btype = cfg.get_string("control.type", "identity");
    if (btype == "identity") {
        s.prob.B = ControlOperatorSpec::identity();
    } else if (btype == "exp_kernel") {
        const double scale = cfg.get_double("control.scale", 1e-3);
        s.prob.B = ControlOperatorSpec::integral_kernel(
            [scale](double z, double x) { return scale * std::exp(z + x); }, g);
    } else {
        throw validation_error("control.type", "unknown control operator '" + btype + "'");
    }

    s.prob.schedule.T = cfg.get_double("T", 1.0);
    s.prob.schedule.taus = cfg.get_list("schedule.taus", {});
    s.prob.schedule.esses = cfg.get_list("schedule.esses", {});
    if (s.prob.schedule.taus.size() != s.prob.schedule.esses.size())
        throw validation_error("schedule.breakpoints",
                               "taus and esses must have equal length");
    for (int j = 1; j <= s.prob.schedule.p(); ++j) {
        const std::string base = "impulse." + std::to_string(j) + ".";
        const std::string type = cfg.get_string(base + "type", "zero");
        ImpulseKernel k;
        if (type == "zero") {
            k.rho = [](double, double, double) { return 0.0; };
            k.drho_dt = [](double, double, double) { return 0.0; };
        } else if (type == "trig") {
            const double amp = cfg.get_double(base + "amp", 0.02);
            const double growth = cfg.get_double(base + "growth", 0.5);
            k.rho = [amp, growth](double t, double xi, double z) {
                return amp * (1.0 + growth * t) * std::sin(xi) * std::cos(z);
            };
            k.drho_dt = [amp, growth](double, double xi, double z) {
                return amp * growth * std::sin(xi) * std::cos(z);
            };
        } else {
            throw validation_error(base + "type", "unknown impulse kernel '" + type + "'");
        }
        s.prob.schedule.kernels.push_back(std::move(k));
    }
    s.prob.schedule.validate();

    const double a = cfg.get_double("delay.weight_rate", -1.0);
    const std::string btyp = cfg.get_string("delay.b.type", "zero");
    std::function<double(double)> bfn;
    if (btyp == "zero") {
        bfn = [](double) { return 0.0; };
    } else if (btyp == "exp") {
        const double scale = cfg.get_double("delay.b.scale", 1e-6);
        const double rate = cfg.get_double("delay.b.rate", 1.0);
        bfn = [scale, rate](double u) { return scale * std::exp(-rate * u); };
    } else {
        throw validation_error("delay.b.type", "unknown memory kernel '" + btyp + "'");
    }
    const std::string betatyp = cfg.get_string("delay.beta.type", "zero");
    std::function<double(double)> betafn;
    if (betatyp == "zero") {
        betafn = [](double) { return 0.0; };
    } else if (betatyp == "constant") {
        const double v = cfg.get_double("delay.beta.value", 0.0);
        if (v < 0.0) throw validation_error("delay.beta.value", "must be >= 0");
        betafn = [v](double) { return v; };
    } else if (betatyp == "rational") {
        const double scale = cfg.get_double("delay.beta.scale", 0.3);
        betafn = [scale](double r) { return scale * r / (1.0 + r); };
    } else {
        throw validation_error("delay.beta.type", "unknown delay magnitude '" + betatyp + "'");
    }
    s.prob.delay = DelayLaw::make(std::move(bfn), std::move(betafn), a);

    // initial history psi(theta) = exp(growth * theta) * sum c_n w_n
    const auto psi_modes = cfg.get_mode_list("history.modes");
    const double growth = cfg.get_double("history.growth", 0.0);
    const double tail_tol = cfg.get_double("history.tail_tol", 1e-12);
    const SpectralField psi0 = detail::field_from_modes(g, psi_modes, "history.modes");
    const double scale0 = std::max(lp_norm(psi0, s.prob.space), 1.0);
    const double theta_min = theta_min_for(a, tail_tol, scale0);
    {
        const int nodes = 256;
        HistorySegment seg;
        seg.a = a;
        seg.tail_tol = tail_tol;
        seg.theta_grid.resize(nodes + 1);
        seg.values.reserve(nodes + 1);
        for (int i = 0; i <= nodes; ++i) {
            const double th = theta_min * (1.0 - static_cast<double>(i) / nodes);
            seg.theta_grid[static_cast<std::size_t>(i)] = (i == nodes) ? 0.0 : th;
            std::vector<double> c = psi0.coeffs;
            for (auto& v : c) v *= std::exp(growth * seg.theta_grid[static_cast<std::size_t>(i)]);
            seg.values.push_back(SpectralField::from_coeffs(g, std::move(c)));
        }
        seg.validate();
        s.prob.psi = std::move(seg);
    }

    s.prob.eta = detail::field_from_modes(g, cfg.get_mode_list("eta.modes"), "eta.modes");
    s.target = detail::field_from_modes(g, cfg.get_mode_list("target.modes"), "target.modes");

    s.lambda_grid = cfg.get_list("lambda.grid", {1e-1, 1e-2, 1e-3, 1e-4, 1e-5});
    for (std::size_t i = 0; i < s.lambda_grid.size(); ++i) {
        if (!(s.lambda_grid[i] > 0.0))
            throw validation_error("lambda.grid", "entries must be positive");
        if (i > 0 && !(s.lambda_grid[i] < s.lambda_grid[i - 1]))
            throw validation_error("lambda.grid", "must be strictly decreasing");
    }

    s.prob.steps_per_unit = cfg.get_int("numerics.steps_per_unit", 512);
    s.prob.impulse_points = cfg.get_int("numerics.impulse_points", 64);
    s.picard_tol = cfg.get_double("numerics.picard_tol", 1e-8);
    s.picard_max_iter = cfg.get_int("numerics.picard_max_iter", 200);
    s.seed = static_cast<unsigned>(cfg.get_int("seed", 0));
    s.cnd_delta = cfg.get_double("cnd.delta", 0.0);
    s.cnd_zeta = cfg.get_double("cnd.zeta", s.prob.delay.L);

    cfg.reject_unknown();
    s.prob.validate();
    s.provenance = cfg.canonical();
    s.config_hash = cfg.hash();
    return s;
}

inline Scenario parse_scenario(const std::string& path) {
    return make_scenario(ConfigMap::from_file(path));
}

}  // namespace fracwave
