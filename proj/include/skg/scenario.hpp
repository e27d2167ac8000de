#pragma once

// Scenario configuration: a flat, human-editable key-value document with
// sections, strict unknown-key rejection, canonical serialization (the config
// hash is taken over it), and the builtin scenario catalog.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "skg/spacetime.hpp"
#include "skg/stochastic.hpp"
#include "skg/wavefunction.hpp"

namespace skg {

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& w) : std::runtime_error(w) {}
};
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& w) : std::runtime_error(w) {}
};

struct ScenarioConfig {
    // [scenario]
    std::string id = "custom";
    std::string description;

    // [constants]
    double hbar = 1.0, m0 = 1.0, c = 1.0, e = 0.3, mu0 = 1.0;

    // [model]
    std::string model_type = "plane_wave";  // plane_wave | mode_sum | volkov
    std::array<double, 3> momentum{0.2, 0.0, 0.5};  // spatial; energy on shell
    std::vector<double> mode_weights{1.0, 0.5};
    std::vector<std::array<double, 3>> mode_momenta{{0.0, 0.0, 0.5}, {0.0, 0.0, -0.5}};
    double offshell_delta = 0.0;  // negative controls only
    std::size_t offshell_mode = 1;

    // [potential]
    std::string potential_type = "zero";  // zero | constant_field | plane_wave
    double omega = 0.05;                  // k = omega (1,0,0,1)
    std::array<double, 4> polarization{0.0, 0.8, 0.0, 0.0};
    double amplitude = 1.2;
    double phase = 0.4;
    std::array<double, 6> f_upper{};  // f01 f02 f03 f12 f13 f23

    // [run]
    std::size_t n_paths = 20000;
    double tau_start = 0.0;
    double dtau = 0.01;
    std::size_t n_steps = 200;
    std::size_t record_every = 20;
    std::uint64_t master_seed = 20240813;
    double noise_scale = 1.0;
    std::size_t workers = 0;
    double max_abort_fraction = 1e-3;

    // [init]
    std::string init_type = "density";  // point | uniform | density
    std::array<double, 4> init_lo{0, 0, 0, 0};
    std::array<double, 4> init_hi{0, 0, 0, 0};
    std::array<double, 4> init_point{0, 0, 0, 0};

    // [grid]  (active coordinates t and z)
    double t_min = 0.0, t_max = 8.0;
    std::size_t t_bins = 8;
    double z_min = 0.0, z_max = 8.0;
    std::size_t z_bins = 48;

    // [checks]
    std::vector<std::string> checks;
    std::set<std::string> expect_fail;
    double drift_scale = 1.0;   // corruption knobs for negative controls
    double lambda_scale = 1.0;
    bool continuity_wrong_branch = false;
    std::size_t kg_points = 20;
    std::size_t partial_max_paths = 200000;
    double ehrenfest_rel_tol = 0.05;
    double action_eps_max = 0.3;
    double action_rel_threshold = 1e-3;
    double current_tolerance = 0.05;
    double fd_step = 1e-3;
    double node_epsilon = 1e-10;

    // [output]
    std::string output_directory;
    bool dump_paths = false;
    bool dump_grids = false;

    PhysicalConstants constants() const { return PhysicalConstants(hbar, m0, e, c, mu0); }

    double on_shell_energy(const std::array<double, 3>& sp) const {
        return std::sqrt(m0 * m0 * c * c + sp[0] * sp[0] + sp[1] * sp[1] + sp[2] * sp[2]);
    }

    WaveFunctionModel build_model() const {
        const auto consts = constants();
        if (model_type == "plane_wave") {
            return WaveFunctionModel::plane_wave(
                {on_shell_energy(momentum), momentum[0], momentum[1], momentum[2]}, consts);
        }
        if (model_type == "volkov") {
            return WaveFunctionModel::volkov(
                {on_shell_energy(momentum), momentum[0], momentum[1], momentum[2]}, consts);
        }
        if (model_type == "mode_sum") {
            std::vector<ModeSumState::Mode> modes;
            for (std::size_t i = 0; i < mode_momenta.size(); ++i) {
                const auto& sp = mode_momenta[i];
                FourVector p{on_shell_energy(sp), sp[0], sp[1], sp[2]};
                if (offshell_delta != 0.0 && i == offshell_mode) {
                    // keep the energy, shrink the spatial momentum: p.p moves
                    // off the shell by +offshell_delta
                    const double sp2 = sp[0] * sp[0] + sp[1] * sp[1] + sp[2] * sp[2];
                    const double scale = std::sqrt((sp2 - offshell_delta) / sp2);
                    p = FourVector{p[0], sp[0] * scale, sp[1] * scale, sp[2] * scale};
                }
                modes.push_back({complexd(mode_weights[i], 0.0), p});
            }
            if (offshell_delta != 0.0) return WaveFunctionModel::mode_sum_unchecked(modes);
            return WaveFunctionModel::mode_sum(modes, consts);
        }
        throw ValidationError("model.type: unknown variant '" + model_type + "'");
    }

    PotentialModel build_potential() const {
        if (potential_type == "zero") return PotentialModel::zero();
        if (potential_type == "constant_field")
            return PotentialModel::constant_field(FieldTensor::from_upper_triangle(
                f_upper[0], f_upper[1], f_upper[2], f_upper[3], f_upper[4], f_upper[5]));
        if (potential_type == "plane_wave") {
            const FourVector k{omega, 0, 0, omega};
            const FourVector a{polarization[0], polarization[1], polarization[2],
                               polarization[3]};
            return PotentialModel::plane_wave(k, a, WaveProfile{amplitude, phase});
        }
        throw ValidationError("potential.type: unknown variant '" + potential_type + "'");
    }

    TauGrid tau_grid() const { return TauGrid{tau_start, dtau, n_steps, record_every}; }

    InitialDistribution initial_distribution() const {
        const FourVector lo{init_lo[0], init_lo[1], init_lo[2], init_lo[3]};
        const FourVector hi{init_hi[0], init_hi[1], init_hi[2], init_hi[3]};
        if (init_type == "point")
            return InitialDistribution::point_mass(
                {init_point[0], init_point[1], init_point[2], init_point[3]});
        if (init_type == "uniform") return InitialDistribution::uniform_box(lo, hi);
        if (init_type == "density") return InitialDistribution::density_weighted(lo, hi);
        throw ValidationError("init.type: unknown variant '" + init_type + "'");
    }
};

// ---------------------------------------------------------------------------
// Check registry (fixed execution order)

inline const std::vector<std::string>& check_registry() {
    static const std::vector<std::string> names = {
        "wiener_law",
        "lorentz_invariant",
        "ehrenfest",
        "energy_constancy",
        "partial_integration",
        "kg_points",
        "eom_points",
        "eom_identity",
        "curl_identity",
        "gauge_invariance",
        "fokker_planck_analytic",
        "continuity_analytic",
        "osmotic_analytic",
        "fokker_planck_histogram",
        "continuity_histogram",
        "osmotic_histogram",
        "current_equivalence",
        "charge_conservation",
        "action_stationarity",
    };
    return names;
}

// ---------------------------------------------------------------------------
// Parsing

namespace cfg_detail {

struct KeyInfo {
    std::string section, key;
};

inline const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"scenario", {"id", "description"}},
        {"constants", {"hbar", "m0", "c", "e", "mu0"}},
        {"model",
         {"type", "momentum", "mode_weights", "mode_momenta", "offshell_delta",
          "offshell_mode"}},
        {"potential", {"type", "omega", "polarization", "amplitude", "phase", "f_upper"}},
        {"run",
         {"n_paths", "tau_start", "dtau", "n_steps", "record_every", "master_seed",
          "noise_scale", "workers", "max_abort_fraction"}},
        {"init", {"type", "lo", "hi", "point"}},
        {"grid", {"t_min", "t_max", "t_bins", "z_min", "z_max", "z_bins"}},
        {"checks",
         {"run", "expect_fail", "drift_scale", "lambda_scale", "continuity_wrong_branch",
          "kg_points", "partial_max_paths", "ehrenfest_rel_tol", "action_eps_max",
          "action_rel_threshold", "current_tolerance", "fd_step", "node_epsilon"}},
        {"output", {"directory", "dump_paths", "dump_grids"}},
    };
    return s;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<double> parse_numbers(const std::string& v, const std::string& field) {
    std::vector<double> out;
    std::istringstream is(v);
    std::string tok;
    while (is >> tok) {
        if (tok == ";") continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (...) {
            throw ValidationError(field + ": not a number: '" + tok + "'");
        }
    }
    return out;
}

inline double parse_one(const std::string& v, const std::string& field) {
    const auto nums = parse_numbers(v, field);
    if (nums.size() != 1) throw ValidationError(field + ": expected one number");
    return nums[0];
}

inline bool parse_bool(const std::string& v, const std::string& field) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ValidationError(field + ": expected true/false");
}

template <std::size_t N>
inline std::array<double, N> parse_fixed(const std::string& v, const std::string& field) {
    const auto nums = parse_numbers(v, field);
    if (nums.size() != N)
        throw ValidationError(field + ": expected " + std::to_string(N) + " numbers");
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = nums[i];
    return out;
}

inline std::vector<std::string> parse_words(const std::string& v) {
    std::vector<std::string> out;
    std::istringstream is(v);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

}  // namespace cfg_detail

ScenarioConfig builtin_scenario(const std::string& id);  // forward

/// Parses the key-value document. Unknown sections or keys are rejected; a
/// `[scenario] id` naming a builtin starts from that builtin's defaults.
inline ScenarioConfig load_config_text(const std::string& text) {
    using namespace cfg_detail;
    // first pass: find the scenario id to seed defaults
    std::map<std::string, std::map<std::string, std::string>> kv;
    {
        std::istringstream is(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const std::string t = trim(line.substr(0, line.find('#')));
            if (t.empty()) continue;
            if (t.front() == '[') {
                if (t.back() != ']')
                    throw ParseError("line " + std::to_string(lineno) + ": malformed section");
                section = trim(t.substr(1, t.size() - 2));
                if (!schema().count(section))
                    throw ParseError("line " + std::to_string(lineno) + ": unknown section [" +
                                     section + "]");
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ParseError("line " + std::to_string(lineno) + ": expected key = value");
            if (section.empty())
                throw ParseError("line " + std::to_string(lineno) + ": key outside a section");
            const std::string key = trim(t.substr(0, eq));
            const std::string val = trim(t.substr(eq + 1));
            if (!schema().at(section).count(key))
                throw ParseError("line " + std::to_string(lineno) + ": unknown key '" + key +
                                 "' in [" + section + "]");
            if (kv[section].count(key))
                throw ParseError("line " + std::to_string(lineno) + ": duplicate key '" + key +
                                 "'");
            kv[section][key] = val;
        }
    }

    ScenarioConfig c;
    if (kv.count("scenario") && kv["scenario"].count("id")) {
        const std::string id = kv["scenario"]["id"];
        try {
            c = builtin_scenario(id);
        } catch (const ValidationError&) {
            c = ScenarioConfig{};
            c.id = id;
        }
    }

    auto get = [&](const char* sec, const char* key) -> std::optional<std::string> {
        auto si = kv.find(sec);
        if (si == kv.end()) return std::nullopt;
        auto ki = si->second.find(key);
        if (ki == si->second.end()) return std::nullopt;
        return ki->second;
    };

    if (auto v = get("scenario", "description")) c.description = *v;
    if (auto v = get("constants", "hbar")) c.hbar = parse_one(*v, "constants.hbar");
    if (auto v = get("constants", "m0")) c.m0 = parse_one(*v, "constants.m0");
    if (auto v = get("constants", "c")) c.c = parse_one(*v, "constants.c");
    if (auto v = get("constants", "e")) c.e = parse_one(*v, "constants.e");
    if (auto v = get("constants", "mu0")) c.mu0 = parse_one(*v, "constants.mu0");

    if (auto v = get("model", "type")) c.model_type = *v;
    if (auto v = get("model", "momentum")) {
        const auto m = parse_fixed<3>(*v, "model.momentum");
        c.momentum = {m[0], m[1], m[2]};
    }
    if (auto v = get("model", "mode_weights"))
        c.mode_weights = parse_numbers(*v, "model.mode_weights");
    if (auto v = get("model", "mode_momenta")) {
        const auto nums = parse_numbers(*v, "model.mode_momenta");
        if (nums.size() % 3 != 0)
            throw ValidationError("model.mode_momenta: expected px py pz triples");
        c.mode_momenta.clear();
        for (std::size_t i = 0; i < nums.size(); i += 3)
            c.mode_momenta.push_back({nums[i], nums[i + 1], nums[i + 2]});
    }
    if (auto v = get("model", "offshell_delta"))
        c.offshell_delta = parse_one(*v, "model.offshell_delta");
    if (auto v = get("model", "offshell_mode"))
        c.offshell_mode = static_cast<std::size_t>(parse_one(*v, "model.offshell_mode"));

    if (auto v = get("potential", "type")) c.potential_type = *v;
    if (auto v = get("potential", "omega")) c.omega = parse_one(*v, "potential.omega");
    if (auto v = get("potential", "polarization"))
        c.polarization = parse_fixed<4>(*v, "potential.polarization");
    if (auto v = get("potential", "amplitude"))
        c.amplitude = parse_one(*v, "potential.amplitude");
    if (auto v = get("potential", "phase")) c.phase = parse_one(*v, "potential.phase");
    if (auto v = get("potential", "f_upper")) c.f_upper = parse_fixed<6>(*v, "potential.f_upper");

    if (auto v = get("run", "n_paths"))
        c.n_paths = static_cast<std::size_t>(parse_one(*v, "run.n_paths"));
    if (auto v = get("run", "tau_start")) c.tau_start = parse_one(*v, "run.tau_start");
    if (auto v = get("run", "dtau")) c.dtau = parse_one(*v, "run.dtau");
    if (auto v = get("run", "n_steps"))
        c.n_steps = static_cast<std::size_t>(parse_one(*v, "run.n_steps"));
    if (auto v = get("run", "record_every"))
        c.record_every = static_cast<std::size_t>(parse_one(*v, "run.record_every"));
    if (auto v = get("run", "master_seed"))
        c.master_seed = static_cast<std::uint64_t>(parse_one(*v, "run.master_seed"));
    if (auto v = get("run", "noise_scale")) c.noise_scale = parse_one(*v, "run.noise_scale");
    if (auto v = get("run", "workers"))
        c.workers = static_cast<std::size_t>(parse_one(*v, "run.workers"));
    if (auto v = get("run", "max_abort_fraction"))
        c.max_abort_fraction = parse_one(*v, "run.max_abort_fraction");

    if (auto v = get("init", "type")) c.init_type = *v;
    if (auto v = get("init", "lo")) c.init_lo = parse_fixed<4>(*v, "init.lo");
    if (auto v = get("init", "hi")) c.init_hi = parse_fixed<4>(*v, "init.hi");
    if (auto v = get("init", "point")) c.init_point = parse_fixed<4>(*v, "init.point");

    if (auto v = get("grid", "t_min")) c.t_min = parse_one(*v, "grid.t_min");
    if (auto v = get("grid", "t_max")) c.t_max = parse_one(*v, "grid.t_max");
    if (auto v = get("grid", "t_bins"))
        c.t_bins = static_cast<std::size_t>(parse_one(*v, "grid.t_bins"));
    if (auto v = get("grid", "z_min")) c.z_min = parse_one(*v, "grid.z_min");
    if (auto v = get("grid", "z_max")) c.z_max = parse_one(*v, "grid.z_max");
    if (auto v = get("grid", "z_bins"))
        c.z_bins = static_cast<std::size_t>(parse_one(*v, "grid.z_bins"));

    if (auto v = get("checks", "run")) c.checks = parse_words(*v);
    if (auto v = get("checks", "expect_fail")) {
        c.expect_fail.clear();
        for (const auto& w : parse_words(*v)) c.expect_fail.insert(w);
    }
    if (auto v = get("checks", "drift_scale"))
        c.drift_scale = parse_one(*v, "checks.drift_scale");
    if (auto v = get("checks", "lambda_scale"))
        c.lambda_scale = parse_one(*v, "checks.lambda_scale");
    if (auto v = get("checks", "continuity_wrong_branch"))
        c.continuity_wrong_branch = parse_bool(*v, "checks.continuity_wrong_branch");
    if (auto v = get("checks", "kg_points"))
        c.kg_points = static_cast<std::size_t>(parse_one(*v, "checks.kg_points"));
    if (auto v = get("checks", "partial_max_paths"))
        c.partial_max_paths = static_cast<std::size_t>(parse_one(*v, "checks.partial_max_paths"));
    if (auto v = get("checks", "ehrenfest_rel_tol"))
        c.ehrenfest_rel_tol = parse_one(*v, "checks.ehrenfest_rel_tol");
    if (auto v = get("checks", "action_eps_max"))
        c.action_eps_max = parse_one(*v, "checks.action_eps_max");
    if (auto v = get("checks", "action_rel_threshold"))
        c.action_rel_threshold = parse_one(*v, "checks.action_rel_threshold");
    if (auto v = get("checks", "current_tolerance"))
        c.current_tolerance = parse_one(*v, "checks.current_tolerance");
    if (auto v = get("checks", "fd_step")) c.fd_step = parse_one(*v, "checks.fd_step");
    if (auto v = get("checks", "node_epsilon"))
        c.node_epsilon = parse_one(*v, "checks.node_epsilon");

    if (auto v = get("output", "directory")) c.output_directory = *v;
    if (auto v = get("output", "dump_paths")) c.dump_paths = parse_bool(*v, "output.dump_paths");
    if (auto v = get("output", "dump_grids")) c.dump_grids = parse_bool(*v, "output.dump_grids");

    return c;
}

/// Full validation; throws ValidationError naming the offending field.
inline void validate_config(const ScenarioConfig& c) {
    if (!(c.hbar > 0) || !(c.m0 > 0) || !(c.c > 0) || !(c.mu0 > 0))
        throw ValidationError("constants: hbar, m0, c, mu0 must be positive");
    if (!(c.dtau > 0)) throw ValidationError("run.dtau: must be positive");
    if (c.n_paths < 1) throw ValidationError("run.n_paths: must be >= 1");
    if (c.record_every == 0 || c.n_steps % c.record_every != 0)
        throw ValidationError("run.record_every: must divide n_steps");
    for (const auto& name : c.checks) {
        const auto& reg = check_registry();
        if (std::find(reg.begin(), reg.end(), name) == reg.end())
            throw ValidationError("checks.run: unknown check '" + name + "'");
    }
    for (const auto& name : c.expect_fail) {
        if (std::find(c.checks.begin(), c.checks.end(), name) == c.checks.end())
            throw ValidationError("checks.expect_fail: '" + name + "' is not scheduled");
    }
    if (c.model_type == "mode_sum") {
        if (c.mode_weights.size() != c.mode_momenta.size() || c.mode_weights.empty())
            throw ValidationError("model.mode_weights: must match mode_momenta");
        double wsum = 0.0;
        for (double w : c.mode_weights) wsum += std::abs(w);
        if (wsum == 0.0) throw ValidationError("model.mode_weights: all zero");
        const double e0 = c.on_shell_energy(c.mode_momenta[0]);
        for (const auto& sp : c.mode_momenta)
            if (std::abs(c.on_shell_energy(sp) - e0) > 1e-12)
                throw ValidationError(
                    "model.mode_momenta: modes must share one energy (stationary sampler)");
        if (c.offshell_delta != 0.0 && c.offshell_mode >= c.mode_momenta.size())
            throw ValidationError("model.offshell_mode: out of range");
    }
    if (!(c.t_max > c.t_min) || !(c.z_max > c.z_min) || c.t_bins < 3 || c.z_bins < 3)
        throw ValidationError("grid: window must be nonempty with >= 3 bins per axis");
    // building the model validates the mass shell; surface it as a config error
    try {
        (void)c.build_model();
        (void)c.build_potential();
    } catch (const std::invalid_argument& err) {
        throw ValidationError(std::string("model/potential: ") + err.what());
    }
}

/// Canonical serialization; load(serialize(c)) == c and the config hash is
/// computed over this text.
inline std::string serialize_config(const ScenarioConfig& c) {
    std::ostringstream os;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    os << "[scenario]\n";
    os << "id = " << c.id << "\n";
    if (!c.description.empty()) os << "description = " << c.description << "\n";
    os << "\n[constants]\n";
    os << "hbar = " << num(c.hbar) << "\nm0 = " << num(c.m0) << "\nc = " << num(c.c)
       << "\ne = " << num(c.e) << "\nmu0 = " << num(c.mu0) << "\n";
    os << "\n[model]\n";
    os << "type = " << c.model_type << "\n";
    os << "momentum = " << num(c.momentum[0]) << " " << num(c.momentum[1]) << " "
       << num(c.momentum[2]) << "\n";
    os << "mode_weights =";
    for (double w : c.mode_weights) os << " " << num(w);
    os << "\nmode_momenta =";
    for (const auto& m : c.mode_momenta)
        os << " " << num(m[0]) << " " << num(m[1]) << " " << num(m[2]);
    os << "\noffshell_delta = " << num(c.offshell_delta) << "\n";
    os << "offshell_mode = " << c.offshell_mode << "\n";
    os << "\n[potential]\n";
    os << "type = " << c.potential_type << "\n";
    os << "omega = " << num(c.omega) << "\n";
    os << "polarization = " << num(c.polarization[0]) << " " << num(c.polarization[1]) << " "
       << num(c.polarization[2]) << " " << num(c.polarization[3]) << "\n";
    os << "amplitude = " << num(c.amplitude) << "\nphase = " << num(c.phase) << "\n";
    os << "f_upper =";
    for (double f : c.f_upper) os << " " << num(f);
    os << "\n";
    os << "\n[run]\n";
    os << "n_paths = " << c.n_paths << "\ntau_start = " << num(c.tau_start)
       << "\ndtau = " << num(c.dtau) << "\nn_steps = " << c.n_steps
       << "\nrecord_every = " << c.record_every << "\nmaster_seed = " << c.master_seed
       << "\nnoise_scale = " << num(c.noise_scale) << "\nworkers = " << c.workers
       << "\nmax_abort_fraction = " << num(c.max_abort_fraction) << "\n";
    os << "\n[init]\n";
    os << "type = " << c.init_type << "\n";
    auto vec4 = [&](const std::array<double, 4>& v) {
        return num(v[0]) + " " + num(v[1]) + " " + num(v[2]) + " " + num(v[3]);
    };
    os << "lo = " << vec4(c.init_lo) << "\nhi = " << vec4(c.init_hi)
       << "\npoint = " << vec4(c.init_point) << "\n";
    os << "\n[grid]\n";
    os << "t_min = " << num(c.t_min) << "\nt_max = " << num(c.t_max)
       << "\nt_bins = " << c.t_bins << "\nz_min = " << num(c.z_min)
       << "\nz_max = " << num(c.z_max) << "\nz_bins = " << c.z_bins << "\n";
    os << "\n[checks]\n";
    os << "run =";
    for (const auto& s : c.checks) os << " " << s;
    os << "\nexpect_fail =";
    for (const auto& s : c.expect_fail) os << " " << s;
    os << "\ndrift_scale = " << num(c.drift_scale)
       << "\nlambda_scale = " << num(c.lambda_scale) << "\ncontinuity_wrong_branch = "
       << (c.continuity_wrong_branch ? "true" : "false") << "\nkg_points = " << c.kg_points
       << "\npartial_max_paths = " << c.partial_max_paths
       << "\nehrenfest_rel_tol = " << num(c.ehrenfest_rel_tol)
       << "\naction_eps_max = " << num(c.action_eps_max)
       << "\naction_rel_threshold = " << num(c.action_rel_threshold)
       << "\ncurrent_tolerance = " << num(c.current_tolerance)
       << "\nfd_step = " << num(c.fd_step) << "\nnode_epsilon = " << num(c.node_epsilon) << "\n";
    os << "\n[output]\n";
    os << "directory = " << c.output_directory << "\n";
    os << "dump_paths = " << (c.dump_paths ? "true" : "false") << "\n";
    os << "dump_grids = " << (c.dump_grids ? "true" : "false") << "\n";
    return os.str();
}

/// Hash over the canonical serialization with the result-neutral fields
/// (output destination, dump flags, worker count) normalized away.
inline std::uint64_t config_hash(const ScenarioConfig& c) {
    ScenarioConfig n = c;
    n.output_directory.clear();
    n.dump_paths = false;
    n.dump_grids = false;
    n.workers = 0;
    const std::string s = serialize_config(n);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Builtin scenarios

inline ScenarioConfig builtin_scenario(const std::string& id) {
    const double kz = 0.5;
    const double period = M_PI / kz;  // of phi*phi in z, natural units

    ScenarioConfig c;
    c.id = id;
    if (id == "plane_wave") {
        c.description = "free plane wave: exact pointwise identities and uniform-law sampling";
        c.model_type = "plane_wave";
        c.momentum = {0.2, 0.0, 0.5};
        c.potential_type = "zero";
        c.n_paths = 300000;
        c.dtau = 0.01;
        c.n_steps = 200;
        c.record_every = 20;
        c.master_seed = 71001;
        // init box exceeds the analysis window by the drift plus a 2.5 sigma
        // diffusion margin, so the pooled in-window law stays uniform
        c.init_type = "uniform";
        c.init_lo = {-6.0, 0.0, 0.0, -4.8};
        c.init_hi = {9.6, 0.0, 0.0, 10.8};
        c.t_min = 0.0;
        c.t_max = 8.0;
        c.t_bins = 6;
        c.z_min = 0.0;
        c.z_max = 8.0;
        c.z_bins = 16;
        c.current_tolerance = 0.02;
        c.checks = {"wiener_law", "lorentz_invariant", "ehrenfest", "energy_constancy",
                    "partial_integration", "kg_points", "eom_points", "curl_identity",
                    "gauge_invariance", "fokker_planck_analytic", "continuity_analytic",
                    "osmotic_analytic", "current_equivalence", "charge_conservation",
                    "action_stationarity"};
        return c;
    }
    if (id == "mode_sum_stationary") {
        c.description =
            "two-mode stationary interference: density-level identities, Monte Carlo track";
        c.model_type = "mode_sum";
        c.mode_weights = {1.0, 0.5};
        c.mode_momenta = {{0.0, 0.0, kz}, {0.0, 0.0, -kz}};
        c.potential_type = "zero";
        c.n_paths = 1000000;
        c.dtau = 0.0025;
        c.n_steps = 400;
        c.record_every = 100;
        c.master_seed = 71002;
        c.init_type = "density";
        c.init_lo = {-4.0, 0.0, 0.0, -2.0 * period};
        c.init_hi = {9.6, 0.0, 0.0, 6.0 * period};
        c.t_min = 0.0;
        c.t_max = 8.0;
        c.t_bins = 6;
        c.z_min = 0.0;
        c.z_max = 4.0 * period;
        c.z_bins = 24;
        c.checks = {"lorentz_invariant", "ehrenfest", "energy_constancy",
                    "partial_integration", "kg_points",
                    "eom_points", "curl_identity", "gauge_invariance", "fokker_planck_analytic",
                    "continuity_analytic", "osmotic_analytic", "fokker_planck_histogram",
                    "continuity_histogram", "osmotic_histogram", "current_equivalence",
                    "charge_conservation", "action_stationarity"};
        return c;
    }
    if (id == "volkov_plane_wave_field") {
        c.description = "charge in a null plane wave: Ehrenfest with force, exact invariants";
        c.model_type = "volkov";
        c.momentum = {0.0, 0.0, -1.0};
        c.potential_type = "plane_wave";
        c.omega = 0.05;
        c.polarization = {0.0, 0.8, 0.0, 0.0};
        c.amplitude = 1.2;
        c.phase = 0.4;
        c.n_paths = 200000;
        c.dtau = 0.05;
        c.n_steps = 600;
        c.record_every = 30;
        c.master_seed = 71003;
        c.init_type = "point";
        c.init_point = {0.0, 0.0, 0.0, 0.0};
        c.t_min = 0.0;
        c.t_max = 20.0;
        c.t_bins = 8;
        c.z_min = -24.0;
        c.z_max = 4.0;
        c.z_bins = 24;
        c.checks = {"lorentz_invariant", "ehrenfest", "energy_constancy", "kg_points",
                    "eom_points", "curl_identity", "gauge_invariance", "action_stationarity"};
        return c;
    }
    if (id == "negative_control_offshell") {
        c = builtin_scenario("mode_sum_stationary");
        c.id = id;
        c.description = "mixed-mass mode sum: the identities that require the mass shell fail";
        c.mode_weights = {1.0, 0.6};
        c.offshell_delta = -1.0;
        c.offshell_mode = 1;
        c.n_paths = 50000;
        c.master_seed = 71004;
        c.max_abort_fraction = 0.01;
        c.fd_step = 5e-4;  // faster phases in the lightlike admixture
        c.checks = {"lorentz_invariant", "kg_points", "eom_points", "eom_identity",
                    "curl_identity", "action_stationarity"};
        c.expect_fail = {"lorentz_invariant", "kg_points", "eom_points", "action_stationarity"};
        return c;
    }
    if (id == "negative_control_scaled_drift") {
        c = builtin_scenario("mode_sum_stationary");
        c.id = id;
        c.description =
            "corrupted drift fields against honest densities: residual checks must reject";
        c.n_paths = 1000;  // analytic-grid track only
        c.master_seed = 71005;
        c.drift_scale = 2.0;
        c.lambda_scale = 1.25;
        c.continuity_wrong_branch = true;
        c.checks = {"fokker_planck_analytic", "continuity_analytic", "osmotic_analytic"};
        c.expect_fail = {"fokker_planck_analytic", "continuity_analytic", "osmotic_analytic"};
        return c;
    }
    throw ValidationError("scenario.id: unknown builtin '" + id + "'");
}

inline const std::vector<std::string>& builtin_scenario_ids() {
    static const std::vector<std::string> ids = {
        "plane_wave", "mode_sum_stationary", "volkov_plane_wave_field",
        "negative_control_offshell", "negative_control_scaled_drift"};
    return ids;
}

}  // namespace skg
