#pragma once

// Run configuration: a small reader for the structured-text config files
// (a TOML subset: sections, key = value with numbers, strings, booleans and
// flat arrays), plus the translation into the model and run parameter
// structs used by the pipeline stages.

#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sqpr/capest.hpp"
#include "sqpr/freqan.hpp"
#include "sqpr/secmodel.hpp"

namespace sqpr {

// --- structured-text reader --------------------------------------------------

// Flat "section.key -> raw token" view of a config file.  Supported syntax:
//   [section] / [section.sub]     section headers
//   key = 1.5 | "text" | true | [1, 2, 3] | ["a", "b"]
//   # comment (full line or trailing)
class ConfigFile {
public:
    static ConfigFile parse(std::istream& is, const std::string& origin = "<stream>") {
        ConfigFile cf;
        cf.origin_ = origin;
        std::string line, section;
        int lineNo = 0;
        while (std::getline(is, line)) {
            ++lineNo;
            stripComment(line);
            const std::string t = trim(line);
            if (t.empty()) continue;
            if (t.front() == '[') {
                if (t.back() != ']')
                    throw std::runtime_error(origin + ":" + std::to_string(lineNo) +
                                             ": unterminated section header");
                section = trim(t.substr(1, t.size() - 2));
                if (section.empty())
                    throw std::runtime_error(origin + ":" + std::to_string(lineNo) +
                                             ": empty section name");
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error(origin + ":" + std::to_string(lineNo) +
                                         ": expected key = value");
            const std::string key = trim(t.substr(0, eq));
            const std::string val = trim(t.substr(eq + 1));
            if (key.empty() || val.empty())
                throw std::runtime_error(origin + ":" + std::to_string(lineNo) +
                                         ": empty key or value");
            const std::string full = section.empty() ? key : section + "." + key;
            if (!cf.values_.emplace(full, val).second)
                throw std::runtime_error(origin + ":" + std::to_string(lineNo) +
                                         ": duplicate key " + full);
        }
        return cf;
    }

    static ConfigFile load(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open config file: " + path.string());
        return parse(is, path.string());
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    // All keys under "prefix." in file-independent (lexicographic) order.
    std::vector<std::string> keysUnder(const std::string& prefix) const {
        std::vector<std::string> out;
        const std::string p = prefix + ".";
        for (const auto& [k, v] : values_)
            if (k.rfind(p, 0) == 0) out.push_back(k);
        return out;
    }

    double number(const std::string& key) const {
        const std::string& v = raw(key);
        std::size_t used = 0;
        double x;
        try {
            x = std::stod(v, &used);
        } catch (const std::exception&) {
            throw std::runtime_error(origin_ + ": key " + key + ": not a number: " + v);
        }
        if (used != v.size())
            throw std::runtime_error(origin_ + ": key " + key + ": trailing characters in " + v);
        return x;
    }

    double number(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }

    int integer(const std::string& key) const {
        const double x = number(key);
        const int i = static_cast<int>(x);
        if (static_cast<double>(i) != x)
            throw std::runtime_error(origin_ + ": key " + key + ": not an integer");
        return i;
    }

    int integer(const std::string& key, int fallback) const {
        return has(key) ? integer(key) : fallback;
    }

    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string& v = raw(key);
        if (v == "true") return true;
        if (v == "false") return false;
        throw std::runtime_error(origin_ + ": key " + key + ": expected true or false");
    }

    std::string text(const std::string& key) const {
        const std::string& v = raw(key);
        if (v.size() < 2 || v.front() != '"' || v.back() != '"')
            throw std::runtime_error(origin_ + ": key " + key + ": expected a quoted string");
        return v.substr(1, v.size() - 2);
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        return has(key) ? text(key) : fallback;
    }

    std::vector<std::string> list(const std::string& key) const {
        const std::string& v = raw(key);
        if (v.size() < 2 || v.front() != '[' || v.back() != ']')
            throw std::runtime_error(origin_ + ": key " + key + ": expected [ ... ]");
        std::vector<std::string> items;
        std::string cur;
        for (std::size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == ',') {
                items.push_back(trim(cur));
                cur.clear();
            } else {
                cur += v[i];
            }
        }
        if (!trim(cur).empty()) items.push_back(trim(cur));
        for (auto& it : items)
            if (it.size() >= 2 && it.front() == '"' && it.back() == '"')
                it = it.substr(1, it.size() - 2);
        return items;
    }

    std::vector<double> numbers(const std::string& key) const {
        std::vector<double> out;
        for (const auto& it : list(key)) {
            try {
                out.push_back(std::stod(it));
            } catch (const std::exception&) {
                throw std::runtime_error(origin_ + ": key " + key + ": not a number: " + it);
            }
        }
        return out;
    }

    const std::map<std::string, std::string>& entries() const { return values_; }
    const std::string& origin() const { return origin_; }

private:
    const std::string& raw(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end())
            throw std::runtime_error(origin_ + ": missing config key: " + key);
        return it->second;
    }

    static void stripComment(std::string& line) {
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.erase(i);
                return;
            }
        }
    }

    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    std::map<std::string, std::string> values_;
    std::string origin_;
};

// --- model and run parameters ------------------------------------------------

// Parameters of the pipeline stages that are not part of the physical model.
struct RunSettings {
    // drive integration and frequency analysis
    double driveSpan = 131072.0;    // [yr] total span of the drive trajectory
    double driveSpacing = 1.0;      // [yr] spacing of the stored samples
    int stepsPerPeriod = 50;        // integrator steps per innermost period
    int eccLines = 4;               // components kept in the xi + i eta signals
    int incLines = 5;               // components kept in the P + i Q signals
    int labelOrder = 12;            // |k|_1 cap when labelling lines
    double labelTol = 1e-5;         // [rad/yr] frequency tolerance for labels

    // normal forms
    int torusSteps = 6;             // normalization steps of the final stage
    int reductionFourierSteps = 6;  // trigonometric orders kept after reduction
    int exportFourierSteps = 7;     // widened reduction feeding the norm bounds

    // Newton refinement of the translation vector
    int newtonMaxIter = 10;
    double newtonTol = 1e-10;

    // norm-bound iteration and non-resonance checks
    DiophantineSpec dio;            // omegaStar filled in by the pipeline
    int capExplicitSteps = 12;      // R_I
    int capTotalSteps = 2000;       // R_II

    // semi-analytic vs numeric orbit comparison
    double orbitSpan = 1e5;         // [yr]
    double orbitSpacing = 50.0;     // [yr]
};

struct LoadedConfig {
    SystemConfig system;             // planets in file order: inner first, then outer
    std::vector<std::string> names;  // body names, aligned with system.planets
    int innerCount = 0;              // leading planets that are modelled, not drive
    RunSettings run;
};

inline LoadedConfig loadModelConfig(const ConfigFile& cf) {
    constexpr double kDeg = std::numbers::pi / 180.0;
    LoadedConfig lc;
    SystemConfig& cfg = lc.system;

    cfg.m0 = cf.number("star.mass");
    cfg.G = cf.number("units.gravitational_constant",
                      4.0 * std::numbers::pi * std::numbers::pi);
    cfg.cLight = cf.number("units.light_speed", 63241.07708);
    const double mJup = cf.number("units.jupiter_mass", 9.5458e-4);

    std::vector<std::string> inner, outer;
    if (cf.has("bodies.inner")) inner = cf.list("bodies.inner");
    outer = cf.list("bodies.outer");
    if (outer.size() != 2)
        throw std::runtime_error(cf.origin() + ": exactly two outer (drive) bodies required");
    if (inner.size() > 1)
        throw std::runtime_error(cf.origin() + ": at most one inner body supported");
    lc.innerCount = static_cast<int>(inner.size());

    auto loadBody = [&](const std::string& name) {
        const std::string p = "body." + name + ".";
        PlanetConfig pc;
        pc.mass = cf.number(p + "mass_jupiter") * mJup;
        pc.el.a = cf.number(p + "semi_major_axis");
        pc.el.e = cf.number(p + "eccentricity");
        pc.el.inc = cf.number(p + "inclination_deg") * kDeg;
        pc.el.M = cf.number(p + "mean_anomaly_deg") * kDeg;
        pc.el.argPeri = cf.number(p + "arg_pericenter_deg") * kDeg;
        pc.el.node = cf.number(p + "node_deg") * kDeg;
        cfg.planets.push_back(pc);
        lc.names.push_back(name);
    };
    for (const auto& n : inner) loadBody(n);
    for (const auto& n : outer) loadBody(n);

    cfg.secularDegree = cf.integer("truncation.secular_degree", 8);
    cfg.actionDegreeCap = cf.integer("truncation.action_degree_cap", 6);
    cfg.trigBandCount = cf.integer("truncation.trig_band_count", 4);
    cfg.trigBandWidth = cf.integer("truncation.trig_band_width", 2);
    cfg.quadratureNodes = cf.integer("truncation.quadrature_nodes", 64);
    cfg.withGR = cf.flag("gr.enabled", false);

    RunSettings& rs = lc.run;
    rs.driveSpan = cf.number("drive.span", rs.driveSpan);
    rs.driveSpacing = cf.number("drive.spacing", rs.driveSpacing);
    rs.stepsPerPeriod = cf.integer("drive.steps_per_period", rs.stepsPerPeriod);
    rs.eccLines = cf.integer("drive.eccentricity_lines", rs.eccLines);
    rs.incLines = cf.integer("drive.inclination_lines", rs.incLines);
    rs.labelOrder = cf.integer("drive.label_order", rs.labelOrder);
    rs.labelTol = cf.number("drive.label_tolerance", rs.labelTol);

    rs.torusSteps = cf.integer("normalform.torus_steps", rs.torusSteps);
    rs.reductionFourierSteps =
        cf.integer("normalform.reduction_fourier_steps", rs.reductionFourierSteps);
    rs.exportFourierSteps =
        cf.integer("normalform.export_fourier_steps", rs.exportFourierSteps);
    rs.newtonMaxIter = cf.integer("newton.max_iterations", rs.newtonMaxIter);
    rs.newtonTol = cf.number("newton.tolerance", rs.newtonTol);

    rs.dio.gamma = cf.number("nonresonance.gamma", rs.dio.gamma);
    rs.dio.tau = cf.number("nonresonance.tau", rs.dio.tau);
    rs.dio.rho = cf.number("nonresonance.rho", rs.dio.rho);
    rs.dio.maxmodkcalc = cf.integer("nonresonance.max_harmonic", rs.dio.maxmodkcalc);
    rs.capExplicitSteps = cf.integer("nonresonance.explicit_steps", rs.capExplicitSteps);
    rs.capTotalSteps = cf.integer("nonresonance.total_steps", rs.capTotalSteps);

    rs.orbitSpan = cf.number("comparison.span", rs.orbitSpan);
    rs.orbitSpacing = cf.number("comparison.spacing", rs.orbitSpacing);
    return lc;
}

inline LoadedConfig loadModelConfig(const std::filesystem::path& path) {
    return loadModelConfig(ConfigFile::load(path));
}

// --- tabular files -----------------------------------------------------------

// One sampled drive state: time plus the secular Poincare pairs of the two
// outer planets.
struct DriveSample {
    double t = 0.0;
    // [planet][0] = xi + i eta, [planet][1] = P + i Q
    std::array<std::array<std::complex<double>, 2>, 2> z{};
};

inline void writeDriveSamples(std::ostream& os, const std::vector<DriveSample>& rows) {
    os << "t,xi2,eta2,P2,Q2,xi3,eta3,P3,Q3\n";
    char buf[32];
    auto put = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        os << ',' << buf;
    };
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.t);
        os << buf;
        for (const auto& planet : r.z)
            for (const auto& s : planet) {
                put(s.real());
                put(s.imag());
            }
        os << '\n';
    }
}

inline std::vector<DriveSample> readDriveSamples(std::istream& is) {
    std::vector<DriveSample> rows;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("drive samples: empty file");
    if (line.rfind("t,", 0) != 0) throw std::runtime_error("drive samples: missing header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::array<double, 9> v{};
        char comma;
        ls >> v[0];
        for (std::size_t i = 1; i < v.size(); ++i) ls >> comma >> v[i];
        if (!ls) throw std::runtime_error("drive samples: malformed row: " + line);
        DriveSample r;
        r.t = v[0];
        r.z[0][0] = {v[1], v[2]};
        r.z[0][1] = {v[3], v[4]};
        r.z[1][0] = {v[5], v[6]};
        r.z[1][1] = {v[7], v[8]};
        rows.push_back(r);
    }
    return rows;
}

// Spectral line lists: one row per component, harmonic label optional.
inline void writeLineList(std::ostream& os, const std::vector<SpectralLine>& lines) {
    os << "omega,A,theta,k1,k2,k3\n";
    char buf[32];
    for (const auto& l : lines) {
        std::snprintf(buf, sizeof buf, "%.17g", l.omega);
        os << buf;
        std::snprintf(buf, sizeof buf, "%.17g", l.A);
        os << ',' << buf;
        std::snprintf(buf, sizeof buf, "%.17g", l.theta);
        os << ',' << buf;
        if (l.k)
            os << ',' << (*l.k)[0] << ',' << (*l.k)[1] << ',' << (*l.k)[2];
        else
            os << ",,,";
        os << '\n';
    }
}

inline std::vector<SpectralLine> readLineList(std::istream& is) {
    std::vector<SpectralLine> lines;
    std::string line;
    if (!std::getline(is, line) || line.rfind("omega,", 0) != 0)
        throw std::runtime_error("line list: missing header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::string cur;
        for (char c : line)
            if (c == ',') {
                cols.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        cols.push_back(cur);
        if (cols.size() != 6) throw std::runtime_error("line list: malformed row: " + line);
        SpectralLine l;
        l.omega = std::stod(cols[0]);
        l.A = std::stod(cols[1]);
        l.theta = std::stod(cols[2]);
        if (!cols[3].empty())
            l.k = std::array<int, 3>{std::stoi(cols[3]), std::stoi(cols[4]), std::stoi(cols[5])};
        lines.push_back(l);
    }
    return lines;
}

// --- digests -----------------------------------------------------------------

// 64-bit FNV-1a, used for the reproducibility manifest.
inline std::uint64_t contentDigest(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t fileDigest(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open file for digest: " + p.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return contentDigest(ss.str());
}

}  // namespace sqpr
