#pragma once

// Persistence of the pipeline's intermediate states.  Series go to .pseries
// text files (exact %.17g round-trip), scalar state to a JSON sidecar, and
// canonical maps to the manifest format of CanonicalMap.  Loading an artifact
// directory reproduces the in-memory state bit for bit.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sqpr/config.hpp"
#include "sqpr/pipeline.hpp"

namespace sqpr {

namespace artdetail {

using nlohmann::json;

inline json toJson(const ChartPoint& z) {
    json j;
    j["dof"] = z.dof;
    json kinds = json::array(), vals = json::array();
    for (int i = 0; i < z.dof; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        kinds.push_back(static_cast<int>(z.kinds[iu]));
        vals.push_back({z.z[iu].radial, z.z[iu].angular});
    }
    j["kinds"] = kinds;
    j["values"] = vals;
    return j;
}

inline ChartPoint chartPointFromJson(const json& j) {
    ChartPoint z;
    z.dof = j.at("dof").get<int>();
    for (int i = 0; i < z.dof; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        z.kinds[iu] = static_cast<PairKind>(j.at("kinds").at(iu).get<int>());
        z.z[iu] = {j.at("values").at(iu).at(0).get<double>(),
                   j.at("values").at(iu).at(1).get<double>()};
    }
    return z;
}

inline void writeSeries(const std::filesystem::path& p, const TruncatedSeries& s) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    s.writeText(os);
}

inline TruncatedSeries readSeries(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw std::runtime_error("cannot read " + p.string());
    return TruncatedSeries::readText(is);
}

inline void writeJson(const std::filesystem::path& p, const json& j) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << j.dump(2) << '\n';
}

inline json readJson(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw std::runtime_error("cannot read " + p.string());
    return json::parse(is);
}

}  // namespace artdetail

// --- drive analysis ----------------------------------------------------------

inline void saveDriveAnalysis(const std::filesystem::path& dir, const DriveAnalysis& fa) {
    namespace ad = artdetail;
    std::filesystem::create_directories(dir);
    ad::json j;
    j["fundamentals"] = {fa.fundamentals[0], fa.fundamentals[1], fa.fundamentals[2]};
    j["qp_omega"] = {fa.qp.omega[0], fa.qp.omega[1], fa.qp.omega[2]};
    j["max_residual"] = fa.maxResidual;
    ad::json sig = ad::json::array();
    for (int p = 0; p < 2; ++p)
        for (int w = 0; w < 2; ++w) {
            ad::json rows = ad::json::array();
            for (const auto& h : fa.qp.signals[static_cast<std::size_t>(p)][static_cast<std::size_t>(w)])
                rows.push_back({h.k[0], h.k[1], h.k[2], h.amp, h.phase});
            sig.push_back({{"planet", p}, {"pair", w}, {"harmonics", rows}});
        }
    j["signals"] = sig;
    ad::writeJson(dir / "qp.json", j);
    for (std::size_t s = 0; s < fa.lines.size(); ++s) {
        std::ofstream os(dir / ("lines_" + std::to_string(s) + ".csv"));
        writeLineList(os, fa.lines[s]);
    }
}

inline DriveAnalysis loadDriveAnalysis(const std::filesystem::path& dir) {
    namespace ad = artdetail;
    const ad::json j = ad::readJson(dir / "qp.json");
    DriveAnalysis fa;
    for (std::size_t i = 0; i < 3; ++i) {
        fa.fundamentals[i] = j.at("fundamentals").at(i).get<double>();
        fa.qp.omega[i] = j.at("qp_omega").at(i).get<double>();
    }
    fa.maxResidual = j.at("max_residual").get<double>();
    for (const auto& sig : j.at("signals")) {
        const auto p = sig.at("planet").get<std::size_t>();
        const auto w = sig.at("pair").get<std::size_t>();
        for (const auto& row : sig.at("harmonics")) {
            QPHarmonic h;
            h.k = {row.at(0).get<int>(), row.at(1).get<int>(), row.at(2).get<int>()};
            h.amp = row.at(3).get<double>();
            h.phase = row.at(4).get<double>();
            fa.qp.signals[p][w].push_back(h);
        }
    }
    for (std::size_t s = 0; s < fa.lines.size(); ++s) {
        std::ifstream is(dir / ("lines_" + std::to_string(s) + ".csv"));
        if (is) fa.lines[s] = readLineList(is);
    }
    return fa;
}

// --- normal-form states ------------------------------------------------------

inline void saveEllipticState(const std::filesystem::path& dir, const std::string& name,
                              const EllipticState& st) {
    namespace ad = artdetail;
    std::filesystem::create_directories(dir);
    ad::json j;
    j["energy"] = st.energy;
    j["omega"] = st.omega;
    j["Omega"] = st.Omega;
    j["sq_count"] = st.sqCount;
    j["steps_done"] = st.stepsDone;
    j["divisor_floor"] = st.divisorFloor;
    ad::json nl = ad::json::array();
    for (const auto& n : st.normLog) nl.push_back({n[0], n[1], n[2]});
    j["norm_log"] = nl;
    j["components"] = st.f.size();
    ad::writeJson(dir / (name + ".json"), j);
    for (std::size_t s = 0; s < st.f.size(); ++s)
        ad::writeSeries(dir / (name + "_f" + std::to_string(s) + ".pseries"), st.f[s]);
    st.generators.writeManifest(dir, name + "_gen");
}

inline EllipticState loadEllipticState(const std::filesystem::path& dir, const std::string& name) {
    namespace ad = artdetail;
    const ad::json j = ad::readJson(dir / (name + ".json"));
    EllipticState st;
    st.energy = j.at("energy").get<double>();
    st.omega = j.at("omega").get<std::vector<double>>();
    st.Omega = j.at("Omega").get<std::vector<double>>();
    st.sqCount = j.at("sq_count").get<int>();
    st.stepsDone = j.at("steps_done").get<int>();
    st.divisorFloor = j.at("divisor_floor").get<double>();
    for (const auto& n : j.at("norm_log"))
        st.normLog.push_back({n.at(0).get<double>(), n.at(1).get<double>(), n.at(2).get<double>()});
    const auto comps = j.at("components").get<std::size_t>();
    for (std::size_t s = 0; s < comps; ++s)
        st.f.push_back(ad::readSeries(dir / (name + "_f" + std::to_string(s) + ".pseries")));
    st.generators = CanonicalMap::readManifest(dir, name + "_gen");
    return st;
}

inline void saveKolmogorovState(const std::filesystem::path& dir, const std::string& name,
                                const KolmogorovState& st) {
    namespace ad = artdetail;
    std::filesystem::create_directories(dir);
    ad::json j;
    j["energy"] = st.energy;
    j["omega"] = st.omega;
    j["steps_done"] = st.stepsDone;
    j["divisor_floor"] = st.divisorFloor;
    ad::json nl = ad::json::array();
    for (const auto& n : st.normLog) nl.push_back({n[0], n[1]});
    j["norm_log"] = nl;
    j["components"] = st.f.size();
    ad::writeJson(dir / (name + ".json"), j);
    for (std::size_t s = 0; s < st.f.size(); ++s)
        ad::writeSeries(dir / (name + "_f" + std::to_string(s) + ".pseries"), st.f[s]);
    st.generators.writeManifest(dir, name + "_gen");
}

inline KolmogorovState loadKolmogorovState(const std::filesystem::path& dir,
                                           const std::string& name) {
    namespace ad = artdetail;
    const ad::json j = ad::readJson(dir / (name + ".json"));
    KolmogorovState st;
    st.energy = j.at("energy").get<double>();
    st.omega = j.at("omega").get<std::vector<double>>();
    st.stepsDone = j.at("steps_done").get<int>();
    st.divisorFloor = j.at("divisor_floor").get<double>();
    for (const auto& n : j.at("norm_log"))
        st.normLog.push_back({n.at(0).get<double>(), n.at(1).get<double>()});
    const auto comps = j.at("components").get<std::size_t>();
    for (std::size_t s = 0; s < comps; ++s)
        st.f.push_back(ad::readSeries(dir / (name + "_f" + std::to_string(s) + ".pseries")));
    st.generators = CanonicalMap::readManifest(dir, name + "_gen");
    return st;
}

// --- full torus construction -------------------------------------------------

inline void saveTorusConstruction(const std::filesystem::path& dir, const TorusConstruction& tc) {
    namespace ad = artdetail;
    std::filesystem::create_directories(dir);
    saveEllipticState(dir, "elliptic", tc.elliptic);
    saveKolmogorovState(dir, "torus", tc.torus);
    ad::json j;
    j["proper"] = {tc.proper.omega1Tilde, tc.proper.omega2Tilde};
    j["targets"] = tc.targets;
    j["Istar"] = tc.Istar;
    j["P5"] = tc.P5;
    j["action_scale"] = tc.actionScale;
    j["z0_normalized"] = ad::toJson(tc.z0normalized);
    ad::json it = ad::json::array();
    for (const auto& rec : tc.newton.iterates)
        it.push_back({{"Istar", rec.Istar},
                      {"dOmega", rec.dOmega},
                      {"dOmega_norm", rec.dOmegaNorm},
                      {"h", rec.h},
                      {"jacobian", rec.jac}});
    j["newton"] = {{"converged", tc.newton.converged}, {"iterates", it}};
    ad::writeJson(dir / "torus_construction.json", j);
}

inline TorusConstruction loadTorusConstruction(const std::filesystem::path& dir) {
    namespace ad = artdetail;
    TorusConstruction tc;
    tc.elliptic = loadEllipticState(dir, "elliptic");
    tc.torus = loadKolmogorovState(dir, "torus");
    const ad::json j = ad::readJson(dir / "torus_construction.json");
    tc.proper = {j.at("proper").at(0).get<double>(), j.at("proper").at(1).get<double>()};
    for (std::size_t i = 0; i < 4; ++i) tc.targets[i] = j.at("targets").at(i).get<double>();
    for (std::size_t i = 0; i < 2; ++i) tc.Istar[i] = j.at("Istar").at(i).get<double>();
    tc.P5 = j.at("P5").get<double>();
    tc.actionScale = j.value("action_scale", 1.0);
    tc.z0normalized = ad::chartPointFromJson(j.at("z0_normalized"));
    tc.newton.converged = j.at("newton").at("converged").get<bool>();
    for (const auto& rec : j.at("newton").at("iterates")) {
        NewtonTrace::Iterate r;
        for (std::size_t i = 0; i < 2; ++i) {
            r.Istar[i] = rec.at("Istar").at(i).get<double>();
            r.dOmega[i] = rec.at("dOmega").at(i).get<double>();
            r.h[i] = rec.at("h").at(i).get<double>();
        }
        r.dOmegaNorm = rec.at("dOmega_norm").get<double>();
        for (std::size_t i = 0; i < 4; ++i) r.jac[i] = rec.at("jacobian").at(i).get<double>();
        tc.newton.iterates.push_back(r);
    }
    return tc;
}

}  // namespace sqpr
