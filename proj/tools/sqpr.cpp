// Command-line driver for the secular quasi-periodic restricted model:
// integrates the outer pair, extracts its quasi-periodic decomposition,
// assembles the restricted Hamiltonian, constructs the invariant torus, and
// runs the norm-bound estimate, leaving reproducible artifacts at each stage.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sqpr/artifacts.hpp"
#include "sqpr/capest.hpp"
#include "sqpr/config.hpp"
#include "sqpr/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sqpr;

namespace {

constexpr const char* kToolVersion = "1.0.0";

struct Options {
    std::string configPath;
    std::string mode;  // "", "nogr", "gr"
    std::string outDir = "out";
    std::string configDir = "config";
    std::uint64_t seed = 0;
    bool dryRun = false;
};

fs::path resolveConfig(const Options& opt) {
    if (!opt.configPath.empty()) return opt.configPath;
    if (opt.mode == "nogr") return fs::path(opt.configDir) / "upsand-b-17-5.toml";
    if (opt.mode == "gr") return fs::path(opt.configDir) / "upsand-b-gr-20-0.toml";
    throw CLI::ValidationError("--config or --mode {nogr,gr} is required");
}

// --- manifest ----------------------------------------------------------------

class Manifest {
public:
    Manifest(const fs::path& outDir, const fs::path& configPath, std::uint64_t seed)
        : path_(outDir / "manifest.json") {
        if (fs::exists(path_)) {
            j_ = artdetail::readJson(path_);
        } else {
            j_["tool_version"] = kToolVersion;
            j_["stages"] = json::array();
        }
        j_["tool_version"] = kToolVersion;
        j_["config"] = {{"path", configPath.string()},
                        {"digest", digestString(fileDigest(configPath))}};
        j_["seed"] = seed;
    }

    void record(const std::string& stage, const std::vector<fs::path>& inputs,
                const std::vector<fs::path>& outputs, double seconds) {
        json entry;
        entry["name"] = stage;
        entry["wall_seconds"] = seconds;
        entry["inputs"] = digests(inputs);
        entry["outputs"] = digests(outputs);
        auto& stages = j_["stages"];
        for (auto& s : stages)
            if (s["name"] == stage) {
                s = entry;
                save();
                return;
            }
        stages.push_back(entry);
        save();
    }

    void save() const { artdetail::writeJson(path_, j_); }

private:
    static std::string digestString(std::uint64_t d) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
        return buf;
    }

    static json digests(const std::vector<fs::path>& files) {
        json out = json::object();
        for (const auto& f : files)
            out[f.filename().string()] = fs::exists(f) ? digestString(fileDigest(f)) : "missing";
        return out;
    }

    fs::path path_;
    json j_;
};

struct StageClock {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

// --- stages ------------------------------------------------------------------

struct Context {
    Options opt;
    fs::path configPath;
    fs::path out;
    LoadedConfig lc;
    Manifest manifest;

    Context(Options o)
        : opt(std::move(o)),
          configPath(resolveConfig(opt)),
          out(opt.outDir),
          lc(loadModelConfig(configPath)),
          manifest((fs::create_directories(opt.outDir), fs::path(opt.outDir)), configPath,
                   opt.seed) {}

    fs::path file(const std::string& name) const { return out / name; }
};

std::vector<DriveSample> loadDrive(const Context& ctx) {
    std::ifstream is(ctx.file("drive.csv"));
    if (!is) throw std::runtime_error("missing artifact drive.csv; run `integrate` first");
    return readDriveSamples(is);
}

TruncatedSeries loadSecular(const Context& ctx) {
    const fs::path p = ctx.file("H_secular.pseries");
    if (!fs::exists(p))
        throw std::runtime_error("missing artifact H_secular.pseries; run `build-secular` first");
    return artdetail::readSeries(p);
}

TorusConstruction loadTorus(const Context& ctx) {
    if (!fs::exists(ctx.file("torus_construction.json")))
        throw std::runtime_error("missing torus artifacts; run `newton` first");
    return loadTorusConstruction(ctx.out);
}

DiophantineSpec specOf(const Context& ctx, const TorusConstruction& tc) {
    DiophantineSpec spec = ctx.lc.run.dio;
    spec.omegaStar = tc.targets;
    return spec;
}

void runIntegrate(Context& ctx) {
    StageClock clock;
    const DriveResult dr = integrateDrive(ctx.lc);
    {
        std::ofstream os(ctx.file("drive.csv"));
        writeDriveSamples(os, dr.samples);
    }
    artdetail::writeJson(ctx.file("drive.json"),
                         {{"samples", dr.samples.size()},
                          {"dt", dr.dt},
                          {"max_energy_drift", dr.maxEnergyDrift}});
    ctx.manifest.record("integrate", {ctx.configPath}, {ctx.file("drive.csv"), ctx.file("drive.json")},
                        clock.seconds());
    std::printf("integrate: %zu samples, dt = %.6f yr, max energy drift %.3e\n",
                dr.samples.size(), dr.dt, dr.maxEnergyDrift);
    if (dr.maxEnergyDrift > 1e-6)
        throw std::runtime_error("integrate: energy drift exceeds 1e-6 relative");
}

void runFa(Context& ctx) {
    StageClock clock;
    const auto samples = loadDrive(ctx);
    const DriveAnalysis fa = analyzeDrive(samples, ctx.lc.run);
    saveDriveAnalysis(ctx.out, fa);
    std::vector<fs::path> outputs{ctx.file("qp.json")};
    for (int s = 0; s < 4; ++s) outputs.push_back(ctx.file("lines_" + std::to_string(s) + ".csv"));
    ctx.manifest.record("fa", {ctx.file("drive.csv")}, outputs, clock.seconds());
    std::printf("fa: fundamentals = (%.12e, %.12e, %.12e), max residual %.3e\n",
                fa.fundamentals[0], fa.fundamentals[1], fa.fundamentals[2], fa.maxResidual);
    if (fa.maxResidual > 0.05)
        throw std::runtime_error("fa: quasi-periodic model residual exceeds 5e-2 relative");
}

void runBuildSecular(Context& ctx) {
    StageClock clock;
    const DriveAnalysis fa = loadDriveAnalysis(ctx.out);
    InjectionReport rep;
    const TruncatedSeries H = assembleSecularModel(ctx.lc.system, fa.qp, ctx.lc.system.withGR, &rep);
    artdetail::writeSeries(ctx.file("H_secular.pseries"), H);
    const double defect = rotationInvarianceDefect(H).l1Norm();
    artdetail::writeJson(ctx.file("secular.json"),
                         {{"terms", H.size()},
                          {"l1_norm", H.l1Norm()},
                          {"dropped_monomials", rep.droppedMonomials},
                          {"rotation_defect", defect}});
    ctx.manifest.record("build-secular", {ctx.file("qp.json")},
                        {ctx.file("H_secular.pseries"), ctx.file("secular.json")}, clock.seconds());
    std::printf("build-secular: %zu terms, |H| = %.4e, rotation defect %.3e\n", H.size(),
                H.l1Norm(), defect);
    if (defect > 1e-10 * H.l1Norm())
        throw std::runtime_error("build-secular: rotation-invariance defect exceeds 1e-10 |H|");
}

void runElliptic(Context& ctx) {
    StageClock clock;
    const TruncatedSeries H = loadSecular(ctx);
    const TruncatedSeries Hp = invariantPolarForm(H);
    const EllipticState setup = ellipticSetup(Hp);
    const EllipticState st = ellipticNormalize(Hp);
    saveEllipticState(ctx.out, "elliptic", st);
    // the drift frequencies are read off the kernel once and must never move
    for (std::size_t j = 0; j < st.omega.size(); ++j)
        if (st.omega[j] != setup.omega[j])
            throw std::runtime_error("elliptic: drift frequency changed during normalization");
    artdetail::writeJson(ctx.file("elliptic_summary.json"),
                         {{"Omega", st.Omega}, {"omega", st.omega}, {"steps", st.stepsDone}});
    ctx.manifest.record("elliptic", {ctx.file("H_secular.pseries")},
                        {ctx.file("elliptic.json"), ctx.file("elliptic_summary.json")},
                        clock.seconds());
    std::printf("elliptic: %d steps, Omega = (%.8e, %.8e)\n", st.stepsDone, st.Omega[0],
                st.Omega[1]);
}

void runNewton(Context& ctx) {
    StageClock clock;
    const TruncatedSeries H = loadSecular(ctx);
    const DriveAnalysis fa = loadDriveAnalysis(ctx.out);
    const TorusConstruction tc = buildTorus(H, ctx.lc, fa);
    saveTorusConstruction(ctx.out, tc);
    {
        std::ofstream os(ctx.file("newton_trace.csv"));
        os << "iteration,Istar1,Istar2,dOmega_inf\n";
        os.precision(17);
        for (std::size_t i = 0; i < tc.newton.iterates.size(); ++i) {
            const auto& it = tc.newton.iterates[i];
            os << i << ',' << it.Istar[0] << ',' << it.Istar[1] << ',' << it.dOmegaNorm << '\n';
        }
    }
    ctx.manifest.record("newton", {ctx.file("H_secular.pseries"), ctx.file("qp.json")},
                        {ctx.file("torus_construction.json"), ctx.file("newton_trace.csv")},
                        clock.seconds());
    std::printf("newton: %d iterations, converged = %s\n", tc.newton.iterations(),
                tc.newton.converged ? "yes" : "no");
    std::printf("  proper = (%.12e, %.12e)\n", tc.proper.omega1Tilde, tc.proper.omega2Tilde);
    std::printf("  omega* = (%.17g, %.17g, %.17g, %.17g)\n", tc.targets[0], tc.targets[1],
                tc.targets[2], tc.targets[3]);
    std::printf("  I*     = (%.12e, %.12e), P5 = %.12e\n", tc.Istar[0], tc.Istar[1], tc.P5);
    if (!tc.newton.converged) throw std::runtime_error("newton: did not converge");
}

void runReduce(Context& ctx) {
    StageClock clock;
    const TorusConstruction tc = loadTorus(ctx);
    const KolmogorovState ks = reduceAngularMomentum(tc.elliptic, tc.Istar[0], tc.Istar[1], tc.P5,
                                                     2, ctx.lc.run.reductionFourierSteps);
    const TruncatedSeries H4 = ks.assembled();
    artdetail::writeSeries(ctx.file("H_reduced.pseries"), H4);
    ctx.manifest.record("reduce", {ctx.file("torus_construction.json")},
                        {ctx.file("H_reduced.pseries")}, clock.seconds());
    std::printf("reduce: 4 degrees of freedom, %zu terms, omega = (%.8e, %.8e, %.8e, %.8e)\n",
                H4.size(), ks.omega[0], ks.omega[1], ks.omega[2], ks.omega[3]);
    if (H4.dof() != 4) throw std::runtime_error("reduce: cyclic pair not eliminated");
}

void runKolmogorov(Context& ctx) {
    StageClock clock;
    const TorusConstruction tc = loadTorus(ctx);
    {
        std::ofstream os(ctx.file("generator_norms.csv"));
        os << "r,norm_chi1,norm_chi2\n";
        os.precision(17);
        for (std::size_t r = 0; r < tc.torus.normLog.size(); ++r)
            os << (r + 1) << ',' << tc.torus.normLog[r][0] << ',' << tc.torus.normLog[r][1] << '\n';
    }
    ctx.manifest.record("kolmogorov", {ctx.file("torus_construction.json")},
                        {ctx.file("generator_norms.csv")}, clock.seconds());
    std::printf("kolmogorov: %d steps, omega = (%.12e, %.12e, %.12e, %.12e)\n", tc.torus.stepsDone,
                tc.torus.omega[0], tc.torus.omega[1], tc.torus.omega[2], tc.torus.omega[3]);
    for (std::size_t r = 0; r < tc.torus.normLog.size(); ++r)
        std::printf("  r=%zu |chi1| = %.6e |chi2| = %.6e\n", r + 1, tc.torus.normLog[r][0],
                    tc.torus.normLog[r][1]);
}

void runSemiAnalytic(Context& ctx) {
    StageClock clock;
    const TruncatedSeries H = loadSecular(ctx);
    const DriveAnalysis fa = loadDriveAnalysis(ctx.out);
    const TorusConstruction tc = loadTorus(ctx);
    const OrbitComparison cmp = compareOrbits(H, ctx.lc, fa, tc);
    {
        std::ofstream os(ctx.file("orbit_comparison.csv"));
        os << "t,ecc_numeric,ecc_semi,inc_numeric_deg,inc_semi_deg\n";
        os.precision(17);
        constexpr double kRad = 180.0 / std::numbers::pi;
        for (const auto& r : cmp.rows)
            os << r.t << ',' << r.eccNumeric << ',' << r.eccSemi << ',' << r.incNumeric * kRad
               << ',' << r.incSemi * kRad << '\n';
    }
    const double incDeg = cmp.maxIncDeviation * 180.0 / std::numbers::pi;
    artdetail::writeJson(ctx.file("orbit_summary.json"),
                         {{"max_ecc_deviation", cmp.maxEccDeviation},
                          {"max_inc_deviation_deg", incDeg}});
    ctx.manifest.record(
        "semi-analytic",
        {ctx.file("H_secular.pseries"), ctx.file("qp.json"), ctx.file("torus_construction.json")},
        {ctx.file("orbit_comparison.csv"), ctx.file("orbit_summary.json")}, clock.seconds());
    std::printf("semi-analytic: max |Delta e| = %.4e, max |Delta i| = %.4f deg over %.0f yr\n",
                cmp.maxEccDeviation, incDeg, ctx.lc.run.orbitSpan);
    if (cmp.maxEccDeviation > 2e-3 || incDeg > 0.2)
        throw std::runtime_error("semi-analytic: deviation from the numeric orbit too large");
}

void runCapEstimate(Context& ctx) {
    StageClock clock;
    const TorusConstruction tc = loadTorus(ctx);
    const TruncatedSeries Hx = exportForBounds(tc, ctx.lc.run);
    artdetail::writeSeries(ctx.file("H_export.pseries"), Hx);
    const DiophantineSpec spec = specOf(ctx, tc);
    const EstimateTrace trace =
        twoRegimeRun(Hx, spec, ctx.lc.run.capExplicitSteps, ctx.lc.run.capTotalSteps);
    {
        std::ofstream os(ctx.file("capest_trace.csv"));
        os << trace.toCsv();
    }
    artdetail::writeJson(ctx.file("capest_summary.json"),
                         {{"success", trace.success},
                          {"failed_step", trace.failedStep},
                          {"regime_switch_step", trace.regimeSwitchStep},
                          {"first_diophantine_step", trace.firstDiophantineStep},
                          {"steps", trace.rows.size()}});
    ctx.manifest.record("cap-estimate", {ctx.file("torus_construction.json")},
                        {ctx.file("H_export.pseries"), ctx.file("capest_trace.csv"),
                         ctx.file("capest_summary.json")},
                        clock.seconds());
    std::printf("cap-estimate: %zu steps, regime switch at r = %d, success = %s\n",
                trace.rows.size(), trace.regimeSwitchStep, trace.success ? "yes" : "no");
    if (!trace.success) throw std::runtime_error("cap-estimate: norm-bound iteration diverged");
}

void runMeasure(Context& ctx) {
    StageClock clock;
    const TorusConstruction tc = loadTorus(ctx);
    const DiophantineSpec spec = specOf(ctx, tc);
    const double measure = diophantineMeasure(spec);
    const GammaCheckResult gc = gammaCheck(spec, spec.maxmodkcalc);
    artdetail::writeJson(ctx.file("measure.json"),
                         {{"measure_lower_bound", measure},
                          {"gamma", spec.gamma},
                          {"tau", spec.tau},
                          {"rho", spec.rho},
                          {"gamma_check_ok", gc.ok},
                          {"gamma_check_margin", gc.margin},
                          {"gamma_check_min_product", gc.minProduct}});
    ctx.manifest.record("measure", {ctx.file("torus_construction.json")},
                        {ctx.file("measure.json")}, clock.seconds());
    std::printf("measure: Diophantine-ball fraction >= %.6f, gamma margin %.3e (%s)\n", measure,
                gc.margin, gc.ok ? "ok" : "FAILED");
    if (measure < 0.90)
        throw std::runtime_error("measure: Diophantine-ball fraction below 0.90");
    if (!gc.ok) throw std::runtime_error("measure: non-resonance condition violated");
}

void writeReport(Context& ctx) {
    json report;
    report["config"] = ctx.configPath.string();
    report["gr"] = ctx.lc.system.withGR;
    for (const char* name :
         {"drive.json", "qp.json", "secular.json", "elliptic_summary.json",
          "torus_construction.json", "orbit_summary.json", "capest_summary.json", "measure.json"}) {
        const fs::path p = ctx.file(name);
        if (fs::exists(p)) report[fs::path(name).stem().string()] = artdetail::readJson(p);
    }
    artdetail::writeJson(ctx.file("report.json"), report);

    std::ofstream os(ctx.file("report.txt"));
    os.precision(17);
    os << "Secular quasi-periodic restricted model: pipeline report\n";
    os << "config: " << ctx.configPath.string() << (ctx.lc.system.withGR ? " (GR)" : "") << "\n\n";
    if (report.contains("qp")) {
        const auto& f = report["qp"]["fundamentals"];
        os << "drive fundamentals [rad/yr]: " << f[0].get<double>() << ", " << f[1].get<double>()
           << ", " << f[2].get<double>() << "\n";
    }
    if (report.contains("torus_construction")) {
        const auto& t = report["torus_construction"];
        os << "frequency vector omega*: ";
        for (const auto& w : t["targets"]) os << w.get<double>() << ' ';
        os << "\ntranslation I*: " << t["Istar"][0].get<double>() << ", "
           << t["Istar"][1].get<double>() << "\n";
        os << "Newton iterations: " << (t["newton"]["iterates"].size() - 1) << "\n";
    }
    if (report.contains("orbit_summary"))
        os << "orbit comparison: max |Delta e| = "
           << report["orbit_summary"]["max_ecc_deviation"].get<double>()
           << ", max |Delta i| = " << report["orbit_summary"]["max_inc_deviation_deg"].get<double>()
           << " deg\n";
    if (report.contains("capest_summary"))
        os << "norm-bound run: success = "
           << (report["capest_summary"]["success"].get<bool>() ? "yes" : "no")
           << ", regime switch at r = "
           << report["capest_summary"]["regime_switch_step"].get<int>() << "\n";
    if (report.contains("measure"))
        os << "Diophantine measure >= " << report["measure"]["measure_lower_bound"].get<double>()
           << ", gamma margin = " << report["measure"]["gamma_check_margin"].get<double>() << "\n";
}

void runPipeline(Context& ctx) {
    if (ctx.opt.dryRun) {
        ctx.manifest.save();
        std::printf("dry run: manifest written to %s\n", ctx.file("manifest.json").c_str());
        return;
    }
    runIntegrate(ctx);
    runFa(ctx);
    runBuildSecular(ctx);
    runElliptic(ctx);
    runNewton(ctx);
    runReduce(ctx);
    runKolmogorov(ctx);
    runSemiAnalytic(ctx);
    runCapEstimate(ctx);
    runMeasure(ctx);
    writeReport(ctx);
    ctx.manifest.save();
    std::printf("pipeline complete; report at %s\n", ctx.file("report.txt").c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Secular quasi-periodic restricted model pipeline"};
    app.require_subcommand(1);

    Options opt;
    app.add_option("--config", opt.configPath, "model configuration file");
    app.add_option("--mode", opt.mode, "preset selection when --config is omitted")
        ->check(CLI::IsMember({"nogr", "gr"}));
    app.add_option("--out-dir", opt.outDir, "artifact directory (default: out)");
    app.add_option("--config-dir", opt.configDir, "preset directory for --mode (default: config)");
    app.add_option("--seed", opt.seed, "random seed recorded in the manifest");

    struct Cmd {
        const char* name;
        const char* help;
        void (*fn)(Context&);
    };
    const Cmd cmds[] = {
        {"integrate", "integrate the outer pair and store the sampled drive", runIntegrate},
        {"fa", "quasi-periodic decomposition of the stored drive", runFa},
        {"build-secular", "assemble the restricted secular Hamiltonian", runBuildSecular},
        {"elliptic", "normalize around the forced elliptic torus", runElliptic},
        {"newton", "construct the invariant torus (reduction + Newton + normalization)", runNewton},
        {"reduce", "angular-momentum reduction at the converged translation", runReduce},
        {"kolmogorov", "report the torus normalization generator norms", runKolmogorov},
        {"semi-analytic", "compare the torus reconstruction with direct integration",
         runSemiAnalytic},
        {"cap-estimate", "two-regime norm-bound run on the exported Hamiltonian", runCapEstimate},
        {"measure", "Diophantine measure and non-resonance check", runMeasure},
        {"pipeline", "run every stage in order and write the report", runPipeline},
    };
    for (const auto& c : cmds) app.add_subcommand(c.name, c.help)->fallthrough();
    app.get_subcommand("pipeline")->add_flag("--dry-run", opt.dryRun,
                                             "write the manifest without running stages");

    CLI11_PARSE(app, argc, argv);

    try {
        Context ctx(opt);
        for (const auto& c : cmds)
            if (app.get_subcommand(c.name)->parsed()) c.fn(ctx);
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
