// magdecay: config-driven experiment runner over the magnetic-Schroedinger
// toolkit. Subcommands: norms, spectrum, decay, wave, quadrature, algebra, all.
// Exit codes: 0 success, 1 error, 2 failed acceptance assertion.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include <magdecay/assembly.hpp>
#include <magdecay/evolve.hpp>
#include <magdecay/free_resolvent.hpp>
#include <magdecay/norms.hpp>
#include <magdecay/spectral.hpp>

using namespace magdecay;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct ExperimentConfig {
    PotentialSpec A, V;
    int grid_n = 32;
    double box_l = 16.0;
    unsigned seed = 1;
    std::string out_dir = "magdecay_out";
    bool plots = false;
    json raw;
};

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config parse error at byte " +
                                 std::to_string(e.byte) + ": " + e.what());
    }
    ExperimentConfig cfg;
    cfg.raw = j;
    if (j.contains("potentials")) {
        const auto& p = j["potentials"];
        if (p.contains("A"))
            cfg.A = PotentialSpec::from_json_string(p["A"].dump());
        if (p.contains("V"))
            cfg.V = PotentialSpec::from_json_string(p["V"].dump());
    }
    if (j.contains("grid")) {
        cfg.grid_n = j["grid"].value("n", 32);
        cfg.box_l = j["grid"].value("L", 16.0);
    }
    cfg.seed = j.value("seed", 1u);
    if ((cfg.grid_n & (cfg.grid_n - 1)) != 0 || cfg.grid_n < 8)
        throw std::runtime_error("config: grid n must be a power of two >= 8");
    if (!(cfg.box_l > 0)) throw std::runtime_error("config: L must be positive");
    return cfg;
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::array<double, 2>>& rows) {
    std::ofstream out(path);
    out << header << "\n";
    out.precision(15);
    for (const auto& r : rows) out << r[0] << "," << r[1] << "\n";
}

void write_svg_curve(const fs::path& path, const std::vector<double>& xs,
                     const std::vector<double>& ys, const std::string& title,
                     bool loglog, double fit_slope = 0, double fit_intercept = 0) {
    if (xs.size() < 2) return;
    auto tx = [&](double v) { return loglog ? std::log10(v) : v; };
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (loglog && (xs[i] <= 0 || ys[i] <= 0)) continue;
        xmin = std::min(xmin, tx(xs[i]));
        xmax = std::max(xmax, tx(xs[i]));
        ymin = std::min(ymin, tx(ys[i]));
        ymax = std::max(ymax, tx(ys[i]));
    }
    if (!(xmax > xmin) || !(ymax > ymin)) return;
    const double W = 640, Hh = 420, m = 50;
    auto px = [&](double x) { return m + (W - 2 * m) * (x - xmin) / (xmax - xmin); };
    auto py = [&](double y) {
        return Hh - m - (Hh - 2 * m) * (y - ymin) / (ymax - ymin);
    };
    std::ofstream out(path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='"
        << Hh << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>"
        << title << "</text>\n";
    out << "<polyline fill='none' stroke='steelblue' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (loglog && (xs[i] <= 0 || ys[i] <= 0)) continue;
        out << px(tx(xs[i])) << "," << py(tx(ys[i])) << " ";
    }
    out << "'/>\n";
    if (fit_slope != 0) {
        double y0 = fit_intercept + fit_slope * xmin;
        double y1 = fit_intercept + fit_slope * xmax;
        out << "<line stroke='tomato' stroke-dasharray='5,4' x1='" << px(xmin)
            << "' y1='" << py(y0) << "' x2='" << px(xmax) << "' y2='" << py(y1)
            << "'/>\n";
    }
    out << "<line stroke='black' x1='" << m << "' y1='" << Hh - m << "' x2='"
        << W - m << "' y2='" << Hh - m << "'/>\n";
    out << "<line stroke='black' x1='" << m << "' y1='" << m << "' x2='" << m
        << "' y2='" << Hh - m << "'/>\n</svg>\n";
}

ScalarField gaussian_data(const Grid3D& g, double w) {
    ScalarField f(g);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k)
                f.at(i, j, k) = std::exp(-g.point(i, j, k).norm2() / (w * w));
    return f;
}

int run_norms(const ExperimentConfig& cfg, json& rep, const fs::path& out) {
    Grid3D g(cfg.grid_n, cfg.box_l);
    NormReport r = membership_report(cfg.A, cfg.V, g);
    json norms;
    for (const auto& [k, v] : r.values) norms[norm_kind_name(k)] = v;
    rep["norms"] = norms;
    rep["member_X"] = r.member_X;
    rep["member_Y"] = r.member_Y;
    if (!cfg.A.vector_empty()) {
        NormChain chain = norm_chain_check(cfg.A, g);
        rep["norm_chain"] = {chain.a_k2, chain.grad_a_k, chain.hess_a_l1};
    }
    (void)out;
    return 0;
}

int run_spectrum(const ExperimentConfig& cfg, json& rep, const fs::path& out) {
    Grid3D g(cfg.grid_n, cfg.box_l);
    const auto block = cfg.raw.value("spectrum", json::object());
    int k = block.value("k", 6);
    double zero_tol = block.value("zero_tol", 0.02);
    HamiltonianOperator H(g, cfg.A, cfg.V);
    SpectrumReport r = eigensolve(H, k, zero_tol);
    json eigs = json::array();
    std::ofstream blob(out / "eigenvectors.bin", std::ios::binary);
    for (const auto& p : r.pairs) {
        const char* cls = p.cls == EigClass::Negative
                              ? "negative"
                              : (p.cls == EigClass::NearZero ? "near-zero"
                                                             : "positive");
        eigs.push_back({{"value", p.value},
                        {"residual", p.residual},
                        {"class", cls},
                        {"lambda_n", p.lambda_n}});
        blob.write(reinterpret_cast<const char*>(p.state.values.data()),
                   std::streamsize(p.state.values.size() * sizeof(cplx)));
    }
    rep["eigenpairs"] = eigs;
    rep["negative_count"] = r.negative_count();
    rep["birman_schwinger_count"] = birman_schwinger_count(g, cfg.A, cfg.V, k);
    RegularityDiagnostic zr =
        zero_regularity(cfg.A, cfg.V, block.value("zr_h", 0.25));
    rep["zero_regularity"] = {{"sigma_min_h", zr.sigma_min_h},
                              {"sigma_min_hm1", zr.sigma_min_hm1},
                              {"regular_h", zr.regular_h},
                              {"regular_hm1", zr.regular_hm1},
                              {"trend_ratio_h", zr.trend_ratio_h}};
    if (cfg.plots) {
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < r.pairs.size(); ++i) {
            xs.push_back(double(i));
            ys.push_back(r.pairs[i].value);
        }
        write_svg_curve(out / "eigenvalue_ladder.svg", xs, ys, "eigenvalue ladder",
                        false);
    }
    return 0;
}

int run_decay(const ExperimentConfig& cfg, json& rep, const fs::path& out) {
    Grid3D g(cfg.grid_n, cfg.box_l);
    const auto block = cfg.raw.value("decay", json::object());
    double w = block.value("data_width", 1.0);
    double t_lo = block.value("window_lo", 2.0);
    double t_hi = block.value("window_hi", 8.0);
    double dt = block.value("dt_sample", 0.1);
    HamiltonianOperator H(g, cfg.A, cfg.V);
    SpectrumReport bound;
    if (!cfg.V.scalar.empty() || !cfg.A.vector_empty())
        bound = eigensolve(H, block.value("k", 4), block.value("zero_tol", 0.02));
    ScalarField f0 = gaussian_data(g, w);
    DecayFit fit = decay_experiment(H, bound, f0, t_lo, t_hi, dt);
    rep["decay"] = {{"exponent", fit.exponent},
                    {"exponent_stderr", fit.exponent_stderr},
                    {"amplitude_ratio", fit.amplitude_ratio},
                    {"truncated", fit.truncated},
                    {"breach_time", fit.breach_time},
                    {"fit_window", {fit.fit_lo, fit.fit_hi}}};
    std::vector<std::array<double, 2>> rows;
    for (std::size_t i = 0; i < fit.times.size(); ++i)
        rows.push_back({fit.times[i], fit.sup_norms[i]});
    write_csv(out / "decay.csv", "t,sup_norm", rows);
    if (cfg.plots) {
        double intercept = 0;
        if (!fit.times.empty())
            intercept = std::log10(fit.sup_norms[0]) -
                        fit.exponent * std::log10(fit.times[0]);
        write_svg_curve(out / "decay_loglog.svg", fit.times, fit.sup_norms,
                        "sup norm vs t (log-log)", true, fit.exponent, intercept);
    }
    // acceptance assertion for the free configuration
    if (cfg.V.scalar.empty() && cfg.A.vector_empty()) {
        double tol = block.value("exponent_tol", 0.05);
        if (std::abs(fit.exponent + 1.5) > tol) return 2;
    }
    return 0;
}

int run_wave(const ExperimentConfig& cfg, json& rep, const fs::path& out) {
    std::vector<WaveKernelTrace> traces;
    bool free_case = cfg.V.scalar.empty() && cfg.A.vector_empty();
    if (free_case) {
        Grid3D g(cfg.grid_n, cfg.box_l);
        std::vector<Vec3> offs{{5.2, 0, 0}, {0, 5.5, 0}, {0, 0, 5.4},
                               {4.0, 4.0, 0}, {3.4, 3.4, 3.4}};
        for (const auto& o : offs)
            traces.push_back(wave_sine_kernel_free(g, o * 0.5, o * -0.5));
    } else {
        Grid3D g(std::min(cfg.grid_n, 16), cfg.box_l);
        HamiltonianOperator H(g, cfg.A, cfg.V);
        DenseWaveCalculus calc(H);
        for (const Vec3& o : {Vec3{3.0, 0, 0}, Vec3{0, 3.2, 0}, Vec3{2.2, 2.2, 0}})
            traces.push_back(calc.trace(o * 0.5, o * -0.5));
    }
    WaveBoundReport wb = wave_bound_checks(traces);
    json jt = json::array();
    for (std::size_t i = 0; i < wb.traces.size(); ++i) {
        const auto& tr = wb.traces[i];
        jt.push_back({{"dist", tr.dist},
                      {"i1", tr.i1},
                      {"i2", tr.i2},
                      {"i2_scaled", tr.i2 * 4 * M_PI * tr.dist},
                      {"quiet_rel", tr.peak > 0 ? tr.quiet_sup / tr.peak : 0.0}});
        std::vector<std::array<double, 2>> rows;
        for (std::size_t q = 0; q < tr.times.size(); ++q)
            rows.push_back({tr.times[q], tr.k_values[q]});
        write_csv(out / ("wave_trace_" + std::to_string(i) + ".csv"), "t,abs_K",
                  rows);
        if (cfg.plots && i == 0)
            write_svg_curve(out / "wave_trace.svg", tr.times, tr.k_values,
                            "|K(t)| at the first probe pair", false);
    }
    rep["wave"] = {{"max_i2_scaled", wb.max_i2_scaled},
                   {"min_i2_scaled", wb.min_i2_scaled},
                   {"max_quiet_rel", wb.max_quiet_rel},
                   {"i1_tail_decaying", wb.i1_tail_decaying},
                   {"traces", jt}};
    if (free_case && (wb.max_i2_scaled > 1.02 || wb.min_i2_scaled < 0.98)) return 2;
    return 0;
}

int run_quadrature(const ExperimentConfig& cfg, json& rep, const fs::path& out) {
    (void)out;
    EllipsoidFrame fr({-0.5, 0, 0}, {0.5, 0, 0});
    double gauss_mass = foliated_integral(
        fr, [](const Vec3& y) { return std::exp(-y.norm2()); }, 14.0, 1e-9);
    rep["foliated_gaussian"] = gauss_mass;
    double rel = std::abs(gauss_mass - std::pow(M_PI, 1.5)) / std::pow(M_PI, 1.5);
    rep["foliated_gaussian_rel_err"] = rel;
    json lemmas;
    PotentialSpec f = cfg.V;
    if (f.scalar.empty())
        f.scalar.terms.push_back({BumpKind::Gaussian, {}, 1.0, 0.8});
    EllipsoidFrame harness_frame({-0.8, 0, 0}, {0.8, 0, 0});
    for (auto [id, name] : std::initializer_list<std::pair<LemmaId, const char*>>{
             {LemmaId::L1, "L1"},
             {LemmaId::L2, "L2"},
             {LemmaId::L2LOG, "L2LOG"},
             {LemmaId::L3, "L3"},
             {LemmaId::L3LOG, "L3LOG"}}) {
        if (id != LemmaId::L1 && !f.scalar.smooth()) continue;
        LemmaCheck c = lemma_harness(id, f, harness_frame);
        lemmas[name] = {{"lhs", c.lhs}, {"rhs", c.rhs}, {"ratio", c.ratio}};
    }
    rep["lemma_harness"] = lemmas;
    return rel < 1e-6 ? 0 : 2;
}

int run_algebra(const ExperimentConfig& cfg, json& rep, const fs::path& out) {
    AssemblyPotentials pots{cfg.A, cfg.A, cfg.V, cfg.V};
    Vec3 x{-1, 0, 0}, z{1, 0, 0};
    if (cfg.A.vector_empty() && cfg.V.scalar.empty()) {
        rep["algebra"] = "zero potentials: nothing to assemble";
        return 0;
    }
    RhoKernel t1 =
        assemble_t_hat(cfg.A.vector_empty() ? TPart::T4 : TPart::T1, pots, x, z);
    save_rho_kernel(t1, (out / "t_kernel.bin").string());
    json hats = json::array();
    for (double lam : {0.0, 1.0, 2.0}) {
        cplx h = hat(t1, lam).at(0, 0);
        hats.push_back({{"lambda", lam}, {"re", h.real()}, {"im", h.imag()}});
    }
    rep["algebra"] = {{"kernel_file", "t_kernel.bin"},
                      {"hat", hats},
                      {"rho_nodes", t1.rho_nodes.size()},
                      {"atoms", t1.atoms.size()}};
    if (!cfg.A.vector_empty()) {
        Grid3D g(std::min(cfg.grid_n, 64), std::min(cfg.box_l, 10.0));
        BilBreakdown bil = bil_bound(cfg.A, cfg.A, g);
        rep["bil_bound"] = bil.total();
    }
    if (cfg.plots) {
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < t1.rho_nodes.size(); ++i) {
            xs.push_back(t1.rho_nodes[i]);
            ys.push_back(std::abs(t1.values[i].at(0, 0)));
        }
        write_svg_curve(out / "rho_kernel.svg", xs, ys, "|T_hat(rho)|", false);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"magnetic Schroedinger decay toolkit"};
    std::string subcommand, config_path, out_dir;
    bool plots = false;
    int grid_n_override = 0;
    double box_l_override = 0;
    app.add_option("subcommand", subcommand,
                   "norms|spectrum|decay|wave|quadrature|algebra|all")
        ->required();
    app.add_option("--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--grid-n", grid_n_override, "override grid points per axis");
    app.add_option("--box-l", box_l_override, "override box length");
    app.add_flag("--plots", plots, "emit SVG plots");
    CLI11_PARSE(app, argc, argv);

    // numerics are single-threaded; MAGDECAY_THREADS >= 1 is honored trivially
    if (const char* cap = std::getenv("MAGDECAY_THREADS")) (void)cap;

    try {
        ExperimentConfig cfg = load_config(config_path);
        if (grid_n_override > 0) cfg.grid_n = grid_n_override;
        if (box_l_override > 0) cfg.box_l = box_l_override;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        cfg.plots = plots || cfg.raw.value("plots", false);
        fs::create_directories(cfg.out_dir);
        fs::path out(cfg.out_dir);

        json rep;
        rep["config_hash"] = fnv1a(cfg.raw.dump());
        rep["grid"] = {{"n", cfg.grid_n}, {"L", cfg.box_l}};
        rep["seed"] = cfg.seed;
        rep["subcommand"] = subcommand;

        int rc = 0;
        auto run_one = [&](const std::string& name) {
            if (name == "norms") return run_norms(cfg, rep, out);
            if (name == "spectrum") return run_spectrum(cfg, rep, out);
            if (name == "decay") return run_decay(cfg, rep, out);
            if (name == "wave") return run_wave(cfg, rep, out);
            if (name == "quadrature") return run_quadrature(cfg, rep, out);
            if (name == "algebra") return run_algebra(cfg, rep, out);
            throw std::runtime_error("unknown subcommand: " + name);
        };
        if (subcommand == "all") {
            for (const char* name :
                 {"norms", "spectrum", "decay", "wave", "quadrature", "algebra"})
                rc = std::max(rc, run_one(name));
        } else {
            rc = run_one(subcommand);
        }
        rep["status"] = rc == 0 ? "ok" : "acceptance-failed";

        std::ofstream repf(out / "report.json");
        repf << rep.dump(2) << "\n";
        // timestamps live outside the deterministic report
        std::ofstream meta(out / "run_meta.json");
        meta << json{{"walltime_unix", std::time(nullptr)}}.dump() << "\n";
        std::cout << rep.dump(2) << std::endl;
        return rc;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
