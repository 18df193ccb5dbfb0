#pragma once

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dualschro/continuation.hpp"
#include "dualschro/io.hpp"
#include "dualschro/nonlinearity.hpp"
#include "dualschro/solver.hpp"
#include "dualschro/theta.hpp"

namespace dualschro::cli {

enum ExitCode : int { ok = 0, refusal = 1, numerical_failure = 2 };

/// Flat run configuration shared by every subcommand.
struct RunConfig {
    std::string theta = "theta1";
    double q = 1.0;
    std::optional<double> lambda;
    std::string lambda_range;  ///< "min:max:count", log-spaced
    int dim = 1;
    int n = 400;
    std::string bounds = "0,1";
    double pad = 0.1;
    double tol = 1e-9;
    int N = 3;
    double r = 2.0;
    double s_max = default_transform_extent;
    std::string start = "auto";  ///< auto | sub | super | maximal | newton
    std::string output_dir = "out";
    bool parallel = false;

    /// Sorted key=value lines; numbers at 17 significant digits.
    std::string canonical() const {
        std::ostringstream o;
        o << "N=" << N << '\n';
        o << "bounds=" << bounds << '\n';
        o << "dim=" << dim << '\n';
        if (lambda) o << "lambda=" << io::num(*lambda) << '\n';
        if (!lambda_range.empty()) o << "lambda_range=" << lambda_range << '\n';
        o << "n=" << n << '\n';
        o << "output_dir=" << output_dir << '\n';
        o << "pad=" << io::num(pad) << '\n';
        o << "parallel=" << (parallel ? "true" : "false") << '\n';
        o << "q=" << io::num(q) << '\n';
        o << "r=" << io::num(r) << '\n';
        o << "s_max=" << io::num(s_max) << '\n';
        o << "start=" << start << '\n';
        o << "theta=" << theta << '\n';
        o << "tol=" << io::num(tol) << '\n';
        return o.str();
    }

    std::uint32_t hash() const { return io::crc32(canonical()); }
};

/// Register every RunConfig key as a top-level option; `--config` reads a key=value file.
inline void bind(CLI::App& app, RunConfig& c) {
    app.add_option("--theta", c.theta, "coefficient: theta1, theta2[:p=<v>], theta3, theta4, theta5, unit (or all)");
    app.add_option("--q", c.q, "exponent of the power nonlinearity");
    app.add_option("--lambda", c.lambda, "parameter lambda");
    app.add_option("--lambda_range", c.lambda_range, "min:max:count, log-spaced");
    app.add_option("--dim", c.dim, "mesh dimension (1 or 2)");
    app.add_option("--n", c.n, "interior points per axis");
    // Config files split comma lists; join them back so "0,1" stays one string.
    app.add_option("--bounds", c.bounds, "a,b or ax,bx,ay,by")
        ->delimiter(',')
        ->multi_option_policy(CLI::MultiOptionPolicy::Join);
    app.add_option("--pad", c.pad, "padding fraction of the torsion domain");
    app.add_option("--tol", c.tol, "sup-norm stopping tolerance");
    app.add_option("--N", c.N, "space dimension of the scalar regime tests");
    app.add_option("--r", c.r, "exponent of the phi_1^r sub-solution");
    app.add_option("--s_max", c.s_max, "extent of the tabulated transform");
    app.add_option("--start", c.start, "auto, sub, super, maximal or newton");
    app.add_option("--output_dir", c.output_dir, "directory for CSV and manifest output");
    app.add_flag("--parallel", c.parallel, "cold-start parallel sweep (q <= 1)");
    app.set_config("--config", "", "flat key=value configuration file");
}

/// Parse a key=value file through the same option table the CLI uses.
inline RunConfig load_config(const std::string& text) {
    RunConfig c;
    CLI::App app;
    bind(app, c);
    std::istringstream in(text);
    app.parse_from_stream(in);
    return c;
}

namespace detail {

inline std::vector<double> split_numbers(const std::string& s, char sep) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw ContractError("malformed number '" + item + "' in '" + s + "'");
        out.push_back(v);
    }
    return out;
}

inline DomainMesh make_mesh(const RunConfig& c) {
    const auto b = split_numbers(c.bounds, ',');
    if (c.dim == 1) {
        if (b.size() != 2) throw ContractError("bounds: 1D needs a,b");
        return DomainMesh::interval(b[0], b[1], c.n, c.pad);
    }
    if (c.dim == 2) {
        if (b.size() == 2) return DomainMesh::rectangle(b[0], b[1], b[0], b[1], c.n, c.pad);
        if (b.size() == 4) return DomainMesh::rectangle(b[0], b[1], b[2], b[3], c.n, c.pad);
        throw ContractError("bounds: 2D needs a,b or ax,bx,ay,by");
    }
    throw ContractError("dim must be 1 or 2");
}

inline std::vector<double> lambda_list(const RunConfig& c) {
    if (c.lambda_range.empty()) {
        if (c.lambda) return {*c.lambda};
        throw ContractError("sweep needs --lambda_range min:max:count");
    }
    const auto p = split_numbers(c.lambda_range, ':');
    if (p.size() != 3 || p[2] < 1 || p[2] != std::floor(p[2])) throw ContractError("lambda_range must be min:max:count");
    if (!(p[0] > 0.0 && p[1] > 0.0)) throw ContractError("lambda <= 0 has no nontrivial solution; refusing");
    const auto count = static_cast<std::size_t>(p[2]);
    if (count == 1) return {p[0]};
    return log_grid(p[0], p[1], count);
}

struct Context {
    const RunConfig& cfg;
    std::ostream& out;
};

inline Nonlinearity make_nonlinearity(const RunConfig& c) {
    return Nonlinearity(build_transform(theta_by_name(c.theta), c.s_max), c.q, c.N);
}

inline int cmd_validate_theta(const Context& ctx) {
    const RunConfig& c = ctx.cfg;
    std::vector<ThetaSpec> specs = c.theta == "all" ? catalog() : std::vector<ThetaSpec>{theta_by_name(c.theta)};
    io::Csv csv({"theta", "bounded_below", "even", "monotone", "ratio_nonincreasing", "quadratic_limit",
                 "alpha_estimate", "worst_s", "worst_violation"});
    bool all_ok = true;
    for (const auto& spec : specs) {
        const auto rep = validate_hypotheses(spec, c.s_max, 2000);
        const bool ok = rep.bounded_below_ok && rep.even_ok && rep.monotone_ok && rep.ratio_nonincreasing_ok && rep.quadratic_limit_ok;
        all_ok = all_ok && ok;
        auto b = [](bool x) { return std::string(x ? "1" : "0"); };
        csv.cells({spec.name, b(rep.bounded_below_ok), b(rep.even_ok), b(rep.monotone_ok), b(rep.ratio_nonincreasing_ok), b(rep.quadratic_limit_ok),
                   io::num(rep.alpha_estimate), io::num(rep.worst_violation.first),
                   io::num(rep.worst_violation.second)});
        ctx.out << spec.name << ": " << (ok ? "all hypotheses hold" : "hypotheses violated")
                << " (alpha estimate " << io::num(rep.alpha_estimate) << ")\n";
    }
    io::OutputDir dir(c.output_dir);
    dir.write("theta_validation.csv", csv.str());
    dir.write_manifest(c.canonical());
    return all_ok ? ok : refusal;
}

inline int cmd_transform(const Context& ctx) {
    const RunConfig& c = ctx.cfg;
    const auto t = build_transform(theta_by_name(c.theta), c.s_max, std::min(c.tol, 1e-4));
    io::Csv csv({"s", "f", "f_prime", "f_second", "ode_residual"});
    std::vector<double> grid{0.0};
    for (double s : log_grid(1e-6, c.s_max, 1000)) grid.push_back(s);
    for (double s : grid) csv.row({s, t.eval(s), t.prime(s), t.second(s), t.ode_residual(s)});
    io::OutputDir dir(c.output_dir);
    dir.write("transform.csv", csv.str());
    dir.write_manifest(c.canonical());
    const double S = t.s_max();
    ctx.out << "nodes=" << t.size() << " residual=" << io::num(t.achieved_residual())
            << " f(S)/sqrt(S)=" << io::num(t.eval(S) / std::sqrt(S)) << " f'(S)f(S)=" << io::num(t.prime(S) * t.eval(S))
            << '\n';
    return ok;
}

inline std::string report_text(const RunConfig& c, const SolveReport& r) {
    std::ostringstream o;
    o << "lambda=" << io::num(r.lambda) << '\n'
      << "q=" << io::num(c.q) << '\n'
      << "theta=" << c.theta << '\n'
      << "status=" << to_string(r.status) << '\n'
      << "converged=" << (r.converged ? "true" : "false") << '\n'
      << "sup_v=" << io::num(r.sup_v) << '\n'
      << "sup_u=" << io::num(r.sup_u) << '\n'
      << "energy=" << io::num(r.energy) << '\n'
      << "residual=" << io::num(r.residual_sup) << '\n'
      << "iterations=" << r.iterations << '\n';
    if (!r.message.empty()) o << "message=" << r.message << '\n';
    return o.str();
}

inline int cmd_solve(const Context& ctx) {
    const RunConfig& c = ctx.cfg;
    if (!c.lambda) throw ContractError("solve needs --lambda");
    if (sign_guard(*c.lambda) == SignDecision::refuse)
        throw ContractError("lambda <= 0: the problem has no nontrivial solution; refusing to solve");
    const Nonlinearity n = make_nonlinearity(c);
    const Domain dom = prepare_domain(make_mesh(c));
    SolveConfig sc = dualschro::detail::base_config(dom, n, *c.lambda, c.tol, 10000);
    sc.r = c.r;

    std::string start = c.start;
    if (start == "auto") start = c.q <= 1.0 ? "sub" : c.q < 3.0 ? "maximal" : "newton";
    SolveReport r;
    if (start == "sub" || start == "super") {
        sc.start = start == "sub" ? StartKind::from_sub : StartKind::from_super;
        r = solve(sc, n, dom);
    } else if (start == "maximal") {
        r = dualschro::detail::maximal_solution(n, dom, *c.lambda, c.tol, 10000);
    } else if (start == "newton") {
        r = newton_solve(sc, n, dualschro::detail::linearized_guess(n, dom, *c.lambda));
    } else {
        throw ContractError("unknown start '" + c.start + "'");
    }
    if (r.converged && !dualschro::detail::is_positive(r.v, r.sup_v))
        throw CertificateError("iteration collapsed to the trivial solution: no positive solution at this lambda");

    io::OutputDir dir(c.output_dir);
    const std::string text = report_text(c, r);
    dir.write("report.txt", text);
    dir.write("solution.csv", io::fields_csv({"v", "u"}, {&r.v, &r.u}));
    dir.write_manifest(c.canonical());
    ctx.out << text;
    return r.converged ? ok : numerical_failure;
}

inline int cmd_sweep(const Context& ctx) {
    const RunConfig& c = ctx.cfg;
    const auto lambdas = lambda_list(c);
    const Nonlinearity n = make_nonlinearity(c);
    const Domain dom = prepare_domain(make_mesh(c));
    SweepOptions opt;
    opt.tol = c.tol;
    opt.parallel = c.parallel;
    const Branch b = sweep(n, dom, lambdas, opt);
    io::Csv csv({"lambda", "sup_v", "sup_u", "energy", "stability", "converged", "branch_id"});
    std::size_t good = 0;
    for (const auto& p : b.points) {
        csv.cells({io::num(p.lambda), io::num(p.sup_v), io::num(p.sup_u), io::num(p.energy), std::to_string(p.stability),
                   p.converged ? "1" : "0", p.branch_id});
        good += p.converged;
    }
    io::OutputDir dir(c.output_dir);
    dir.write("branch.csv", csv.str());
    dir.write_manifest(c.canonical());
    ctx.out << "points=" << b.points.size() << " converged=" << good << '\n';
    return ok;
}

inline int cmd_threshold(const Context& ctx) {
    const RunConfig& c = ctx.cfg;
    const Nonlinearity n = make_nonlinearity(c);
    const Domain dom = prepare_domain(make_mesh(c));
    io::OutputDir dir(c.output_dir);
    if (c.q == 1.0 || c.q == 3.0) {
        ThresholdEstimate est;
        if (c.q == 1.0) {
            est = linear_threshold(n, dom);
        } else {
            const auto tr = bifurcation_from_infinity(n, dom);
            est = {tr.estimate, tr.predicted};
        }
        io::Csv csv({"estimate", "predicted", "relative_error"});
        csv.row({est.estimate, est.predicted, est.relative_error()});
        dir.write("threshold.csv", csv.str());
        ctx.out << csv.str();
    } else if (c.q > 1.0 && c.q < 3.0) {
        BisectionOptions opt;
        opt.tol = c.tol;
        auto probe = [&](double l) { return fold_probe(n, dom, l, opt); };
        const auto [lo, hi] = auto_bracket(probe, dom.eig.lambda);
        const double ls = find_lambda_star(n, dom, lo, hi, opt);
        io::Csv csv({"lambda_star"});
        csv.row({ls});
        dir.write("threshold.csv", csv.str());
        ctx.out << csv.str();
    } else {
        throw ContractError("no finite existence threshold for q outside [1, 3]: positive solutions exist for every "
                            "lambda > 0 (or for none above the critical exponent)");
    }
    dir.write_manifest(c.canonical());
    return ok;
}

inline int cmd_pohozaev(const Context& ctx) {
    const RunConfig& c = ctx.cfg;
    const Nonlinearity n = make_nonlinearity(c);
    const auto rep = pohozaev_scan(n, c.N, std::min(1e4, c.s_max), 1e-6, 1000);
    io::Csv csv({"s", "z", "ratio"});
    for (std::size_t i = 0; i < rep.s.size(); ++i) csv.row({rep.s[i], rep.z[i], rep.ratio[i]});
    io::OutputDir dir(c.output_dir);
    dir.write("pohozaev.csv", csv.str());
    dir.write_manifest(c.canonical());
    ctx.out << "min_z=" << io::num(rep.min_z) << " max_ratio=" << io::num(rep.max_ratio)
            << " bound=" << io::num(rep.ratio_bound) << '\n';
    ctx.out << (rep.nonexistence() ? "nonexistence condition satisfied" : "nonexistence condition not satisfied")
            << '\n';
    return ok;
}

/// Human-readable regime table for q and N.
inline std::string regimes_text(const RunConfig& c) {
    std::ostringstream o;
    const Regime reg = classify_regime(c.q, c.N);
    const ThetaSpec th = theta_by_name(c.theta);
    const double lam1 = principal_eigenpair(make_mesh(c), 1).lambda;
    o << "q=" << io::num(c.q) << " N=" << c.N << " regime=" << to_string(reg)
      << " critical_exponent=" << io::num(critical_exponent(c.N)) << '\n';
    o << "lambda_1=" << io::num(lam1) << " (mesh)\n";
    switch (reg) {
        case Regime::sublinear:
            o << "structure: unique positive solution for every lambda>0; |u|_inf->0 as lambda->0 and ->inf as "
                 "lambda->inf\n";
            o << "subcommands: solve, sweep\n";
            break;
        case Regime::linear_at_zero:
            o << "structure: positive solution iff lambda > theta(0) lambda_1 = " << io::num(th.eval(0.0) * lam1)
              << '\n';
            o << "subcommands: solve, sweep, threshold\n";
            break;
        case Regime::between:
            o << "structure: no positive solution for lambda<lambda_*, one at lambda_*, at least two ordered for "
                 "lambda>lambda_*; lambda_* numeric via threshold\n";
            o << "subcommands: solve, sweep, threshold\n";
            break;
        case Regime::critical_slope:
            if (th.alpha)
                o << "structure: positive solution iff lambda>(alpha^2/4)lambda_1 = "
                  << io::num(*th.alpha * *th.alpha / 4.0 * lam1) << "; |u|_inf->inf at the threshold\n";
            else
                o << "structure: positive solution iff lambda>(alpha^2/4)lambda_1 (alpha undefined for this theta)\n";
            o << "subcommands: solve, sweep, threshold\n";
            break;
        case Regime::superlinear:
            o << "structure: positive solution iff lambda>0; |u|_inf->inf as lambda->0\n";
            o << "subcommands: solve, sweep\n";
            break;
        case Regime::supercritical:
            o << "structure: no positive solution (starshaped Omega)\n";
            o << "subcommands: pohozaev-check\n";
            break;
    }
    return o.str();
}

}  // namespace detail

/// CLI entry; returns the process exit code (0 ok, 1 refusal, 2 numerical failure).
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Quasilinear Schrodinger problems through the dual transform"};
    RunConfig cfg;
    bind(app, cfg);
    app.fallthrough();
    app.require_subcommand(1);
    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(const detail::Context&);
    };
    const Sub subs[] = {
        {"validate-theta", "check the coefficient hypotheses", detail::cmd_validate_theta},
        {"transform", "tabulate f, f', f''", detail::cmd_transform},
        {"solve", "solve the dual problem at one lambda", detail::cmd_solve},
        {"sweep", "bifurcation diagram over a lambda range", detail::cmd_sweep},
        {"threshold", "existence threshold for q in [1, 3]", detail::cmd_threshold},
        {"pohozaev-check", "Pohozaev nonexistence scan", detail::cmd_pohozaev},
        {"regimes", "regime classification for q", nullptr},
    };
    for (const auto& s : subs) app.add_subcommand(s.name, s.help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : refusal;
    }

    const detail::Context ctx{cfg, out};
    try {
        for (const auto& s : subs) {
            if (!app.got_subcommand(s.name)) continue;
            if (!s.fn) {
                out << detail::regimes_text(cfg);
                return ok;
            }
            return s.fn(ctx);
        }
    } catch (const CertificateError& e) {
        err << "refused: " << e.what() << '\n';
        return refusal;
    } catch (const ContractError& e) {
        err << "refused: " << e.what() << '\n';
        return refusal;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    }
    return refusal;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    std::vector<const char*> argv{"dualschro"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace dualschro::cli
