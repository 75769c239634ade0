#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "coupling/json_io.hpp"

namespace {

using namespace coupling;
using nlohmann::json;

int log_level() {
    const char* env = std::getenv("COUPLING_LOG");
    if (!env) return 0;
    std::string s = env;
    if (s == "debug") return 2;
    if (s == "info") return 1;
    return 0;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[info] " << msg << "\n";
}

struct RunConfig {
    std::string mu_path, nu_path, config_path, out_dir;
    int grid = 1000;
    int y_grid = 256;
    double a = 0.0;
    double v = 0.0, u = -1.0;  // shadow stratum (v, u]
    InjectiveConfig build;
};

// config file supplies defaults; explicit flags win (caller re-applies them)
void apply_config_file(RunConfig& rc) {
    if (rc.config_path.empty()) return;
    std::ifstream in(rc.config_path);
    if (!in) throw std::invalid_argument("cannot open config: " + rc.config_path);
    json j;
    in >> j;
    if (!j.is_object()) throw std::invalid_argument("config: expected an object");
    for (auto& [key, val] : j.items()) {
        if (key == "grid") rc.grid = val.get<int>();
        else if (key == "y_grid") rc.y_grid = val.get<int>();
        else if (key == "eps_term") rc.build.eps_term_rel = val.get<double>();
        else if (key == "eps_block") rc.build.curtain.eps_block_rel = val.get<double>();
        else if (key == "eps_x") rc.build.curtain.eps_x_rel = val.get<double>();
        else if (key == "ring_eps") rc.build.ring_eps = val.get<double>();
        else if (key == "scan_n") rc.build.curtain.scan.scan_n = val.get<int>();
        else if (key == "branch_samples") rc.build.branch_samples = val.get<int>();
        else if (key == "curtain_grid") rc.build.curtain.grid_n = val.get<int>();
        else throw std::invalid_argument("config: unknown field \"" + key + "\"");
    }
    if (!(rc.build.eps_term_rel > 0.0) || !(rc.build.curtain.eps_x_rel > 0.0) ||
        !(rc.build.ring_eps > 0.0) || !(rc.build.ring_eps < 1.0))
        throw std::invalid_argument("config: tolerances must be positive, ring_eps in (0,1)");
}

// stdout by default; a file under --out when given
class Sink {
public:
    Sink(const std::string& out_dir, const std::string& name) {
        if (!out_dir.empty()) {
            path_ = out_dir + "/" + name;
            file_ = std::make_unique<std::ofstream>(path_);
            if (!*file_) throw std::runtime_error("cannot write " + path_);
        }
    }
    std::ostream& os() { return file_ ? *file_ : std::cout; }
    ~Sink() {
        if (file_ && log_level() >= 1) std::cerr << "[info] wrote " << path_ << "\n";
    }

private:
    std::string path_;
    std::unique_ptr<std::ofstream> file_;
};

Measure require_measure(const std::string& path, const char* flag) {
    if (path.empty())
        throw std::invalid_argument(std::string("missing required flag ") + flag);
    return load_measure(path);
}

int cmd_check(const RunConfig& rc) {
    Measure mu = require_measure(rc.mu_path, "--mu");
    Measure nu = require_measure(rc.nu_path, "--nu");
    ConvexOrderReport rep = check_convex_order(mu, nu);
    Sink sink(rc.out_dir, "check.json");
    sink.os() << order_report_to_json(rep).dump(2) << "\n";
    return rep.ok ? 0 : 2;
}

int cmd_decompose(const RunConfig& rc) {
    Measure mu = require_measure(rc.mu_path, "--mu");
    Measure nu = require_measure(rc.nu_path, "--nu");
    ConvexOrderReport rep = check_convex_order(mu, nu);
    if (!rep.ok) {
        std::cerr << "not in convex order; witness k=" << fmt17(rep.witness_k) << "\n";
        return 2;
    }
    Decomposition dec = irreducible_decompose(mu, nu);
    json out;
    out["components"] = json::array();
    for (const Component& c : dec.components)
        out["components"].push_back({{"a", c.a},
                                     {"b", c.b},
                                     {"u_lo", c.u_lo},
                                     {"u_hi", c.u_hi},
                                     {"mass", c.mu.total_mass()}});
    out["stay"] = json::array();
    for (auto& [lo, hi] : dec.stay_quantiles) out["stay"].push_back({lo, hi});
    out["stay_mass"] = dec.stay.total_mass();
    Sink sink(rc.out_dir, "decompose.json");
    sink.os() << out.dump(2) << "\n";
    return 0;
}

int cmd_curtain(const RunConfig& rc) {
    Measure mu = require_measure(rc.mu_path, "--mu");
    Measure nu = require_measure(rc.nu_path, "--nu");
    if (!check_convex_order(mu, nu).ok)
        throw std::invalid_argument("curtain: pair not in convex order");
    CurtainFns fns(mu, nu, rc.build.curtain);
    double mass = mu.total_mass();
    Sink sink(rc.out_dir, "curtain.csv");
    sink.os() << "u,G,R,S\n";
    for (int i = 0; i < rc.grid; ++i) {
        double u = (i + 0.5) * mass / rc.grid;
        auto [r, s] = fns.RS(u);
        sink.os() << fmt17(u) << "," << fmt17(fns.G(u)) << "," << fmt17(r) << ","
                  << fmt17(s) << "\n";
    }
    return 0;
}

int cmd_shadow(const RunConfig& rc) {
    Measure mu = require_measure(rc.mu_path, "--mu");
    Measure nu = require_measure(rc.nu_path, "--nu");
    double u = rc.u < 0.0 ? mu.total_mass() : rc.u;
    if (!(rc.v >= 0.0) || !(u <= mu.total_mass()) || !(rc.v <= u))
        throw std::invalid_argument("shadow: requires 0 <= v <= u <= mass");
    Measure sh = shadow_measure(mu, nu, rc.v, u, rc.build.curtain.scan.hull);
    Sink sink(rc.out_dir, "shadow.json");
    sink.os() << measure_to_json(sh).dump(2) << "\n";
    return 0;
}

json coupling_to_json(const InjectiveCoupling& c) {
    json parts = json::array();
    for (const CouplingPart& p : c.parts) {
        json jp;
        jp["intervals"] = json::array();
        for (auto& [lo, hi] : p.j) jp["intervals"].push_back({lo, hi});
        jp["identity"] = p.identity;
        if (!p.identity) {
            json br = json::array();
            for (const Branch& b : p.build.branches)
                br.push_back({{"j", b.j},
                              {"anchor", b.anchor},
                              {"ulo", b.ulo},
                              {"uhi", b.uhi},
                              {"samples", b.table.size()}});
            jp["u"] = p.build.u;
            jp["branches"] = std::move(br);
            jp["truncated"] = p.build.truncated;
        }
        parts.push_back(std::move(jp));
    }
    return json{{"mass", c.mass()},
                {"dropped_mass", c.dropped_mass},
                {"parts", std::move(parts)}};
}

int cmd_build(const RunConfig& rc, InjectiveCoupling* keep = nullptr) {
    Measure mu = require_measure(rc.mu_path, "--mu");
    Measure nu = require_measure(rc.nu_path, "--nu");
    ConvexOrderReport rep = check_convex_order(mu, nu);
    if (!rep.ok) {
        std::cerr << "not in convex order; witness k=" << fmt17(rep.witness_k) << "\n";
        return 2;
    }
    log_info("building injective coupling");
    InjectiveCoupling c = build_injective(mu, nu, rc.build);
    {
        Sink sink(rc.out_dir, "coupling.json");
        sink.os() << coupling_to_json(c).dump(2) << "\n";
    }
    {
        Sink sink(rc.out_dir, "coupling.csv");
        sink.os() << "u,x,M,N,wM,wN\n";
        double mass = c.mass();
        for (int i = 0; i < rc.grid; ++i) {
            double u = (i + 0.5) * mass / rc.grid;
            Kernel k = c.kernel_at_mass(u);
            sink.os() << fmt17(u) << "," << fmt17(k.x) << "," << fmt17(k.y1) << ","
                      << fmt17(k.y2) << "," << fmt17(k.w1) << "," << fmt17(k.w2)
                      << "\n";
        }
    }
    if (keep) *keep = std::move(c);
    return 0;
}

int cmd_verify(const RunConfig& rc) {
    Measure mu = require_measure(rc.mu_path, "--mu");
    Measure nu = require_measure(rc.nu_path, "--nu");
    ConvexOrderReport rep = check_convex_order(mu, nu);
    if (!rep.ok) {
        std::cerr << "not in convex order; witness k=" << fmt17(rep.witness_k) << "\n";
        return 2;
    }
    log_info("building and verifying");
    InjectiveCoupling c = build_injective(mu, nu, rc.build);
    VerificationReport vr = verify_coupling(c, std::max(rc.grid, 100), rc.y_grid);
    Sink sink(rc.out_dir, "verify.json");
    sink.os() << report_to_json(vr).dump(2) << "\n";
    return vr.pass() ? 0 : 1;
}

int cmd_reference(const RunConfig& rc) {
    if (std::abs(rc.a) > 1.0)
        throw std::invalid_argument("reference: requires |a| <= 1");
    Sink sink(rc.out_dir, "reference.csv");
    sink.os() << "x,f,h\n";
    for (int i = 0; i <= rc.grid; ++i) {
        double x = -1.0 + 2.0 * i / rc.grid;
        auto [f, h] = hn_reference(rc.a, x);
        sink.os() << fmt17(x) << "," << fmt17(f) << "," << fmt17(h) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"injective martingale coupling toolkit"};
    app.require_subcommand(1);

    RunConfig rc;
    bool grid_set = false, eps_term_set = false;
    int grid_flag = 0;
    double eps_term_flag = 0.0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--mu", rc.mu_path, "path to the initial measure JSON");
        sub->add_option("--nu", rc.nu_path, "path to the target measure JSON");
        sub->add_option("--config", rc.config_path, "JSON config with defaults");
        sub->add_option("--out", rc.out_dir, "output directory (stdout if unset)");
        sub->add_option("--grid", grid_flag, "output/verification grid size")
            ->each([&](const std::string&) { grid_set = true; });
        sub->add_option("--eps-term", eps_term_flag, "relative termination tolerance")
            ->each([&](const std::string&) { eps_term_set = true; });
    };

    CLI::App* check = app.add_subcommand("check", "convex-order verdict");
    CLI::App* decompose = app.add_subcommand("decompose", "irreducible components");
    CLI::App* curtain = app.add_subcommand("curtain", "curtain functions CSV");
    CLI::App* shadow = app.add_subcommand("shadow", "shadow measure of a stratum");
    CLI::App* build = app.add_subcommand("build", "construct the coupling");
    CLI::App* verify = app.add_subcommand("verify", "build and verify");
    CLI::App* reference = app.add_subcommand("reference", "closed-form target pair");
    for (CLI::App* sub : {check, decompose, curtain, shadow, build, verify, reference})
        add_common(sub);
    shadow->add_option("--v", rc.v, "stratum lower mass level");
    shadow->add_option("--u", rc.u, "stratum upper mass level");
    reference->add_option("--a", rc.a, "family parameter in [-1,1]");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        apply_config_file(rc);
        if (grid_set) rc.grid = grid_flag;          // flags win over config
        if (eps_term_set) rc.build.eps_term_rel = eps_term_flag;
        if (rc.grid < 1) throw std::invalid_argument("--grid must be >= 1");

        if (check->parsed()) return cmd_check(rc);
        if (decompose->parsed()) return cmd_decompose(rc);
        if (curtain->parsed()) return cmd_curtain(rc);
        if (shadow->parsed()) return cmd_shadow(rc);
        if (build->parsed()) return cmd_build(rc);
        if (verify->parsed()) return cmd_verify(rc);
        if (reference->parsed()) return cmd_reference(rc);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
