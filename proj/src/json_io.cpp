#include "coupling/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace coupling {

namespace {

using nlohmann::json;

double finite_number(const json& j, const std::string& where) {
    if (!j.is_number())
        throw std::invalid_argument(where + ": expected a number");
    double v = j.get<double>();
    if (!std::isfinite(v))
        throw std::invalid_argument(where + ": value must be finite");
    return v;
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    for (auto& [key, val] : j.items()) {
        (void)val;
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok)
            throw std::invalid_argument(where + ": unknown field \"" + key + "\"");
    }
}

}  // namespace

Measure measure_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw std::invalid_argument("measure spec: expected an object");
    reject_unknown(j, {"atoms", "pieces"}, "measure spec");

    std::vector<Atom> atoms;
    if (j.contains("atoms")) {
        const json& ja = j.at("atoms");
        if (!ja.is_array())
            throw std::invalid_argument("measure spec: \"atoms\" must be an array");
        for (size_t i = 0; i < ja.size(); ++i) {
            std::string where = "atoms[" + std::to_string(i) + "]";
            const json& e = ja[i];
            if (!e.is_object()) throw std::invalid_argument(where + ": expected object");
            reject_unknown(e, {"x", "mass"}, where);
            Atom a;
            a.x = finite_number(e.at("x"), where + ".x");
            a.mass = finite_number(e.at("mass"), where + ".mass");
            if (!(a.mass > 0.0))
                throw std::invalid_argument(where + ": mass must be positive");
            atoms.push_back(a);
        }
    }
    std::vector<Piece> pieces;
    if (j.contains("pieces")) {
        const json& jp = j.at("pieces");
        if (!jp.is_array())
            throw std::invalid_argument("measure spec: \"pieces\" must be an array");
        for (size_t i = 0; i < jp.size(); ++i) {
            std::string where = "pieces[" + std::to_string(i) + "]";
            const json& e = jp[i];
            if (!e.is_object()) throw std::invalid_argument(where + ": expected object");
            reject_unknown(e, {"left", "right", "mass"}, where);
            Piece p;
            p.left = finite_number(e.at("left"), where + ".left");
            p.right = finite_number(e.at("right"), where + ".right");
            p.mass = finite_number(e.at("mass"), where + ".mass");
            if (!(p.left < p.right))
                throw std::invalid_argument(where + ": requires left < right");
            if (!(p.mass > 0.0))
                throw std::invalid_argument(where + ": mass must be positive");
            pieces.push_back(p);
        }
    }
    return Measure(std::move(atoms), std::move(pieces));
}

nlohmann::json measure_to_json(const Measure& m) {
    json out = json::object();
    json atoms = json::array();
    for (const Atom& a : m.atoms()) atoms.push_back({{"x", a.x}, {"mass", a.mass}});
    json pieces = json::array();
    for (const Piece& p : m.as_pieces())
        pieces.push_back({{"left", p.left}, {"right", p.right}, {"mass", p.mass}});
    out["atoms"] = std::move(atoms);
    out["pieces"] = std::move(pieces);
    return out;
}

Measure load_measure(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open measure file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
    return measure_from_json(j);
}

void save_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(2) << "\n";
}

nlohmann::json report_to_json(const VerificationReport& r) {
    return nlohmann::json{
        {"kolmogorov_mu", r.marginals.kolmogorov_mu},
        {"kolmogorov_nu", r.marginals.kolmogorov_nu},
        {"martingale_residual", r.martingale_residual},
        {"monotonicity_violations", r.injectivity.monotonicity_violations},
        {"certificate", r.injectivity.certificate},
        {"max_multiplicity", r.injectivity.max_multiplicity},
        {"bad_buckets", r.injectivity.bad_buckets},
        {"buckets", r.injectivity.buckets},
        {"injective", r.injectivity.injective},
        {"dropped_mass", r.dropped_mass},
        {"grid_n", r.grid_n},
        {"pass", r.pass()},
    };
}

nlohmann::json order_report_to_json(const ConvexOrderReport& r) {
    return nlohmann::json{
        {"ok", r.ok},           {"mass_ok", r.mass_ok},
        {"mean_ok", r.mean_ok}, {"min_ok", r.min_ok},
        {"mass_gap", r.mass_gap}, {"mean_gap", r.mean_gap},
        {"min_value", r.min_value}, {"witness_k", r.witness_k},
    };
}

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace coupling
