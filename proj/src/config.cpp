#include "consub/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "consub/hashing.hpp"

namespace consub {

namespace {

using Json = nlohmann::ordered_json;

void reject_unknown_keys(const Json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key \"" + it.key() + "\" in " + where);
    }
}

double get_number(const Json& obj, const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) throw ConfigError("config: " + key + " must be a number");
    return obj[key].get<double>();
}

long get_integer(const Json& obj, const std::string& key, long fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer()) throw ConfigError("config: " + key + " must be an integer");
    return obj[key].get<long>();
}

Vec get_vector(const Json& node, const std::string& where) {
    if (!node.is_array()) throw ConfigError("config: " + where + " must be an array");
    Vec v(node.size());
    Index k = 0;
    for (const auto& item : node) {
        if (!item.is_number()) throw ConfigError("config: " + where + " entries must be numbers");
        v[k++] = item.get<double>();
    }
    return v;
}

Mat get_matrix(const Json& node, const std::string& where) {
    if (!node.is_array() || node.empty())
        throw ConfigError("config: " + where + " must be a non-empty array of rows");
    const std::size_t rows = node.size();
    std::size_t cols = 0;
    Mat m;
    std::size_t r = 0;
    for (const auto& row : node) {
        const Vec v = get_vector(row, where + " row");
        if (r == 0) {
            cols = static_cast<std::size_t>(v.size());
            m = Mat(rows, cols);
        } else if (static_cast<std::size_t>(v.size()) != cols) {
            throw ConfigError("config: " + where + " rows have inconsistent lengths");
        }
        m.row(static_cast<Index>(r++)) = v.transpose();
    }
    return m;
}

IntegratorConfig parse_integrator(const Json& obj, const std::string& where,
                                  const IntegratorConfig& defaults) {
    reject_unknown_keys(obj, where,
                        {"method", "step", "abs_tol", "rel_tol", "t_end", "max_steps", "samples",
                         "max_step"});
    IntegratorConfig cfg = defaults;
    if (obj.contains("method")) {
        if (!obj["method"].is_string()) throw ConfigError("config: method must be a string");
        try {
            cfg.method = method_from_string(obj["method"].get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    cfg.step = get_number(obj, "step", cfg.step);
    cfg.abs_tol = get_number(obj, "abs_tol", cfg.abs_tol);
    cfg.rel_tol = get_number(obj, "rel_tol", cfg.rel_tol);
    cfg.t_end = get_number(obj, "t_end", cfg.t_end);
    cfg.max_steps = get_integer(obj, "max_steps", cfg.max_steps);
    cfg.samples = static_cast<int>(get_integer(obj, "samples", cfg.samples));
    cfg.max_step = get_number(obj, "max_step", cfg.max_step);
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + where + ": " + e.what());
    }
    return cfg;
}

Json matrix_to_json(const Mat& m) {
    Json rows = Json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

Json vector_to_json(const Vec& v) {
    Json out = Json::array();
    for (Index k = 0; k < v.size(); ++k) out.push_back(v[k]);
    return out;
}

} // namespace

SystemDefinition RunConfig::build_system() const {
    if (family == "drag-1d") {
        if (!(c > 0.0)) throw ConfigError("config: drag-1d requires c > 0");
        return SystemDefinition::linear(Mat::Constant(1, 1, c), Mat::Zero(1, 1));
    }
    if (family == "coupled-2d") {
        Mat C(2, 2);
        C << 1.0, -1.0, -1.0, 1.0;
        return SystemDefinition::linear(C, Mat::Zero(2, 2));
    }
    if (family == "damped-oscillator") {
        if (eta < 0.0 || !(omega > 0.0))
            throw ConfigError("config: damped-oscillator requires eta >= 0 and omega > 0");
        return SystemDefinition::linear(Mat::Constant(1, 1, 2.0 * eta),
                                        Mat::Constant(1, 1, omega * omega));
    }
    if (family == "linear-ndim") {
        if (damping.size() == 0 || stiffness.size() == 0)
            throw ConfigError("config: linear-ndim requires damping and stiffness matrices");
        try {
            if (mass.size() != 0) return SystemDefinition::linear(mass, damping, stiffness);
            return SystemDefinition::linear(damping, stiffness);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    throw ConfigError("config: unknown system family \"" + family + "\"");
}

State RunConfig::initial_state(const SystemDefinition& sys) const {
    if (ic_q.size() != sys.dim() || ic_qdot.size() != sys.dim())
        throw ConfigError("config: ic must hold 2n values (q then qdot)");
    State s;
    s.t = 0.0;
    s.q = ic_q;
    s.p = sys.momentum_of(ic_qdot);
    return s;
}

std::string RunConfig::canonical_json() const {
    Json j;
    j["family"] = family;
    j["c"] = c;
    j["eta"] = eta;
    j["omega"] = omega;
    j["mass"] = matrix_to_json(mass);
    j["damping"] = matrix_to_json(damping);
    j["stiffness"] = matrix_to_json(stiffness);
    j["ic_q"] = vector_to_json(ic_q);
    j["ic_qdot"] = vector_to_json(ic_qdot);
    auto integ = [](const IntegratorConfig& cfg) {
        Json o;
        o["method"] = to_string(cfg.method);
        o["step"] = cfg.step;
        o["abs_tol"] = cfg.abs_tol;
        o["rel_tol"] = cfg.rel_tol;
        o["t_end"] = cfg.t_end;
        o["max_steps"] = cfg.max_steps;
        o["samples"] = cfg.samples;
        o["max_step"] = cfg.max_step;
        return o;
    };
    j["integrator"] = integ(integrator);
    j["substitute_integrator"] = integ(substitute_integrator);
    j["thresholds"] = {{"eps_turn", thresholds.eps_turn},
                       {"eps_div", thresholds.eps_div},
                       {"branch_nodes", thresholds.branch_nodes},
                       {"pad_rel", thresholds.pad_rel}};
    j["tolerances"] = {{"coincidence", tolerances.coincidence},
                       {"constancy", tolerances.constancy},
                       {"gradient", tolerances.gradient},
                       {"volume", tolerances.volume},
                       {"divergence", tolerances.divergence},
                       {"restriction", tolerances.restriction},
                       {"energy_rate", tolerances.energy_rate},
                       {"identity", tolerances.identity}};
    j["seed"] = seed;
    return j.dump();
}

std::string RunConfig::digest() const {
    const std::string text = canonical_json();
    return hex_digest(fnv1a(text.data(), text.size()));
}

RunConfig parse_config_text(const std::string& text, bool strict) {
    Json root;
    try {
        root = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");

    reject_unknown_keys(root, "top level",
                        {"system", "ic", "integrator", "substitute_integrator", "thresholds",
                         "tolerances", "outputs", "seed"});
    if (strict) {
        for (const char* key : {"system", "ic", "integrator", "substitute_integrator",
                                "thresholds", "tolerances", "outputs", "seed"}) {
            if (!root.contains(key))
                throw ConfigError(std::string("config (strict): missing section \"") + key + "\"");
        }
    }

    RunConfig cfg;
    cfg.integrator.method = Method::Rk45Adaptive;
    cfg.integrator.abs_tol = 1e-12;
    cfg.integrator.rel_tol = 1e-10;
    cfg.integrator.t_end = 5.0;
    cfg.integrator.samples = 2001;
    cfg.substitute_integrator.method = Method::StormerVerlet;
    cfg.substitute_integrator.step = 5e-6;
    cfg.substitute_integrator.t_end = 5.0;
    cfg.substitute_integrator.samples = 2001;

    if (!root.contains("system") || !root["system"].is_object())
        throw ConfigError("config: missing system section");
    {
        const Json& sys = root["system"];
        reject_unknown_keys(sys, "system",
                            {"family", "c", "eta", "omega", "mass", "damping", "stiffness"});
        if (!sys.contains("family") || !sys["family"].is_string())
            throw ConfigError("config: system.family is required");
        cfg.family = sys["family"].get<std::string>();
        cfg.c = get_number(sys, "c", cfg.c);
        cfg.eta = get_number(sys, "eta", cfg.eta);
        cfg.omega = get_number(sys, "omega", cfg.omega);
        if (sys.contains("mass")) cfg.mass = get_matrix(sys["mass"], "system.mass");
        if (sys.contains("damping")) cfg.damping = get_matrix(sys["damping"], "system.damping");
        if (sys.contains("stiffness"))
            cfg.stiffness = get_matrix(sys["stiffness"], "system.stiffness");
    }

    if (!root.contains("ic")) throw ConfigError("config: missing ic section");
    {
        const Vec full = get_vector(root["ic"], "ic");
        if (full.size() % 2 != 0 || full.size() == 0)
            throw ConfigError("config: ic must hold 2n values (q then qdot)");
        const Index n = full.size() / 2;
        cfg.ic_q = full.head(n);
        cfg.ic_qdot = full.tail(n);
    }

    if (root.contains("integrator"))
        cfg.integrator = parse_integrator(root["integrator"], "integrator", cfg.integrator);
    if (root.contains("substitute_integrator"))
        cfg.substitute_integrator = parse_integrator(
            root["substitute_integrator"], "substitute_integrator", cfg.substitute_integrator);
    if (is_symplectic(cfg.integrator.method))
        throw ConfigError("config: integrator.method must be rk4-fixed or rk45-adaptive");
    if (!is_symplectic(cfg.substitute_integrator.method))
        throw ConfigError(
            "config: substitute_integrator.method must be stormer-verlet or implicit-midpoint");

    if (root.contains("thresholds")) {
        const Json& t = root["thresholds"];
        reject_unknown_keys(t, "thresholds", {"eps_turn", "eps_div", "branch_nodes", "pad_rel"});
        cfg.thresholds.eps_turn = get_number(t, "eps_turn", cfg.thresholds.eps_turn);
        cfg.thresholds.eps_div = get_number(t, "eps_div", cfg.thresholds.eps_div);
        cfg.thresholds.branch_nodes =
            static_cast<int>(get_integer(t, "branch_nodes", cfg.thresholds.branch_nodes));
        cfg.thresholds.pad_rel = get_number(t, "pad_rel", cfg.thresholds.pad_rel);
    }

    if (root.contains("tolerances")) {
        const Json& t = root["tolerances"];
        reject_unknown_keys(t, "tolerances",
                            {"coincidence", "constancy", "gradient", "volume", "divergence",
                             "restriction", "energy_rate", "identity"});
        cfg.tolerances.coincidence = get_number(t, "coincidence", cfg.tolerances.coincidence);
        cfg.tolerances.constancy = get_number(t, "constancy", cfg.tolerances.constancy);
        cfg.tolerances.gradient = get_number(t, "gradient", cfg.tolerances.gradient);
        cfg.tolerances.volume = get_number(t, "volume", cfg.tolerances.volume);
        cfg.tolerances.divergence = get_number(t, "divergence", cfg.tolerances.divergence);
        cfg.tolerances.restriction = get_number(t, "restriction", cfg.tolerances.restriction);
        cfg.tolerances.energy_rate = get_number(t, "energy_rate", cfg.tolerances.energy_rate);
        cfg.tolerances.identity = get_number(t, "identity", cfg.tolerances.identity);
    }

    if (root.contains("outputs")) {
        const Json& o = root["outputs"];
        reject_unknown_keys(o, "outputs", {"directory", "artifacts"});
        if (o.contains("directory")) {
            if (!o["directory"].is_string())
                throw ConfigError("config: outputs.directory must be a string");
            cfg.outputs.directory = o["directory"].get<std::string>();
        }
        if (o.contains("artifacts")) {
            if (!o["artifacts"].is_array())
                throw ConfigError("config: outputs.artifacts must be an array");
            cfg.outputs.artifacts.clear();
            for (const auto& a : o["artifacts"]) {
                if (!a.is_string())
                    throw ConfigError("config: outputs.artifacts entries must be strings");
                const std::string name = a.get<std::string>();
                if (name != "trajectory" && name != "reconstruction" && name != "report" &&
                    name != "plots")
                    throw ConfigError("config: unknown artifact \"" + name + "\"");
                cfg.outputs.artifacts.push_back(name);
            }
        }
    }

    cfg.seed = static_cast<unsigned>(get_integer(root, "seed", 0));

    // Family-level invariants are part of parsing: a config that cannot run
    // is rejected here, not deep inside the pipeline.
    const SystemDefinition sys = cfg.build_system();
    if (cfg.ic_q.size() != sys.dim())
        throw ConfigError("config: ic dimension does not match the system family");
    if (cfg.family == "coupled-2d" && std::abs(cfg.ic_qdot.sum()) > 1e-12)
        throw ConfigError("config: coupled-2d requires x'0 + y'0 = 0");
    return cfg;
}

RunConfig parse_config_file(const std::string& path, bool strict) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open \"" + path + "\"");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), strict);
}

} // namespace consub
