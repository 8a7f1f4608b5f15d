#ifndef STCPG_COST_MODEL_HPP
#define STCPG_COST_MODEL_HPP

#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "stcpg/core.hpp"
#include "stcpg/ontology.hpp"
#include "stcpg/parse_graph.hpp"

namespace stcpg {

// Category-keyed energy table. Lookup falls back to "default". Nodes key by
// their top-level category (Object / Event / Fluent); edges by "Relation".
struct CategoryEnergies {
    std::map<std::string, double> values;

    double get(const std::string& category) const {
        auto it = values.find(category);
        if (it != values.end()) return it->second;
        it = values.find("default");
        return it != values.end() ? it->second : 0.0;
    }

    void scale_all_to(double v) {
        for (auto& [_, e] : values) e = v;
        values["default"] = v;
    }
};

// All tunable constants of the channel model, the combined distance and the
// search. Loaded from a flat key = value config file or JSON.
struct CostModel {
    CategoryEnergies alpha_v;         // element seen by video only
    CategoryEnergies alpha_txt_incl;  // element seen by text only
    CategoryEnergies alpha_vt;        // element seen by both channels
    CategoryEnergies alpha_phi;       // element seen by neither (deduced)
    double alpha_psi = 2.0;           // channel element absent from the joint graph

    double w_o = 1.0;   // semantic distance weight
    double w_t = 0.1;   // temporal distance weight, per second
    double w_s = 0.05;  // spatial distance weight, per unit

    double match_threshold = 0.5;
    double entropy_c = 2.0;  // deduction stop constant, > 1

    double missing_part_energy = 2.0;
    double unexplained_penalty = 1.0;
    double beam_energy = 6.0;  // <= 0 disables beam pruning
    double spatial_prune = 6.0;
    double causal_window = 10.0;
    double prune_margin = 4.0;
    int deduction_limit = 2;
    int max_scene_states = 256;

    static CostModel defaults() {
        CostModel c;
        c.alpha_v.values = {{"Event", 0.5}, {"Fluent", 0.5}, {"default", 0.8}};
        c.alpha_txt_incl.values = {{"Relation", 0.5}, {"Fluent", 0.5}, {"default", 0.8}};
        c.alpha_vt.values = {{"Event", 0.2}, {"Object", 0.2}, {"default", 0.3}};
        c.alpha_phi.values = {{"Fluent", 0.4}, {"Relation", 0.3}, {"default", 1.5}};
        return c;
    }

    void set_key(const std::string& key, const std::string& raw);
    static CostModel load_file(const std::string& path);
};

inline std::string element_category(const Ontology& o, const PgNode& n) {
    if (!o.has_concept(n.concept)) return "default";
    std::string cat = o.top_category(n.concept);
    return cat.empty() ? "default" : cat;
}

inline std::string element_category(const PgEdge&) { return "Relation"; }

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    std::size_t b = s.find_last_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

}  // namespace detail

inline void CostModel::set_key(const std::string& key, const std::string& raw) {
    std::string value = detail::trim(raw);
    if (!value.empty() && value.front() == '"' && value.back() == '"' && value.size() >= 2)
        value = value.substr(1, value.size() - 2);
    auto num = [&] { return std::stod(value); };

    auto dotted = key.find('.');
    if (dotted != std::string::npos) {
        std::string base = key.substr(0, dotted);
        std::string cat = key.substr(dotted + 1);
        CategoryEnergies* table = nullptr;
        if (base == "alpha_v") table = &alpha_v;
        else if (base == "alpha_txt_incl") table = &alpha_txt_incl;
        else if (base == "alpha_vt") table = &alpha_vt;
        else if (base == "alpha_phi") table = &alpha_phi;
        if (!table) throw ParseError("unknown config key '" + key + "'");
        table->values[cat] = num();
        return;
    }
    if (key == "alpha_psi") alpha_psi = num();
    else if (key == "w_o") w_o = num();
    else if (key == "w_t") w_t = num();
    else if (key == "w_s") w_s = num();
    else if (key == "match_threshold") match_threshold = num();
    else if (key == "entropy_c") {
        entropy_c = num();
        if (entropy_c <= 1.0) throw ParseError("entropy_c must be > 1");
    } else if (key == "missing_part_energy") missing_part_energy = num();
    else if (key == "unexplained_penalty") unexplained_penalty = num();
    else if (key == "beam_energy") beam_energy = num();
    else if (key == "spatial_prune") spatial_prune = num();
    else if (key == "causal_window") causal_window = num();
    else if (key == "prune_margin") prune_margin = num();
    else if (key == "deduction_limit") deduction_limit = static_cast<int>(num());
    else if (key == "max_scene_states") max_scene_states = static_cast<int>(num());
    else if (key == "alpha_v" || key == "alpha_txt_incl" || key == "alpha_vt" ||
             key == "alpha_phi") {
        // Scalar form overrides every category.
        CategoryEnergies* table = key == "alpha_v"          ? &alpha_v
                                  : key == "alpha_txt_incl" ? &alpha_txt_incl
                                  : key == "alpha_vt"       ? &alpha_vt
                                                            : &alpha_phi;
        table->scale_all_to(num());
    } else {
        throw ParseError("unknown config key '" + key + "'");
    }
}

inline CostModel CostModel::load_file(const std::string& path) {
    CostModel c = defaults();
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file " + path);
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("config json: ") + e.what());
        }
        std::function<void(const std::string&, const nlohmann::json&)> walk =
            [&](const std::string& prefix, const nlohmann::json& v) {
                if (v.is_object()) {
                    for (const auto& [k, sub] : v.items())
                        walk(prefix.empty() ? k : prefix + "." + k, sub);
                } else {
                    c.set_key(prefix, v.dump());
                }
            };
        walk("", doc);
        return c;
    }
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected key = value");
        c.set_key(detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return c;
}

}  // namespace stcpg

#endif  // STCPG_COST_MODEL_HPP
