#ifndef STCPG_AOG_HPP
#define STCPG_AOG_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stcpg/core.hpp"
#include "stcpg/ontology.hpp"
#include "stcpg/parse_graph.hpp"

namespace stcpg {

enum class AogKind { And, Or, Leaf };

enum class TemporalConstraint { none, precedes, meets, overlaps, during, equal };

inline TemporalConstraint temporal_constraint_from_string(const std::string& s) {
    if (s == "precedes") return TemporalConstraint::precedes;
    if (s == "meets") return TemporalConstraint::meets;
    if (s == "overlaps") return TemporalConstraint::overlaps;
    if (s == "during") return TemporalConstraint::during;
    if (s == "equal") return TemporalConstraint::equal;
    if (s.empty() || s == "none") return TemporalConstraint::none;
    throw ParseError("unknown temporal constraint '" + s + "'");
}

// "a precedes b" accepts a ending exactly when b starts; "meets" requires it.
inline bool temporal_constraint_holds(TemporalConstraint c, const SpatioTemporal& a,
                                      const SpatioTemporal& b) {
    constexpr double eps = 1e-6;
    if (c == TemporalConstraint::none) return true;
    if (!a.has_time() || !b.has_time()) return true;  // unannotated: nothing to check
    double a0 = a.t0 ? *a.t0 : *a.t1, a1 = a.t1 ? *a.t1 : *a.t0;
    double b0 = b.t0 ? *b.t0 : *b.t1, b1 = b.t1 ? *b.t1 : *b.t0;
    switch (c) {
        case TemporalConstraint::precedes: return a1 <= b0 + eps;
        case TemporalConstraint::meets: return std::fabs(a1 - b0) < eps;
        case TemporalConstraint::overlaps: return a0 <= b0 + eps && b0 <= a1 + eps && a1 <= b1 + eps;
        case TemporalConstraint::during: return b0 <= a0 + eps && a1 <= b1 + eps;
        case TemporalConstraint::equal:
            return std::fabs(a0 - b0) < eps && std::fabs(a1 - b1) < eps;
        default: return true;
    }
}

// Relation between two child slots of an And-node.
struct RelationSpec {
    std::string relation;
    int from = -1;
    int to = -1;
    double energy = 0.0;
    TemporalConstraint constraint = TemporalConstraint::none;
};

// Relation linking concepts across the S/T/C dimensions (Agent, Patient,
// Location, Trigger, Causal, HasFluent links).
struct CrossSpec {
    std::string relation;
    std::string from;  // concept
    std::string to;    // concept
    double energy = 0.0;
    int mandatory = 0;  // 0 none, 1 every from-instance needs it, 2 every to-instance
};

struct AogNode {
    std::string id;
    AogKind kind = AogKind::Leaf;
    std::string concept;
    char dim = 'T';  // 'S', 'T' or 'C'
    std::vector<std::string> children;
    std::vector<double> branch_energies;  // Or-nodes, one per child, min-shifted to 0
    std::vector<RelationSpec> relations;  // And-nodes
    std::string detector;                 // leaves
};

struct Violation {
    std::string kind;  // OrConflict | RelationConflict | ZeroProb
    std::string node;
    std::optional<PgEdge> edge;
    std::vector<std::string> parts;
    std::vector<std::string> retype_candidates;
    std::string detail;
};

struct EnergyBreakdown {
    double e_s = 0.0;
    double e_t = 0.0;
    double e_c = 0.0;
    double e_cross = 0.0;
    double missing_penalty = 0.0;
    double total = 0.0;

    void finish() { total = e_s + e_t + e_c + e_cross + missing_penalty; }
};

// Grammar-implied context of one concept occurrence, ready for grafting onto
// an existing node. The fragment contains a placeholder node "@anchor".
struct DeductionTemplate {
    ParseGraph fragment;
    std::string anchor_id = "@anchor";
    double energy = 0.0;
    std::string signature;
};

// A head realization reachable from a node through Or choices only.
struct OrChainHead {
    std::string head;    // And or leaf node id
    double chain = 0.0;  // summed branch energies along the way
    std::vector<std::pair<std::string, std::size_t>> choices;  // (or id, branch index)
};

struct Occurrence {
    std::string and_id;
    std::size_t slot = 0;
    double chain = 0.0;  // energy of selecting this head from the slot's child
};

// Cheapest grammar account of a maximal node: either an Or-chain from a root
// (chain only) or a missing parent And with its sibling slots (penalties).
struct AnchorContext {
    double chain = 0.0;
    int missing = 0;
    char dim = 'T';
    bool found = false;
};

namespace detail {
inline constexpr double kViolationEnergy = 50.0;  // lenient score per hard violation
}

class StcAog {
public:
    double missing_part_energy = 2.0;

    static StcAog load(const nlohmann::json& doc, const Ontology& o);
    static StcAog load_file(const std::string& path, const Ontology& o);

    const Ontology& ontology() const { return ontology_; }
    const std::map<std::string, AogNode>& nodes() const { return nodes_; }
    const AogNode& node(const std::string& id) const {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) throw UnknownConcept("grammar node " + id);
        return it->second;
    }
    bool has_node(const std::string& id) const { return nodes_.count(id) > 0; }
    const std::vector<std::string>& roots() const { return roots_; }
    const std::vector<CrossSpec>& cross_relations() const { return cross_; }

    bool has_concept(const std::string& concept) const {
        return canonical_.count(concept) > 0;
    }

    // Topmost grammar node carrying the concept (an Or above its branches, or
    // the sole node). Empty string when the grammar does not mention it.
    std::string canonical(const std::string& concept) const {
        auto it = canonical_.find(concept);
        return it == canonical_.end() ? "" : it->second;
    }

    // Heads (And/leaf nodes) reachable from `id` through Or selections only,
    // with accumulated branch energies.
    const std::vector<OrChainHead>& or_closure(const std::string& id) const {
        return or_closure_.at(id);
    }

    // (And node, slot) positions whose slot can be realized by `id`.
    std::vector<Occurrence> occurrences(const std::string& id) const {
        auto it = occurrences_.find(id);
        return it == occurrences_.end() ? std::vector<Occurrence>{} : it->second;
    }

    // Minimal Or-branch energy spent reaching `id` from some root through Or
    // selections only; nullopt when unreachable that way.
    std::optional<double> above_chain(const std::string& id) const {
        auto it = above_chain_.find(id);
        if (it == above_chain_.end()) return std::nullopt;
        return it->second;
    }

    std::vector<Violation> validate_pg(const ParseGraph& pg) const {
        EnergyBreakdown bd;
        std::vector<Violation> v;
        score(pg, &bd, &v);
        return v;
    }

    EnergyBreakdown energy_of(const ParseGraph& pg) const {
        EnergyBreakdown bd;
        std::vector<Violation> v;
        score(pg, &bd, &v);
        if (!v.empty())
            throw InvalidParse(v.front().kind + " at " +
                               (v.front().node.empty() && v.front().edge
                                    ? v.front().edge->key()
                                    : v.front().node));
        return bd;
    }

    // Search-friendly scoring: hard violations add a flat energy instead of
    // throwing. Returns the total.
    double energy_lenient(const ParseGraph& pg, EnergyBreakdown* bd_out = nullptr,
                          std::vector<Violation>* v_out = nullptr) const {
        EnergyBreakdown bd;
        std::vector<Violation> v;
        score(pg, &bd, &v);
        double total = bd.total + detail::kViolationEnergy * static_cast<double>(v.size());
        if (bd_out) *bd_out = bd;
        if (v_out) *v_out = v;
        return total;
    }

    std::vector<double> prior_prob(const std::vector<ParseGraph>& pgs) const {
        if (pgs.empty()) throw InvalidParse("prior over empty candidate set");
        std::vector<double> energies;
        for (const auto& pg : pgs) energies.push_back(energy_of(pg).total);
        double lo = *std::min_element(energies.begin(), energies.end());
        double z = 0.0;
        for (double e : energies) z += std::exp(lo - e);
        std::vector<double> probs;
        for (double e : energies) probs.push_back(std::exp(lo - e) / z);
        return probs;
    }

    ParseGraph sample(std::uint64_t seed) const;

    std::vector<DeductionTemplate> context_subgraph(const std::string& concept) const;

    AnchorContext anchor_context(const std::string& concept) const;

private:
    void score(const ParseGraph& pg, EnergyBreakdown* bd, std::vector<Violation>* viol) const;

    struct ResolveResult {
        bool feasible = false;
        double energy = 0.0;
        int missing = 0;
        std::vector<Violation> hard;
    };

    ResolveResult resolve(const ParseGraph& pg, const std::string& pg_node,
                          const std::string& g_node,
                          const std::map<std::string, std::vector<std::string>>& parts_of) const;
    ResolveResult resolve_and(const ParseGraph& pg, const std::string& pg_node,
                              const AogNode& a,
                              const std::map<std::string, std::vector<std::string>>& parts_of) const;

    std::string entry_node_for(const std::string& concept) const;

    void add_dim(EnergyBreakdown* bd, char dim, double e) const {
        if (dim == 'S') bd->e_s += e;
        else if (dim == 'C') bd->e_c += e;
        else bd->e_t += e;
    }

    Ontology ontology_;
    std::map<std::string, AogNode> nodes_;
    std::vector<std::string> roots_;
    std::vector<CrossSpec> cross_;
    std::map<std::string, std::string> canonical_;  // concept -> node id
    std::map<std::string, std::vector<OrChainHead>> or_closure_;
    std::map<std::string, std::vector<Occurrence>> occurrences_;
    std::map<std::string, double> above_chain_;  // node id -> min Or-chain energy from a root
};

// ---------------------------------------------------------------------------
// Loading

inline StcAog StcAog::load(const nlohmann::json& doc, const Ontology& o) {
    StcAog g;
    g.ontology_ = o;
    if (!doc.is_object() || !doc.contains("dimension_nodes"))
        throw ParseError("grammar document needs 'dimension_nodes'");
    g.missing_part_energy = doc.value("missing_part_energy", 2.0);

    for (const auto& jn : doc.at("dimension_nodes")) {
        AogNode n;
        n.id = jn.at("id").get<std::string>();
        if (g.nodes_.count(n.id)) throw ParseError("duplicate grammar node '" + n.id + "'");
        std::string kind = jn.at("kind").get<std::string>();
        if (kind == "and") n.kind = AogKind::And;
        else if (kind == "or") n.kind = AogKind::Or;
        else if (kind == "leaf") n.kind = AogKind::Leaf;
        else throw ParseError("node '" + n.id + "' has unknown kind '" + kind + "'");
        n.concept = jn.at("concept").get<std::string>();
        if (!o.has_concept(n.concept)) throw UnknownConcept(n.concept);
        std::string dim = jn.value("dim", "T");
        if (dim != "S" && dim != "T" && dim != "C")
            throw ParseError("node '" + n.id + "' has unknown dim '" + dim + "'");
        n.dim = dim[0];
        if (jn.contains("children"))
            for (const auto& c : jn.at("children")) n.children.push_back(c.get<std::string>());
        if (jn.contains("branch_energies"))
            for (const auto& e : jn.at("branch_energies")) n.branch_energies.push_back(e.get<double>());
        if (jn.contains("relations")) {
            for (const auto& jr : jn.at("relations")) {
                RelationSpec r;
                r.relation = jr.at("rel").get<std::string>();
                if (!o.has_relation(r.relation)) throw UnknownConcept("relation " + r.relation);
                r.from = jr.at("from").get<int>();
                r.to = jr.at("to").get<int>();
                r.energy = jr.value("energy", 0.0);
                if (r.energy < 0.0 || !std::isfinite(r.energy))
                    throw ParseError("relation energy must be finite and >= 0 on '" + n.id + "'");
                r.constraint = temporal_constraint_from_string(jr.value("constraint", ""));
                n.relations.push_back(r);
            }
        }
        n.detector = jn.value("detector", "");
        if (n.kind == AogKind::Leaf && !n.children.empty())
            throw ParseError("leaf '" + n.id + "' has children");
        if (n.kind == AogKind::Or && n.branch_energies.size() != n.children.size())
            throw ParseError("or-node '" + n.id + "' branch_energies/children mismatch");
        g.nodes_[n.id] = n;
    }

    for (auto& [id, n] : g.nodes_) {
        for (const auto& c : n.children)
            if (!g.nodes_.count(c))
                throw ParseError("node '" + id + "' references unknown child '" + c + "'");
        for (const auto& r : n.relations)
            if (r.from < 0 || r.to < 0 || r.from >= static_cast<int>(n.children.size()) ||
                r.to >= static_cast<int>(n.children.size()))
                throw ParseError("relation slot out of range on '" + id + "'");
        // Shift Or branch energies so the preferred branch sits at 0.
        if (n.kind == AogKind::Or && !n.branch_energies.empty()) {
            double lo = *std::min_element(n.branch_energies.begin(), n.branch_energies.end());
            for (auto& e : n.branch_energies) e -= lo;
        }
    }

    // Acyclicity.
    {
        std::map<std::string, int> state;
        std::function<void(const std::string&)> visit = [&](const std::string& id) {
            auto st = state.find(id);
            if (st != state.end() && st->second == 1) throw CyclicGrammar("involving '" + id + "'");
            if (st != state.end() && st->second == 2) return;
            state[id] = 1;
            for (const auto& c : g.nodes_.at(id).children) visit(c);
            state[id] = 2;
        };
        for (const auto& [id, _] : g.nodes_) visit(id);
    }

    if (doc.contains("cross_relations")) {
        for (const auto& jc : doc.at("cross_relations")) {
            CrossSpec c;
            c.relation = jc.at("rel").get<std::string>();
            if (!o.has_relation(c.relation)) throw UnknownConcept("relation " + c.relation);
            c.from = jc.at("from").get<std::string>();
            c.to = jc.at("to").get<std::string>();
            if (!o.has_concept(c.from)) throw UnknownConcept(c.from);
            if (!o.has_concept(c.to)) throw UnknownConcept(c.to);
            c.energy = jc.value("energy", 0.0);
            if (c.energy < 0.0 || !std::isfinite(c.energy))
                throw ParseError("cross relation energy must be finite and >= 0");
            std::string m = jc.value("mandatory_for", "");
            c.mandatory = m == "from" ? 1 : m == "to" ? 2 : 0;
            g.cross_.push_back(c);
        }
    }

    if (doc.contains("roots"))
        for (const auto& r : doc.at("roots")) {
            std::string id = r.get<std::string>();
            if (!g.nodes_.count(id)) throw ParseError("unknown root '" + id + "'");
            g.roots_.push_back(id);
        }
    if (g.roots_.empty() && !g.nodes_.empty()) {
        // Parentless nodes act as roots.
        std::set<std::string> referenced;
        for (const auto& [_, n] : g.nodes_)
            for (const auto& c : n.children) referenced.insert(c);
        for (const auto& [id, _] : g.nodes_)
            if (!referenced.count(id)) g.roots_.push_back(id);
    }

    // Canonical node per concept: one not referenced by a same-concept parent.
    {
        std::set<std::string> shadowed;
        for (const auto& [id, n] : g.nodes_)
            for (const auto& c : n.children)
                if (g.nodes_.at(c).concept == n.concept) shadowed.insert(c);
        for (const auto& [id, n] : g.nodes_) {
            if (shadowed.count(id)) continue;
            auto it = g.canonical_.find(n.concept);
            if (it == g.canonical_.end()) {
                g.canonical_[n.concept] = id;
            } else {
                const AogNode& prev = g.nodes_.at(it->second);
                bool take = (n.kind == AogKind::Or && prev.kind != AogKind::Or) ||
                            (n.kind == prev.kind && id < it->second);
                if (take) g.canonical_[n.concept] = id;
            }
        }
    }

    // Or-closures.
    {
        std::function<std::vector<OrChainHead>(const std::string&)> closure =
            [&](const std::string& id) -> std::vector<OrChainHead> {
            auto memo = g.or_closure_.find(id);
            if (memo != g.or_closure_.end()) return memo->second;
            std::vector<OrChainHead> out;
            const AogNode& n = g.nodes_.at(id);
            if (n.kind != AogKind::Or) {
                out.push_back({id, 0.0, {}});
            } else {
                for (std::size_t i = 0; i < n.children.size(); ++i) {
                    for (auto h : closure(n.children[i])) {
                        h.chain += n.branch_energies[i];
                        h.choices.insert(h.choices.begin(), {id, i});
                        out.push_back(h);
                    }
                }
            }
            g.or_closure_[id] = out;
            return out;
        };
        for (const auto& [id, _] : g.nodes_) closure(id);
    }

    // Occurrences: which (And, slot) positions a node can realize.
    for (const auto& [aid, a] : g.nodes_) {
        if (a.kind != AogKind::And) continue;
        for (std::size_t i = 0; i < a.children.size(); ++i)
            for (const auto& h : g.or_closure_.at(a.children[i]))
                g.occurrences_[h.head].push_back({aid, i, h.chain});
    }

    // Min Or-chain energy from a root to every node reachable by Or
    // selections alone (And children are structural, not chain links).
    {
        std::function<void(const std::string&, double)> walk = [&](const std::string& id,
                                                                   double acc) {
            auto it = g.above_chain_.find(id);
            if (it != g.above_chain_.end() && it->second <= acc) return;
            g.above_chain_[id] = acc;
            const AogNode& n = g.nodes_.at(id);
            if (n.kind == AogKind::Or)
                for (std::size_t i = 0; i < n.children.size(); ++i)
                    walk(n.children[i], acc + n.branch_energies[i]);
        };
        for (const auto& r : g.roots_) walk(r, 0.0);
    }

    return g;
}

inline StcAog StcAog::load_file(const std::string& path, const Ontology& o) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open grammar file " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("grammar json: ") + e.what());
    }
    return load(doc, o);
}

// ---------------------------------------------------------------------------
// Scoring

inline std::string StcAog::entry_node_for(const std::string& concept) const {
    // Most specific canonical node whose concept subsumes the given one.
    std::string best;
    int best_depth = -1;
    for (const auto& [c, id] : canonical_) {
        if (!ontology_.has_concept(c) || !ontology_.has_concept(concept)) continue;
        if (!ontology_.is_subtype(concept, c)) continue;
        int d = ontology_.concept(c).depth;
        if (d > best_depth || (d == best_depth && id < best)) {
            best = id;
            best_depth = d;
        }
    }
    return best;
}

inline StcAog::ResolveResult StcAog::resolve(
    const ParseGraph& pg, const std::string& pg_node, const std::string& g_node,
    const std::map<std::string, std::vector<std::string>>& parts_of) const {
    const AogNode& g = nodes_.at(g_node);
    if (g.kind == AogKind::And) return resolve_and(pg, pg_node, g, parts_of);

    if (g.kind == AogKind::Leaf) {
        ResolveResult r;
        r.feasible = true;
        auto it = parts_of.find(pg_node);
        if (it != parts_of.end() && !it->second.empty()) {
            r.feasible = false;
            Violation v;
            v.kind = "ZeroProb";
            v.node = pg_node;
            v.parts = it->second;
            v.detail = "parts under an atomic concept";
            r.hard.push_back(v);
        }
        return r;
    }

    // Or: best feasible head; diagnose conflicts when none is.
    ResolveResult best;
    bool any = false;
    for (const auto& h : or_closure_.at(g_node)) {
        ResolveResult r = resolve_and(pg, pg_node, nodes_.at(h.head), parts_of);
        if (!r.feasible) continue;
        r.energy += h.chain;
        if (!any || r.energy < best.energy) {
            best = r;
            any = true;
        }
    }
    if (any) return best;

    // No single branch explains the parts.
    ResolveResult fail;
    auto it = parts_of.find(pg_node);
    std::vector<std::string> parts = it == parts_of.end() ? std::vector<std::string>{} : it->second;
    std::set<std::string> covered;
    for (const auto& h : or_closure_.at(g_node)) {
        const AogNode& a = nodes_.at(h.head);
        for (const auto& p : parts)
            for (const auto& slot : a.children)
                if (ontology_.is_subtype(pg.node(p).concept, nodes_.at(slot).concept))
                    covered.insert(p);
    }
    Violation v;
    v.node = pg_node;
    v.parts = parts;
    if (covered.size() == parts.size()) {
        v.kind = "OrConflict";
        v.detail = "parts mix alternative branches of " + g_node;
    } else {
        v.kind = "ZeroProb";
        for (const auto& p : parts)
            if (!covered.count(p)) v.detail = "part " + p + " fits no branch of " + g_node;
    }
    fail.hard.push_back(v);
    return fail;
}

inline StcAog::ResolveResult StcAog::resolve_and(
    const ParseGraph& pg, const std::string& pg_node, const AogNode& a,
    const std::map<std::string, std::vector<std::string>>& parts_of) const {
    ResolveResult out;
    auto it = parts_of.find(pg_node);
    std::vector<std::string> parts = it == parts_of.end() ? std::vector<std::string>{} : it->second;

    const std::size_t nslots = a.children.size();
    // part index -> admissible slots
    std::vector<std::vector<std::size_t>> fits(parts.size());
    for (std::size_t p = 0; p < parts.size(); ++p)
        for (std::size_t s = 0; s < nslots; ++s)
            if (ontology_.is_subtype(pg.node(parts[p]).concept, nodes_.at(a.children[s]).concept))
                fits[p].push_back(s);

    // Exact assignment, parts in order, maximizing matched count.
    std::vector<int> slot_of(parts.size(), -1);
    std::vector<int> best_assign;
    std::size_t best_assigned = 0;
    std::vector<bool> used(nslots, false);
    std::function<void(std::size_t, std::size_t)> go = [&](std::size_t p, std::size_t assigned) {
        if (p == parts.size()) {
            if (assigned > best_assigned || best_assign.empty()) {
                best_assigned = assigned;
                best_assign.assign(slot_of.begin(), slot_of.end());
            }
            return;
        }
        if (assigned + (parts.size() - p) < best_assigned) return;
        for (std::size_t s : fits[p]) {
            if (used[s]) continue;
            used[s] = true;
            slot_of[p] = static_cast<int>(s);
            go(p + 1, assigned + 1);
            used[s] = false;
            slot_of[p] = -1;
        }
        go(p + 1, assigned);
    };
    go(0, 0);
    if (best_assign.empty()) best_assign.assign(parts.size(), -1);

    if (best_assigned < parts.size()) {
        out.feasible = false;
        return out;  // some part does not fit this branch; caller diagnoses
    }

    out.feasible = true;
    std::vector<std::string> slot_part(nslots, "");
    for (std::size_t p = 0; p < parts.size(); ++p)
        if (best_assign[p] >= 0) slot_part[best_assign[p]] = parts[p];

    for (std::size_t s = 0; s < nslots; ++s) {
        if (slot_part[s].empty()) {
            ++out.missing;
            continue;
        }
        // Causal compositions reference independent entities (their causes);
        // those are scored on their own, so only presence counts here.
        if (a.dim == 'C') continue;
        ResolveResult sub = resolve(pg, slot_part[s], a.children[s], parts_of);
        if (!sub.feasible) {
            out.feasible = false;
            out.hard.insert(out.hard.end(), sub.hard.begin(), sub.hard.end());
            return out;
        }
        out.energy += sub.energy;
        out.missing += sub.missing;
        out.hard.insert(out.hard.end(), sub.hard.begin(), sub.hard.end());
    }

    for (const auto& r : a.relations) {
        const std::string& pf = slot_part[r.from];
        const std::string& pt = slot_part[r.to];
        if (pf.empty() || pt.empty()) continue;
        out.energy += r.energy;
        if (!temporal_constraint_holds(r.constraint, pg.node(pf).at, pg.node(pt).at)) {
            Violation v;
            v.kind = "RelationConflict";
            v.node = pg_node;
            v.parts = {pf, pt};
            v.detail = "temporal constraint on " + a.id;
            out.hard.push_back(v);
        }
    }
    return out;
}

inline AnchorContext StcAog::anchor_context(const std::string& concept) const {
    AnchorContext out;
    std::string entry = entry_node_for(concept);
    if (entry.empty()) return out;
    out.dim = nodes_.at(entry).dim;

    auto better = [&](double chain, int missing, char dim) {
        double cost = chain + missing_part_energy * missing;
        double cur = out.chain + missing_part_energy * out.missing;
        if (!out.found || cost < cur) {
            out.chain = chain;
            out.missing = missing;
            out.dim = dim;
            out.found = true;
        }
    };

    if (auto ac = above_chain(entry); ac.has_value()) better(*ac, 0, nodes_.at(entry).dim);

    for (const auto& h : or_closure_.at(entry)) {
        for (const auto& occ : occurrences(h.head)) {
            const AogNode& a = nodes_.at(occ.and_id);
            double parent_chain = occ.chain;
            if (auto ac = above_chain(occ.and_id); ac.has_value()) parent_chain += *ac;
            // the absent parent itself plus its other slots
            better(parent_chain, static_cast<int>(a.children.size()), a.dim);
        }
    }
    return out;
}

inline void StcAog::score(const ParseGraph& pg, EnergyBreakdown* bd,
                          std::vector<Violation>* viol) const {
    // Composition structure: PartOf in-edges; for fluents, Causal in-edges.
    std::map<std::string, std::vector<std::string>> parts_of;
    std::set<std::string> is_part;
    for (const auto& e : pg.edges()) {
        if (e.relation == "PartOf") {
            parts_of[e.dst].push_back(e.src);
            is_part.insert(e.src);
        }
    }
    for (const auto& e : pg.edges()) {
        if (e.relation != "Causal") continue;
        if (!ontology_.has_concept(pg.node(e.dst).concept)) continue;
        if (ontology_.top_category(pg.node(e.dst).concept) == "Fluent")
            parts_of[e.dst].push_back(e.src);
    }

    // Maximal nodes: not a part of any composite.
    for (const auto& [id, n] : pg.nodes()) {
        if (is_part.count(id)) continue;
        if (!ontology_.has_concept(n.concept)) continue;
        std::string entry = entry_node_for(n.concept);
        if (entry.empty()) continue;  // outside the grammar: open world
        char dim = nodes_.at(entry).dim;

        ResolveResult r = resolve(pg, id, entry, parts_of);
        for (const auto& v : r.hard) viol->push_back(v);
        if (!r.feasible) continue;

        AnchorContext ctx = anchor_context(n.concept);
        add_dim(bd, dim, r.energy);
        add_dim(bd, ctx.found ? ctx.dim : dim, ctx.chain);
        bd->missing_penalty += missing_part_energy * (r.missing + ctx.missing);
    }

    // Cross-dimension relation edges.
    for (const auto& e : pg.edges()) {
        if (e.relation == "PartOf") continue;
        const PgNode& src = pg.node(e.src);
        const PgNode& dst = pg.node(e.dst);
        if (!ontology_.has_concept(src.concept) || !ontology_.has_concept(dst.concept)) continue;
        bool from_constrained = false;
        bool admitted = false;
        double best_energy = 0.0;
        std::vector<std::string> allowed_to;
        for (const auto& c : cross_) {
            if (!ontology_.has_relation(e.relation) ||
                !ontology_.is_relation_subtype(e.relation, c.relation))
                continue;
            if (!ontology_.is_subtype(src.concept, c.from)) continue;
            from_constrained = true;
            allowed_to.push_back(c.to);
            if (ontology_.is_subtype(dst.concept, c.to)) {
                if (!admitted || c.energy < best_energy) best_energy = c.energy;
                admitted = true;
            }
        }
        if (admitted) {
            bd->e_cross += best_energy;
        } else if (from_constrained) {
            Violation v;
            v.kind = "RelationConflict";
            v.edge = e;
            std::sort(allowed_to.begin(), allowed_to.end());
            allowed_to.erase(std::unique(allowed_to.begin(), allowed_to.end()), allowed_to.end());
            v.retype_candidates = allowed_to;
            v.detail = "no grammar relation admits " + e.key();
            viol->push_back(v);
        }
        // Unconstrained relations are open-world: no energy, no violation.
    }

    // Mandatory cross relations that are unrealized.
    for (const auto& c : cross_) {
        if (c.mandatory == 0) continue;
        for (const auto& [id, n] : pg.nodes()) {
            if (!ontology_.has_concept(n.concept)) continue;
            const std::string& need = c.mandatory == 1 ? c.from : c.to;
            if (!ontology_.is_subtype(n.concept, need)) continue;
            bool found = false;
            for (const auto& e : pg.edges()) {
                if (!ontology_.is_relation_subtype(e.relation, c.relation)) continue;
                if (c.mandatory == 1) {
                    if (e.src != id) continue;
                    if (ontology_.is_subtype(pg.node(e.dst).concept, c.to)) found = true;
                } else {
                    if (e.dst != id) continue;
                    if (ontology_.is_subtype(pg.node(e.src).concept, c.from)) found = true;
                }
                if (found) break;
            }
            if (!found) bd->missing_penalty += missing_part_energy;
        }
    }

    bd->finish();
}

// ---------------------------------------------------------------------------
// Sampling

inline ParseGraph StcAog::sample(std::uint64_t seed) const {
    Rng rng(seed);
    ParseGraph pg;
    int counter = 0;
    auto fresh_id = [&](const std::string& concept) {
        std::string base = concept;
        std::transform(base.begin(), base.end(), base.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        return base + "-" + std::to_string(counter++);
    };

    constexpr double kLeafDuration = 5.0;
    constexpr double kGap = 1.0;

    std::function<std::string(const std::string&, double*)> instantiate =
        [&](const std::string& gid, double* cursor) -> std::string {
        const AogNode& n = nodes_.at(gid);
        if (n.kind == AogKind::Or) {
            std::vector<double> w;
            for (double e : n.branch_energies) w.push_back(std::exp(-e));
            std::size_t pick = rng.pick_weighted(w);
            return instantiate(n.children[pick], cursor);
        }
        if (n.kind == AogKind::Leaf) {
            PgNode pn;
            pn.id = fresh_id(n.concept);
            pn.concept = n.concept;
            if (n.dim != 'S') {
                pn.at.t0 = *cursor;
                pn.at.t1 = *cursor + kLeafDuration;
                *cursor += kLeafDuration;
            } else {
                pn.at.x = std::floor(rng.uniform(0.0, 20.0) * 10.0) / 10.0;
                pn.at.y = std::floor(rng.uniform(0.0, 20.0) * 10.0) / 10.0;
            }
            pg.add_node(pn);
            return pn.id;
        }
        // And: children left to right, temporal relations scheduled in order.
        PgNode pn;
        pn.id = fresh_id(n.concept);
        pn.concept = n.concept;
        double start = *cursor;
        std::vector<std::string> child_ids;
        for (std::size_t i = 0; i < n.children.size(); ++i) {
            if (i > 0) {
                TemporalConstraint c = TemporalConstraint::none;
                for (const auto& r : n.relations)
                    if (r.from == static_cast<int>(i - 1) && r.to == static_cast<int>(i))
                        c = r.constraint;
                if (c == TemporalConstraint::precedes) *cursor += kGap;
            }
            child_ids.push_back(instantiate(n.children[i], cursor));
        }
        if (n.dim != 'S') {
            pn.at.t0 = start;
            pn.at.t1 = *cursor;
        }
        pg.add_node(pn);
        for (const auto& c : child_ids) pg.add_edge({c, pn.id, "PartOf"});
        return pn.id;
    };

    double cursor = 0.0;
    for (const auto& r : roots_) {
        instantiate(r, &cursor);
        cursor += kGap;
    }

    // Cross-dimension relations: share targets within the scene, create the
    // missing side when needed.
    auto find_by_concept = [&](const std::string& concept) -> std::string {
        for (const auto& [id, n] : pg.nodes())
            if (ontology_.is_subtype(n.concept, concept)) return id;
        return "";
    };
    auto ensure_node = [&](const std::string& concept, const SpatioTemporal& near) -> std::string {
        std::string found = find_by_concept(concept);
        if (!found.empty()) return found;
        PgNode pn;
        pn.id = fresh_id(concept);
        pn.concept = concept;
        std::string cat = ontology_.has_concept(concept) ? ontology_.top_category(concept) : "";
        if (cat == "Fluent" && near.has_time()) {
            pn.fluent_track = {{near.t0 ? *near.t0 : 0.0, 0.0}, {near.t1 ? *near.t1 : 0.0, 1.0}};
            pn.at = near;
        } else if (cat == "Object") {
            pn.at.x = std::floor(rng.uniform(0.0, 20.0) * 10.0) / 10.0;
            pn.at.y = std::floor(rng.uniform(0.0, 20.0) * 10.0) / 10.0;
        }
        pg.add_node(pn);
        return pn.id;
    };

    for (const auto& c : cross_) {
        std::vector<std::string> anchors;
        bool to_oriented = c.mandatory == 2;
        for (const auto& [id, n] : pg.nodes())
            if (ontology_.is_subtype(n.concept, to_oriented ? c.to : c.from)) anchors.push_back(id);
        for (const auto& anchor : anchors) {
            const PgNode& an = pg.node(anchor);
            std::string other = ensure_node(to_oriented ? c.from : c.to, an.at);
            PgEdge e;
            e.relation = c.relation;
            e.src = to_oriented ? other : anchor;
            e.dst = to_oriented ? anchor : other;
            pg.add_edge(e);
        }
    }
    return pg;
}

// ---------------------------------------------------------------------------
// Deduction templates

inline std::vector<DeductionTemplate> StcAog::context_subgraph(const std::string& concept) const {
    if (!has_concept(concept) && entry_node_for(concept).empty())
        throw UnknownConcept(concept);

    std::vector<DeductionTemplate> out;
    int counter = 0;
    auto fresh = [&counter](const std::string& c) {
        return "@" + c + "-" + std::to_string(counter++);
    };

    // Mandatory cross completions for a set of freshly placed nodes; shares
    // slot nodes by concept within one template.
    auto add_crosses = [&](ParseGraph* frag, double* energy,
                           std::vector<std::pair<std::string, std::string>> seeds) {
        std::map<std::string, std::string> by_concept;
        for (const auto& [id, c] : seeds) by_concept[c] = id;
        for (const auto& [id, c] : seeds) {
            for (const auto& spec : cross_) {
                if (spec.mandatory == 0) continue;
                bool from_side = spec.mandatory == 1;
                const std::string& anchor_concept = from_side ? spec.from : spec.to;
                if (!ontology_.is_subtype(c, anchor_concept)) continue;
                const std::string& other_concept = from_side ? spec.to : spec.from;
                std::string other;
                auto shared = by_concept.find(other_concept);
                if (shared != by_concept.end()) {
                    other = shared->second;
                } else {
                    other = fresh(other_concept);
                    PgNode pn;
                    pn.id = other;
                    pn.concept = other_concept;
                    pn.prov = Provenance::deduced;
                    frag->add_node(pn);
                    by_concept[other_concept] = other;
                }
                PgEdge e;
                e.relation = spec.relation;
                e.src = from_side ? id : other;
                e.dst = from_side ? other : id;
                e.prov = Provenance::deduced;
                frag->add_edge(e);
                *energy += spec.energy;
            }
        }
    };

    std::string entry = entry_node_for(concept);

    // Parent-occurrence templates: one per (And, slot) position.
    std::set<std::string> seen_sig;
    if (!entry.empty()) {
        for (const auto& h : or_closure_.at(entry)) {
            for (const auto& occ : occurrences(h.head)) {
                const AogNode& a = nodes_.at(occ.and_id);
                DeductionTemplate t;
                counter = 0;
                t.fragment = ParseGraph();
                PgNode anchor;
                anchor.id = t.anchor_id;
                anchor.concept = concept;
                t.fragment.add_node(anchor);
                PgNode parent;
                parent.id = fresh(a.concept);
                parent.concept = a.concept;
                parent.prov = Provenance::deduced;
                t.fragment.add_node(parent);
                t.fragment.add_edge({t.anchor_id, parent.id, "PartOf", Provenance::deduced});
                double energy = occ.chain + h.chain;
                if (auto rc = above_chain_.find(occ.and_id); rc != above_chain_.end())
                    energy += rc->second;
                std::vector<std::pair<std::string, std::string>> placed = {
                    {parent.id, parent.concept}, {t.anchor_id, concept}};
                for (std::size_t s = 0; s < a.children.size(); ++s) {
                    if (s == occ.slot) continue;
                    const AogNode& slot_node = nodes_.at(a.children[s]);
                    PgNode sib;
                    sib.id = fresh(slot_node.concept);
                    sib.concept = slot_node.concept;
                    sib.prov = Provenance::deduced;
                    t.fragment.add_node(sib);
                    t.fragment.add_edge({sib.id, parent.id, "PartOf", Provenance::deduced});
                    placed.push_back({sib.id, sib.concept});
                }
                for (const auto& r : a.relations) energy += r.energy;
                add_crosses(&t.fragment, &energy, placed);
                t.energy = energy;
                t.signature = "parent:" + occ.and_id + ":" + std::to_string(occ.slot);
                if (seen_sig.insert(t.signature).second) out.push_back(t);
            }
        }
    }

    // Children template: expand the concept itself one level under its
    // lowest-energy realization, plus its own mandatory cross relations.
    if (!entry.empty()) {
        const auto& heads = or_closure_.at(entry);
        const OrChainHead* best = nullptr;
        for (const auto& h : heads)
            if (!best || h.chain < best->chain) best = &h;
        if (best) {
            DeductionTemplate t;
            counter = 0;
            PgNode anchor;
            anchor.id = t.anchor_id;
            anchor.concept = concept;
            t.fragment.add_node(anchor);
            double energy = best->chain;
            std::vector<std::pair<std::string, std::string>> placed = {{t.anchor_id, concept}};
            const AogNode& headn = nodes_.at(best->head);
            if (headn.kind == AogKind::And) {
                for (const auto& cid : headn.children) {
                    const AogNode& cn = nodes_.at(cid);
                    PgNode part;
                    part.id = fresh(cn.concept);
                    part.concept = cn.concept;
                    part.prov = Provenance::deduced;
                    t.fragment.add_node(part);
                    t.fragment.add_edge({part.id, t.anchor_id, "PartOf", Provenance::deduced});
                    placed.push_back({part.id, part.concept});
                }
                for (const auto& r : headn.relations) energy += r.energy;
            }
            add_crosses(&t.fragment, &energy, placed);
            t.energy = energy;
            t.signature = "children:" + best->head;
            if (t.fragment.size() > 1) out.push_back(t);
        }
    }

    std::sort(out.begin(), out.end(), [](const DeductionTemplate& a, const DeductionTemplate& b) {
        if (a.energy != b.energy) return a.energy < b.energy;
        return a.signature < b.signature;
    });
    return out;
}

}  // namespace stcpg

#endif  // STCPG_AOG_HPP
