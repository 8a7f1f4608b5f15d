#ifndef STCPG_ONTOLOGY_HPP
#define STCPG_ONTOLOGY_HPP

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stcpg/core.hpp"

namespace stcpg {

// Universal type at the root of the concept taxonomy. Parentless concepts
// attach to it implicitly.
inline const std::string kTopConcept = "Top";

inline const std::vector<std::string>& core_relations() {
    static const std::vector<std::string> v = {
        "Agent", "Patient", "Location", "PartOf", "Causal", "Trigger", "HasFluent"};
    return v;
}

struct ConceptType {
    std::string id;
    std::string label;
    int depth = 0;  // longest path from Top
    std::vector<std::string> parents;
};

struct RelationType {
    std::string id;
    std::string category;  // spatial | temporal | causal | functional | compositional | role
    int depth = 0;
    std::vector<std::string> parents;
};

// Concept and relation taxonomies. Immutable after load; all queries are const.
class Ontology {
public:
    static Ontology load(const nlohmann::json& doc);
    static Ontology load_file(const std::string& path);

    bool has_concept(const std::string& id) const { return concepts_.count(id) > 0; }
    bool has_relation(const std::string& id) const { return relations_.count(id) > 0; }

    const ConceptType& concept(const std::string& id) const {
        auto it = concepts_.find(id);
        if (it == concepts_.end()) throw UnknownConcept(id);
        return it->second;
    }
    const RelationType& relation(const std::string& id) const {
        auto it = relations_.find(id);
        if (it == relations_.end()) throw UnknownConcept("relation " + id);
        return it->second;
    }

    const std::map<std::string, ConceptType>& concepts() const { return concepts_; }
    const std::map<std::string, RelationType>& relations() const { return relations_; }

    // True iff b is reachable from a along subtype edges (reflexively).
    bool is_subtype(const std::string& a, const std::string& b) const {
        const auto& anc = concept_ancestors(a);
        if (!has_concept(b)) throw UnknownConcept(b);
        return anc.count(b) > 0;
    }

    bool is_relation_subtype(const std::string& a, const std::string& b) const {
        const auto& anc = relation_ancestors(a);
        if (!has_relation(b)) throw UnknownConcept("relation " + b);
        return anc.count(b) > 0;
    }

    // Top-level category (direct child of Top) the concept falls under, or ""
    // for Top itself and for concepts directly under Top.
    std::string top_category(const std::string& id) const {
        auto it = top_category_.find(id);
        if (it == top_category_.end()) throw UnknownConcept(id);
        return it->second;
    }

    // Wu-Palmer distance over the concept taxonomy: 1 - 2*depth(lca) /
    // (depth(a)+depth(b)). Disjoint pairs get kDisjointDistance.
    double semantic_distance(const std::string& a, const std::string& b) const {
        if (!has_concept(a)) throw UnknownConcept(a);
        if (!has_concept(b)) throw UnknownConcept(b);
        if (a == b) return 0.0;
        const std::string lca = concept_lca(a, b);
        if (lca == kTopConcept) return kDisjointDistance;
        const std::string ca = top_category(a), cb = top_category(b);
        if (is_top_category(lca) && (ca != cb || ca != lca)) return kDisjointDistance;
        double da = concept(a).depth, db = concept(b).depth, dl = concept(lca).depth;
        return 1.0 - 2.0 * dl / (da + db);
    }

    // Same form over the relation taxonomy; relations of different category
    // are disjoint, as are relations whose only common ancestor is the
    // implicit root.
    double relation_distance(const std::string& a, const std::string& b) const {
        const RelationType& ra = relation(a);
        const RelationType& rb = relation(b);
        if (a == b) return 0.0;
        if (ra.category != rb.category) return kDisjointDistance;
        const std::string lca = relation_lca(a, b);
        if (lca.empty()) return kDisjointDistance;
        double dl = relation(lca).depth;
        return 1.0 - 2.0 * dl / (static_cast<double>(ra.depth) + rb.depth);
    }

    nlohmann::json to_json() const;

private:
    bool is_top_category(const std::string& id) const {
        auto it = concepts_.find(id);
        return it != concepts_.end() && it->second.depth == 1;
    }

    const std::set<std::string>& concept_ancestors(const std::string& id) const {
        auto it = concept_anc_.find(id);
        if (it == concept_anc_.end()) throw UnknownConcept(id);
        return it->second;
    }
    const std::set<std::string>& relation_ancestors(const std::string& id) const {
        auto it = relation_anc_.find(id);
        if (it == relation_anc_.end()) throw UnknownConcept("relation " + id);
        return it->second;
    }

    // Common ancestor maximizing depth; ties broken lexicographically.
    std::string concept_lca(const std::string& a, const std::string& b) const {
        const auto& aa = concept_ancestors(a);
        const auto& ab = concept_ancestors(b);
        std::string best;
        int best_depth = -1;
        for (const auto& c : aa) {
            if (!ab.count(c)) continue;
            int d = concepts_.at(c).depth;
            if (d > best_depth || (d == best_depth && c < best)) {
                best = c;
                best_depth = d;
            }
        }
        return best;
    }

    std::string relation_lca(const std::string& a, const std::string& b) const {
        const auto& aa = relation_ancestors(a);
        const auto& ab = relation_ancestors(b);
        std::string best;
        int best_depth = -1;
        for (const auto& r : aa) {
            if (!ab.count(r)) continue;
            int d = relations_.at(r).depth;
            if (d > best_depth || (d == best_depth && r < best)) {
                best = r;
                best_depth = d;
            }
        }
        return best;  // empty when only the implicit root is shared
    }

    std::map<std::string, ConceptType> concepts_;
    std::map<std::string, RelationType> relations_;
    std::map<std::string, std::set<std::string>> concept_anc_;   // reflexive
    std::map<std::string, std::set<std::string>> relation_anc_;  // reflexive
    std::map<std::string, std::string> top_category_;
};

namespace detail {

// Longest-path depths over a DAG given child->parents edges. Throws CycleError
// when no topological order exists.
inline std::map<std::string, int> longest_path_depths(
    const std::map<std::string, std::vector<std::string>>& parents_of,
    const std::string& root) {
    std::map<std::string, int> depth;
    std::map<std::string, int> state;  // 0 unvisited, 1 in progress, 2 done

    std::function<int(const std::string&)> visit = [&](const std::string& id) -> int {
        if (id == root) return 0;
        auto st = state.find(id);
        if (st != state.end() && st->second == 1) throw CycleError("involving '" + id + "'");
        if (st != state.end() && st->second == 2) return depth[id];
        state[id] = 1;
        int best = 0;
        auto it = parents_of.find(id);
        if (it != parents_of.end()) {
            for (const auto& p : it->second) {
                if (!parents_of.count(p) && p != root)
                    throw ParseError("unknown parent '" + p + "' of '" + id + "'");
                best = std::max(best, visit(p) + 1);
            }
        }
        state[id] = 2;
        depth[id] = best;
        return best;
    };

    for (const auto& [id, _] : parents_of) visit(id);
    depth[root] = 0;
    return depth;
}

}  // namespace detail

inline Ontology Ontology::load(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("concepts") || !doc.contains("relations"))
        throw ParseError("ontology document needs 'concepts' and 'relations' arrays");

    Ontology o;

    std::map<std::string, std::vector<std::string>> cparents;
    cparents[kTopConcept] = {};
    for (const auto& c : doc.at("concepts")) {
        std::string id = c.at("id").get<std::string>();
        if (cparents.count(id) && id != kTopConcept) throw ParseError("duplicate concept '" + id + "'");
        std::vector<std::string> parents;
        if (c.contains("parents"))
            for (const auto& p : c.at("parents")) parents.push_back(p.get<std::string>());
        if (parents.empty() && id != kTopConcept) parents.push_back(kTopConcept);
        cparents[id] = parents;
        ConceptType ct;
        ct.id = id;
        ct.label = c.value("label", id);
        ct.parents = parents;
        o.concepts_[id] = ct;
    }
    if (!o.concepts_.count(kTopConcept)) {
        ConceptType top;
        top.id = kTopConcept;
        top.label = kTopConcept;
        o.concepts_[kTopConcept] = top;
    }

    auto cdepth = detail::longest_path_depths(cparents, kTopConcept);
    for (auto& [id, ct] : o.concepts_) ct.depth = cdepth.at(id);

    // Reflexive ancestor closure.
    for (const auto& [id, ct] : o.concepts_) {
        std::set<std::string> anc;
        std::vector<std::string> stack = {id};
        while (!stack.empty()) {
            std::string cur = stack.back();
            stack.pop_back();
            if (!anc.insert(cur).second) continue;
            for (const auto& p : cparents.at(cur)) stack.push_back(p);
        }
        o.concept_anc_[id] = anc;
    }

    // Top-level category per concept plus the pairwise-disjointness check on
    // Object / Event / Fluent.
    for (const auto& [id, anc] : o.concept_anc_) {
        std::set<std::string> cats;
        for (const auto& a : anc)
            if (o.concepts_.at(a).depth == 1) cats.insert(a);
        int main_cats = 0;
        for (const auto& c : cats)
            if (c == "Object" || c == "Event" || c == "Fluent") ++main_cats;
        if (main_cats > 1)
            throw ParseError("concept '" + id + "' descends from multiple top-level categories");
        o.top_category_[id] = cats.empty() ? "" : *cats.begin();
    }

    std::map<std::string, std::vector<std::string>> rparents;
    const std::string rel_root = "";  // implicit
    for (const auto& r : doc.at("relations")) {
        std::string id = r.at("id").get<std::string>();
        if (o.relations_.count(id)) throw ParseError("duplicate relation '" + id + "'");
        RelationType rt;
        rt.id = id;
        rt.category = r.at("category").get<std::string>();
        static const std::set<std::string> cats = {"spatial",    "temporal",      "causal",
                                                   "functional", "compositional", "role"};
        if (!cats.count(rt.category))
            throw ParseError("relation '" + id + "' has unknown category '" + rt.category + "'");
        if (r.contains("parents"))
            for (const auto& p : r.at("parents")) rt.parents.push_back(p.get<std::string>());
        rparents[id] = rt.parents;
        o.relations_[id] = rt;
    }

    for (const auto& need : core_relations())
        if (!o.relations_.count(need)) throw MissingCoreRelation(need);

    // Relation depths from the implicit root (parentless relations: depth 1).
    {
        std::map<std::string, std::vector<std::string>> padded = rparents;
        std::map<std::string, int> state;
        std::function<int(const std::string&)> visit = [&](const std::string& id) -> int {
            auto st = state.find(id);
            if (st != state.end() && st->second == 1)
                throw CycleError("relation taxonomy involving '" + id + "'");
            if (st != state.end() && st->second == 2) return o.relations_.at(id).depth;
            state[id] = 1;
            int best = 1;
            for (const auto& p : padded.at(id)) {
                if (!o.relations_.count(p))
                    throw ParseError("unknown relation parent '" + p + "'");
                if (o.relations_.at(p).category != o.relations_.at(id).category)
                    throw ParseError("relation '" + id + "' crosses category via parent '" + p + "'");
                best = std::max(best, visit(p) + 1);
            }
            state[id] = 2;
            o.relations_[id].depth = best;
            return best;
        };
        for (auto& [id, _] : o.relations_) visit(id);
    }

    for (const auto& [id, rt] : o.relations_) {
        std::set<std::string> anc;
        std::vector<std::string> stack = {id};
        while (!stack.empty()) {
            std::string cur = stack.back();
            stack.pop_back();
            if (!anc.insert(cur).second) continue;
            for (const auto& p : o.relations_.at(cur).parents) stack.push_back(p);
        }
        o.relation_anc_[id] = anc;
    }

    return o;
}

inline Ontology Ontology::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open ontology file " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("ontology json: ") + e.what());
    }
    return load(doc);
}

inline nlohmann::json Ontology::to_json() const {
    nlohmann::ordered_json doc;
    doc["concepts"] = nlohmann::json::array();
    for (const auto& [id, ct] : concepts_) {
        if (id == kTopConcept) continue;
        nlohmann::ordered_json c;
        c["id"] = id;
        if (ct.label != id) c["label"] = ct.label;
        nlohmann::json parents = nlohmann::json::array();
        for (const auto& p : ct.parents)
            if (p != kTopConcept) parents.push_back(p);
        if (!parents.empty()) c["parents"] = parents;
        doc["concepts"].push_back(c);
    }
    doc["relations"] = nlohmann::json::array();
    for (const auto& [id, rt] : relations_) {
        nlohmann::ordered_json r;
        r["id"] = id;
        r["category"] = rt.category;
        if (!rt.parents.empty()) r["parents"] = rt.parents;
        doc["relations"].push_back(r);
    }
    return doc;
}

}  // namespace stcpg

#endif  // STCPG_ONTOLOGY_HPP
