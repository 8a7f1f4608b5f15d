#ifndef STCPG_PARSE_GRAPH_HPP
#define STCPG_PARSE_GRAPH_HPP

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "stcpg/core.hpp"
#include "stcpg/ontology.hpp"

namespace stcpg {

struct PgNode {
    std::string id;
    std::string concept;
    SpatioTemporal at;
    std::map<std::string, std::string> attrs;           // e.g. name = "Tom"
    std::vector<std::pair<double, double>> fluent_track;  // (t, level), t non-decreasing
    Provenance prov = Provenance::video;
};

struct PgEdge {
    std::string src;
    std::string dst;
    std::string relation;
    Provenance prov = Provenance::video;

    std::string key() const { return src + "|" + relation + "|" + dst; }
};

inline bool operator<(const PgEdge& a, const PgEdge& b) {
    return std::tie(a.src, a.relation, a.dst) < std::tie(b.src, b.relation, b.dst);
}
inline bool operator==(const PgEdge& a, const PgEdge& b) {
    return a.src == b.src && a.relation == b.relation && a.dst == b.dst;
}

// Key for an element (node or edge) usable in correspondence maps.
inline std::string node_key(const std::string& id) { return "n:" + id; }
inline std::string edge_key(const PgEdge& e) { return "e:" + e.key(); }

// Labeled directed graph of typed entities and relations. Values are
// immutable in spirit: every operation returns a new graph.
class ParseGraph {
public:
    ParseGraph() = default;

    static ParseGraph build(const std::vector<PgNode>& nodes, const std::vector<PgEdge>& edges) {
        ParseGraph pg;
        for (const auto& n : nodes) pg.add_node(n);
        for (const auto& e : edges) pg.add_edge(e);
        return pg;
    }

    void add_node(const PgNode& n) {
        if (nodes_.count(n.id)) throw DuplicateId(n.id);
        n.at.validate();
        for (std::size_t i = 1; i < n.fluent_track.size(); ++i)
            if (n.fluent_track[i].first < n.fluent_track[i - 1].first - 1e-12)
                throw ParseError("fluent track times decrease on node " + n.id);
        nodes_[n.id] = n;
    }

    void add_edge(const PgEdge& e) {
        if (!nodes_.count(e.src)) throw DanglingEdge(e.src + " in " + e.key());
        if (!nodes_.count(e.dst)) throw DanglingEdge(e.dst + " in " + e.key());
        auto it = std::lower_bound(edges_.begin(), edges_.end(), e);
        if (it != edges_.end() && *it == e) return;  // duplicate triple: keep one
        edges_.insert(it, e);
    }

    bool has_node(const std::string& id) const { return nodes_.count(id) > 0; }
    bool has_edge(const std::string& src, const std::string& rel, const std::string& dst) const {
        PgEdge probe{src, dst, rel};
        auto it = std::lower_bound(edges_.begin(), edges_.end(), probe);
        return it != edges_.end() && *it == probe;
    }

    const PgNode& node(const std::string& id) const {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) throw UnknownConcept("node " + id);
        return it->second;
    }
    PgNode& node_mut(const std::string& id) {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) throw UnknownConcept("node " + id);
        return it->second;
    }

    const std::map<std::string, PgNode>& nodes() const { return nodes_; }
    const std::vector<PgEdge>& edges() const { return edges_; }

    std::size_t size() const { return nodes_.size() + edges_.size(); }
    bool empty() const { return nodes_.empty() && edges_.empty(); }

    std::vector<PgEdge> edges_from(const std::string& id) const {
        std::vector<PgEdge> out;
        for (const auto& e : edges_)
            if (e.src == id) out.push_back(e);
        return out;
    }
    std::vector<PgEdge> edges_to(const std::string& id) const {
        std::vector<PgEdge> out;
        for (const auto& e : edges_)
            if (e.dst == id) out.push_back(e);
        return out;
    }

    void remove_edge(const PgEdge& e) {
        auto it = std::lower_bound(edges_.begin(), edges_.end(), e);
        if (it != edges_.end() && *it == e) edges_.erase(it);
    }

    void remove_node(const std::string& id) {
        nodes_.erase(id);
        edges_.erase(std::remove_if(edges_.begin(), edges_.end(),
                                    [&](const PgEdge& e) { return e.src == id || e.dst == id; }),
                     edges_.end());
    }

    void retag(Provenance p) {
        for (auto& [_, n] : nodes_) n.prov = p;
        for (auto& e : edges_) e.prov = p;
    }

    // Disjoint union; colliding ids on the right side get a deterministic
    // "_<n>" suffix. Returns the rename map applied to b.
    static ParseGraph disjoint_union(const ParseGraph& a, const ParseGraph& b,
                                     std::map<std::string, std::string>* renames = nullptr) {
        ParseGraph out = a;
        std::map<std::string, std::string> ren;
        for (const auto& [id, n] : b.nodes_) {
            std::string nid = id;
            int k = 2;
            while (out.nodes_.count(nid)) nid = id + "_" + std::to_string(k++);
            if (nid != id) ren[id] = nid;
            PgNode copy = n;
            copy.id = nid;
            out.add_node(copy);
        }
        for (const auto& e : b.edges_) {
            PgEdge copy = e;
            if (ren.count(copy.src)) copy.src = ren.at(copy.src);
            if (ren.count(copy.dst)) copy.dst = ren.at(copy.dst);
            out.add_edge(copy);
        }
        if (renames) *renames = ren;
        return out;
    }

    nlohmann::ordered_json to_json() const;
    static ParseGraph from_json(const nlohmann::json& doc);
    static ParseGraph load_file(const std::string& path);
    void save_file(const std::string& path) const;

    // (subject, predicate, object) rows: node types, attributes, annotations
    // and edges, in a stable order.
    std::vector<std::array<std::string, 3>> to_triples() const;
    std::string to_triples_tsv() const;

    std::string canonical_dump() const { return to_json().dump(2) + "\n"; }

private:
    std::map<std::string, PgNode> nodes_;
    std::vector<PgEdge> edges_;  // sorted by (src, relation, dst)
};

struct NodeMergeOutcome {
    ParseGraph pg;
    std::string survivor;
    // old edge key -> new edge key for edges that were re-rooted from b to the
    // survivor; pairs of keys that collapsed into one edge.
    std::vector<std::pair<std::string, std::string>> edge_renames;
    std::vector<std::pair<std::string, std::string>> edge_merges;
};

namespace detail {

inline std::optional<double> avg_opt(const std::optional<double>& a,
                                     const std::optional<double>& b) {
    if (a && b) return 0.5 * (*a + *b);
    if (a) return a;
    return b;
}

inline SpatioTemporal average_annotations(const SpatioTemporal& a, const SpatioTemporal& b) {
    SpatioTemporal out;
    out.t0 = avg_opt(a.t0, b.t0);
    out.t1 = avg_opt(a.t1, b.t1);
    out.x = avg_opt(a.x, b.x);
    out.y = avg_opt(a.y, b.y);
    return out;
}

}  // namespace detail

// The concept kept when two nodes merge: the subtype if one subsumes the
// other, otherwise the deeper; depth ties keep a's (the video side in joint
// inference).
inline std::string more_special_concept(const Ontology& o, const std::string& ca,
                                        const std::string& cb) {
    if (o.is_subtype(ca, cb)) return ca;
    if (o.is_subtype(cb, ca)) return cb;
    return o.concept(cb).depth > o.concept(ca).depth ? cb : ca;
}

// Merge node b into node a. The survivor keeps a's id, takes the more special
// concept, averages annotations field-wise and inherits all edges; edges at
// the survivor with equal endpoints and nearby relations collapse.
inline NodeMergeOutcome merge_nodes(const ParseGraph& pg, const std::string& a,
                                    const std::string& b, const Ontology& o,
                                    double edge_merge_threshold = 0.5) {
    NodeMergeOutcome out;
    out.survivor = a;
    if (a == b) {
        out.pg = pg;
        return out;
    }
    const PgNode& na = pg.node(a);
    const PgNode& nb = pg.node(b);
    if (o.semantic_distance(na.concept, nb.concept) >= kDisjointDistance)
        throw DisjointTypes(na.concept + " vs " + nb.concept);

    PgNode merged = na;
    merged.concept = more_special_concept(o, na.concept, nb.concept);
    merged.at = detail::average_annotations(na.at, nb.at);
    for (const auto& [k, v] : nb.attrs)
        if (!merged.attrs.count(k)) merged.attrs[k] = v;
    if (!nb.fluent_track.empty()) {
        auto track = merged.fluent_track;
        track.insert(track.end(), nb.fluent_track.begin(), nb.fluent_track.end());
        std::sort(track.begin(), track.end());
        track.erase(std::unique(track.begin(), track.end()), track.end());
        merged.fluent_track = track;
    }
    if (na.prov != nb.prov) merged.prov = Provenance::merged;

    ParseGraph result;
    for (const auto& [id, n] : pg.nodes()) {
        if (id == b) continue;
        if (id == a)
            result.add_node(merged);
        else
            result.add_node(n);
    }
    std::vector<PgEdge> rerooted;
    for (const auto& e : pg.edges()) {
        PgEdge copy = e;
        if (copy.src == b) copy.src = a;
        if (copy.dst == b) copy.dst = a;
        if (copy.src == copy.dst && (e.src == b || e.dst == b) && e.src != e.dst)
            continue;  // self-loop created purely by the merge
        if (!(copy == e)) out.edge_renames.emplace_back(edge_key(e), edge_key(copy));
        rerooted.push_back(copy);
    }
    // Collapse exact duplicates and near-duplicate relations at the survivor.
    std::vector<PgEdge> kept;
    for (const auto& e : rerooted) {
        bool absorbed = false;
        for (auto& k : kept) {
            if (k.src != e.src || k.dst != e.dst) continue;
            if (k.relation == e.relation) {
                out.edge_merges.emplace_back(edge_key(k), edge_key(e));
                if (k.prov != e.prov) k.prov = Provenance::merged;
                absorbed = true;
                break;
            }
            if ((e.src == a || e.dst == a) &&
                o.relation_distance(k.relation, e.relation) < edge_merge_threshold) {
                std::string finer = o.relation(e.relation).depth > o.relation(k.relation).depth
                                        ? e.relation
                                        : k.relation;
                PgEdge replacement = k;
                replacement.relation = finer;
                if (k.prov != e.prov) replacement.prov = Provenance::merged;
                out.edge_merges.emplace_back(edge_key(k), edge_key(e));
                if (!(replacement == k))
                    out.edge_renames.emplace_back(edge_key(k), edge_key(replacement));
                k = replacement;
                absorbed = true;
                break;
            }
        }
        if (!absorbed) kept.push_back(e);
    }
    for (const auto& e : kept) result.add_edge(e);
    out.pg = std::move(result);
    return out;
}

inline nlohmann::ordered_json ParseGraph::to_json() const {
    nlohmann::ordered_json doc;
    doc["nodes"] = nlohmann::ordered_json::array();
    for (const auto& [id, n] : nodes_) {
        nlohmann::ordered_json jn;
        jn["id"] = n.id;
        jn["concept"] = n.concept;
        if (n.at.t0) jn["t0"] = *n.at.t0;
        if (n.at.t1) jn["t1"] = *n.at.t1;
        if (n.at.x) jn["x"] = *n.at.x;
        if (n.at.y) jn["y"] = *n.at.y;
        if (!n.attrs.empty()) {
            nlohmann::ordered_json a;
            for (const auto& [k, v] : n.attrs) a[k] = v;
            jn["attrs"] = a;
        }
        if (!n.fluent_track.empty()) {
            nlohmann::ordered_json tr = nlohmann::ordered_json::array();
            for (const auto& [t, lvl] : n.fluent_track) tr.push_back({t, lvl});
            jn["fluent_track"] = tr;
        }
        jn["prov"] = to_string(n.prov);
        doc["nodes"].push_back(jn);
    }
    doc["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : edges_) {
        nlohmann::ordered_json je;
        je["src"] = e.src;
        je["rel"] = e.relation;
        je["dst"] = e.dst;
        je["prov"] = to_string(e.prov);
        doc["edges"].push_back(je);
    }
    return doc;
}

inline ParseGraph ParseGraph::from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("edges"))
        throw ParseError("parse graph document needs 'nodes' and 'edges'");
    ParseGraph pg;
    try {
        for (const auto& jn : doc.at("nodes")) {
            PgNode n;
            n.id = jn.at("id").get<std::string>();
            n.concept = jn.at("concept").get<std::string>();
            if (jn.contains("t0")) n.at.t0 = jn.at("t0").get<double>();
            if (jn.contains("t1")) n.at.t1 = jn.at("t1").get<double>();
            if (jn.contains("x")) n.at.x = jn.at("x").get<double>();
            if (jn.contains("y")) n.at.y = jn.at("y").get<double>();
            if (jn.contains("attrs"))
                for (const auto& [k, v] : jn.at("attrs").items())
                    n.attrs[k] = v.get<std::string>();
            if (jn.contains("fluent_track"))
                for (const auto& p : jn.at("fluent_track"))
                    n.fluent_track.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
            n.prov = provenance_from_string(jn.value("prov", "video"));
            pg.add_node(n);
        }
        for (const auto& je : doc.at("edges")) {
            PgEdge e;
            e.src = je.at("src").get<std::string>();
            e.relation = je.at("rel").get<std::string>();
            e.dst = je.at("dst").get<std::string>();
            e.prov = provenance_from_string(je.value("prov", "video"));
            pg.add_edge(e);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("parse graph json: ") + e.what());
    }
    return pg;
}

inline ParseGraph ParseGraph::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open parse graph file " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("parse graph json: ") + e.what());
    }
    return from_json(doc);
}

inline void ParseGraph::save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << canonical_dump();
}

inline std::vector<std::array<std::string, 3>> ParseGraph::to_triples() const {
    std::vector<std::array<std::string, 3>> rows;
    auto num = [](double v) {
        std::ostringstream os;
        os << v;
        return os.str();
    };
    for (const auto& [id, n] : nodes_) {
        rows.push_back({id, "type", n.concept});
        for (const auto& [k, v] : n.attrs) rows.push_back({id, k, v});
        if (n.at.t0) rows.push_back({id, "t0", num(*n.at.t0)});
        if (n.at.t1) rows.push_back({id, "t1", num(*n.at.t1)});
        if (n.at.x) rows.push_back({id, "x", num(*n.at.x)});
        if (n.at.y) rows.push_back({id, "y", num(*n.at.y)});
    }
    for (const auto& e : edges_) rows.push_back({e.src, e.relation, e.dst});
    return rows;
}

inline std::string ParseGraph::to_triples_tsv() const {
    std::string out;
    for (const auto& row : to_triples())
        out += row[0] + "\t" + row[1] + "\t" + row[2] + "\n";
    return out;
}

}  // namespace stcpg

#endif  // STCPG_PARSE_GRAPH_HPP
