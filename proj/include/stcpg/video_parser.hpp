#ifndef STCPG_VIDEO_PARSER_HPP
#define STCPG_VIDEO_PARSER_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "stcpg/aog.hpp"
#include "stcpg/cost_model.hpp"
#include "stcpg/detection.hpp"
#include "stcpg/matching.hpp"
#include "stcpg/parse_graph.hpp"

namespace stcpg {

// A ranked video interpretation. `energy` is the full objective: grammar
// energy plus detection likelihood plus unexplained-detection penalties. The
// components stay separate for downstream joint inference.
struct CandidateParse {
    ParseGraph pg;
    double energy = 0.0;
    int rank = 0;

    double grammar_energy = 0.0;
    double likelihood_energy = 0.0;
    std::set<std::string> incorporated;  // detection ids grounded in the graph
    std::string signature;
};

namespace detail {

inline bool leaf_matches(const Ontology& o, const AogNode& leaf, const Detection& d) {
    if (!leaf.detector.empty() && d.detector == leaf.detector) return true;
    return o.has_concept(d.concept) && o.is_subtype(d.concept, leaf.concept);
}

inline std::string role_relation(const std::string& role) {
    if (role == "agent") return "Agent";
    if (role == "patient") return "Patient";
    if (role == "location") return "Location";
    return "";
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

inline std::string bits(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Earley chart over the discretized stream.

struct ChartState;
using StatePtr = std::shared_ptr<const ChartState>;

struct BoundChild {
    bool is_leaf = false;
    int detection = -1;  // index into the stream
    StatePtr child;      // completed sub-derivation
    SpatioTemporal span;
};

struct ChartState {
    std::string and_id;
    std::size_t dot = 0;
    int origin = 0;
    int cur = 0;
    bool is_top = false;
    double e_stc = 0.0;  // Or-chain + child energies + relation energies
    double e_like = 0.0;
    std::vector<BoundChild> bound;
    std::string signature;

    SpatioTemporal span() const {
        SpatioTemporal s;
        for (const auto& b : bound) {
            if (b.span.t0 && (!s.t0 || *b.span.t0 < *s.t0)) s.t0 = b.span.t0;
            if (b.span.t1 && (!s.t1 || *b.span.t1 > *s.t1)) s.t1 = b.span.t1;
        }
        return s;
    }
};

struct EarleyChart {
    const StcAog& g;
    const DetectionStream& stream;
    const CostModel& cost;
    char dim;

    std::vector<std::vector<StatePtr>> sets{};
    std::vector<std::set<std::string>> seen{};
    std::set<const ChartState*> advanced{};
    std::vector<StatePtr> complete_tops{};
    std::vector<StatePtr> partial_tops{};

    int frame_of(double t) const {
        return static_cast<int>(std::lround(t * stream.frame_rate));
    }

    std::string state_signature(const ChartState& s) const {
        std::string sig = s.and_id + "[" + std::to_string(s.dot) + "@" +
                          std::to_string(s.origin) + "-" + std::to_string(s.cur) + ";" +
                          bits(s.e_stc) + "](";
        for (const auto& b : s.bound) {
            if (b.is_leaf)
                sig += stream.detections[b.detection].id + ",";
            else
                sig += "<" + b.child->signature + ">,";
        }
        return sig + ")";
    }

    void add_state(ChartState s) {
        s.signature = state_signature(s);
        int f = s.cur;
        if (f < 0 || f >= static_cast<int>(sets.size())) return;
        if (!seen[f].insert(s.signature).second) return;
        if (cost.beam_energy > 0.0) {
            double lo = s.e_stc + s.e_like;
            for (const auto& other : sets[f]) lo = std::min(lo, other->e_stc + other->e_like);
            if (s.e_stc + s.e_like > lo + cost.beam_energy) return;
        }
        sets[f].push_back(std::make_shared<ChartState>(std::move(s)));
    }

    // Relation energies and constraints that become checkable once the last
    // bound slot is in place. False on a violated constraint.
    bool apply_relations(const AogNode& a, std::vector<BoundChild>& bound, double* e) const {
        std::size_t just = bound.size() - 1;
        for (const auto& r : a.relations) {
            std::size_t hi = static_cast<std::size_t>(std::max(r.from, r.to));
            if (hi != just) continue;
            *e += r.energy;
            if (!temporal_constraint_holds(r.constraint, bound[r.from].span, bound[r.to].span))
                return false;
        }
        return true;
    }

    void run() {
        int max_frame = 0;
        for (const auto& d : stream.detections) max_frame = std::max(max_frame, frame_of(d.t1));
        sets.assign(max_frame + 2, {});
        seen.assign(max_frame + 2, {});

        // Top-level And-nodes enter the chart at frame 0.
        for (const auto& r : g.roots()) {
            for (const auto& h : g.or_closure(r)) {
                const AogNode& head = g.node(h.head);
                if (head.dim != dim || head.kind != AogKind::And) continue;
                ChartState s;
                s.and_id = h.head;
                s.is_top = true;
                s.e_stc = h.chain;
                add_state(std::move(s));
            }
        }

        for (int f = 0; f < static_cast<int>(sets.size()); ++f) {
            for (std::size_t i = 0; i < sets[f].size(); ++i) {  // worklist
                StatePtr s = sets[f][i];
                const AogNode& a = g.node(s->and_id);
                if (s->dot == a.children.size()) {
                    complete(s, f);
                    continue;
                }
                const std::string& slot = a.children[s->dot];
                for (const auto& h : g.or_closure(slot)) {
                    const AogNode& head = g.node(h.head);
                    if (head.kind == AogKind::And)
                        predict(h, f);
                    else if (head.kind == AogKind::Leaf)
                        scan(s, h, head, f);
                }
            }
        }

        for (const auto& set : sets)
            for (const auto& s : set) {
                if (!s->is_top) continue;
                const AogNode& a = g.node(s->and_id);
                if (s->dot == a.children.size())
                    complete_tops.push_back(s);
                else if (s->dot >= 1 && !advanced.count(s.get()))
                    partial_tops.push_back(s);  // maximal partial at stream end
            }
    }

    void predict(const OrChainHead& h, int f) {
        ChartState c;
        c.and_id = h.head;
        c.origin = f;
        c.cur = f;
        c.e_stc = h.chain;
        add_state(std::move(c));
    }

    void scan(const StatePtr& s, const OrChainHead& h, const AogNode& leaf, int f) {
        for (std::size_t di = 0; di < stream.detections.size(); ++di) {
            const Detection& d = stream.detections[di];
            if (frame_of(d.t0) < f) continue;  // earlier detections belong to earlier slots
            if (!leaf_matches(g.ontology(), leaf, d)) continue;
            ChartState nxt = *s;
            nxt.dot = s->dot + 1;
            nxt.cur = std::max(f, frame_of(d.t1));
            BoundChild b;
            b.is_leaf = true;
            b.detection = static_cast<int>(di);
            b.span = d.annotation();
            nxt.bound.push_back(b);
            nxt.e_stc += h.chain;
            nxt.e_like += -std::log(d.confidence);
            if (!apply_relations(g.node(s->and_id), nxt.bound, &nxt.e_stc)) continue;
            advanced.insert(s.get());
            add_state(std::move(nxt));
        }
    }

    void complete(const StatePtr& done, int f) {
        auto& origin_set = sets[done->origin];
        std::size_t n = origin_set.size();
        for (std::size_t i = 0; i < n; ++i) {
            StatePtr p = origin_set[i];
            const AogNode& pa = g.node(p->and_id);
            if (p->dot >= pa.children.size()) continue;
            const std::string& slot = pa.children[p->dot];
            for (const auto& h : g.or_closure(slot)) {
                if (h.head != done->and_id) continue;
                ChartState nxt = *p;
                nxt.dot = p->dot + 1;
                nxt.cur = std::max(p->cur, f);
                BoundChild b;
                b.child = done;
                b.span = done->span();
                nxt.bound.push_back(b);
                nxt.e_stc += done->e_stc;  // the child carries its own Or chain
                nxt.e_like += done->e_like;
                if (!apply_relations(pa, nxt.bound, &nxt.e_stc)) continue;
                advanced.insert(p.get());
                add_state(std::move(nxt));
            }
        }
    }
};

// Renders derivation trees into graph form. Composite ids follow assembly
// DFS order, so a fixed derivation set always serializes identically.
struct Assembler {
    const StcAog& g;
    const DetectionStream& stream;
    ParseGraph* pg;
    std::set<std::string>* incorporated;
    int counter = 0;

    std::string object_node(const std::string& det_id) {
        const Detection& d = stream.by_id(det_id);
        if (!pg->has_node(d.id)) {
            PgNode n;
            n.id = d.id;
            n.concept = d.concept;
            n.at = d.annotation();
            pg->add_node(n);
        }
        incorporated->insert(d.id);
        return d.id;
    }

    std::string leaf_node(const Detection& d) {
        if (!pg->has_node(d.id)) {
            PgNode n;
            n.id = d.id;
            n.concept = d.concept;
            n.at = d.annotation();
            pg->add_node(n);
        }
        incorporated->insert(d.id);
        for (const auto& [role, target] : d.roles) {
            std::string rel = role_relation(role);
            if (rel.empty() || !stream.has(target)) continue;
            pg->add_edge({d.id, object_node(target), rel});
        }
        return d.id;
    }

    std::string composite(const ChartState& s) {
        const AogNode& a = g.node(s.and_id);
        PgNode n;
        n.id = lower(a.concept) + "-" + std::to_string(counter++);
        n.concept = a.concept;
        n.at = s.span();
        pg->add_node(n);
        for (const auto& b : s.bound) {
            std::string cid =
                b.is_leaf ? leaf_node(stream.detections[b.detection]) : composite(*b.child);
            pg->add_edge({cid, n.id, "PartOf"});
        }
        return n.id;
    }
};

// One top-level temporal derivation, either an And tree or a bare leaf root.
struct TemporalDeriv {
    StatePtr state;     // null for leaf roots
    int leaf_det = -1;  // stream index for leaf roots
    double leaf_chain = 0.0;
    int missing = 0;  // unfilled slots of a partial top-level state
    double e_stc = 0.0;
    std::set<std::string> events_bound;  // event detections consumed
    std::string signature;

    std::string emit(Assembler* as) const {
        if (state) return as->composite(*state);
        return as->leaf_node(as->stream.detections[leaf_det]);
    }
};

inline void collect_bound(const ChartState& s, const DetectionStream& stream,
                          std::set<std::string>* out) {
    for (const auto& b : s.bound) {
        if (b.is_leaf)
            out->insert(stream.detections[b.detection].id);
        else
            collect_bound(*b.child, stream, out);
    }
}

inline std::vector<TemporalDeriv> temporal_derivations(const DetectionStream& stream,
                                                       const StcAog& g, const CostModel& cost,
                                                       char dim) {
    EarleyChart chart{g, stream, cost, dim};
    chart.run();

    std::vector<TemporalDeriv> out;
    auto from_state = [&](const StatePtr& s, int missing) {
        TemporalDeriv d;
        d.state = s;
        d.missing = missing;
        d.e_stc = s->e_stc + g.missing_part_energy * missing;
        collect_bound(*s, stream, &d.events_bound);
        d.signature = s->signature + (missing ? "+m" + std::to_string(missing) : "");
        out.push_back(std::move(d));
    };
    for (const auto& s : chart.complete_tops) from_state(s, 0);
    for (const auto& s : chart.partial_tops)
        from_state(s, static_cast<int>(g.node(s->and_id).children.size() - s->dot));

    for (const auto& r : g.roots()) {
        for (const auto& h : g.or_closure(r)) {
            const AogNode& head = g.node(h.head);
            if (head.dim != dim || head.kind != AogKind::Leaf) continue;
            for (std::size_t di = 0; di < stream.detections.size(); ++di) {
                if (!leaf_matches(g.ontology(), head, stream.detections[di])) continue;
                TemporalDeriv d;
                d.leaf_det = static_cast<int>(di);
                d.leaf_chain = h.chain;
                d.e_stc = h.chain;
                d.events_bound = {stream.detections[di].id};
                d.signature = "leafroot:" + h.head + ":" + stream.detections[di].id;
                out.push_back(std::move(d));
            }
        }
    }

    std::sort(out.begin(), out.end(), [](const TemporalDeriv& a, const TemporalDeriv& b) {
        if (a.e_stc != b.e_stc) return a.e_stc < b.e_stc;
        return a.signature < b.signature;
    });
    return out;
}

inline CandidateParse render_derivation(const TemporalDeriv& d, const DetectionStream& stream,
                                        const StcAog& g, const CostModel& cost) {
    CandidateParse c;
    std::set<std::string> incorporated;
    Assembler as{g, stream, &c.pg, &incorporated};
    d.emit(&as);
    c.grammar_energy = d.e_stc;
    double like = 0.0;
    for (const auto& det : stream.detections) {
        if (incorporated.count(det.id))
            like += -std::log(det.confidence);
        else
            like += cost.unexplained_penalty;
    }
    c.likelihood_energy = like;
    c.energy = c.grammar_energy + c.likelihood_energy;
    c.incorporated = std::move(incorporated);
    c.signature = d.signature;
    return c;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Spatial parsing: bottom-up part composition per the spatial And-nodes,
// then greedy non-conflicting selection of candidates in energy order.

struct SpatialObject {
    ParseGraph fragment;
    std::string head;
    std::set<std::string> members;  // detection ids consumed
    double energy = 0.0;
};

inline std::vector<SpatialObject> parse_spatial(const DetectionStream& stream, const StcAog& g,
                                                const CostModel& cost) {
    const Ontology& o = g.ontology();

    struct Item {
        std::string concept;
        double x = 0.0, y = 0.0;
        bool has_pos = false;
        double energy = 0.0;
        std::set<std::string> members;
        std::vector<std::string> shape;
        std::string and_id;  // "" for raw detections
        std::vector<Item> parts;
    };

    std::vector<Item> pool;
    for (const auto& d : stream.detections) {
        if (!o.has_concept(d.concept) || o.top_category(d.concept) != "Object") continue;
        Item it;
        it.concept = d.concept;
        if (d.x && d.y) {
            it.x = *d.x;
            it.y = *d.y;
            it.has_pos = true;
        }
        it.members = {d.id};
        it.shape = {d.id};
        pool.push_back(it);
    }

    std::vector<std::string> order;  // And nodes, children first
    {
        std::set<std::string> seen;
        std::function<void(const std::string&)> visit = [&](const std::string& id) {
            if (!seen.insert(id).second) return;
            for (const auto& c : g.node(id).children) visit(c);
            if (g.node(id).kind == AogKind::And && g.node(id).dim == 'S') order.push_back(id);
        };
        for (const auto& [id, n] : g.nodes())
            if (n.dim == 'S') visit(id);
    }

    std::vector<Item> composed;
    for (const auto& aid : order) {
        const AogNode& a = g.node(aid);
        std::vector<std::vector<const Item*>> slot_cands(a.children.size());
        bool feasible = true;
        for (std::size_t s = 0; s < a.children.size(); ++s) {
            const std::string slot_concept = g.node(a.children[s]).concept;
            for (const auto& it : pool)
                if (o.is_subtype(it.concept, slot_concept)) slot_cands[s].push_back(&it);
            for (const auto& it : composed)
                if (o.is_subtype(it.concept, slot_concept)) slot_cands[s].push_back(&it);
            feasible &= !slot_cands[s].empty();
        }
        if (!feasible) continue;

        std::vector<const Item*> choice(a.children.size(), nullptr);
        std::vector<Item> fresh;
        std::function<void(std::size_t)> combine = [&](std::size_t s) {
            if (s == a.children.size()) {
                std::set<std::string> members;
                for (const auto* it : choice)
                    for (const auto& m : it->members) {
                        if (members.count(m)) return;  // a part used twice
                        members.insert(m);
                    }
                double spread = 0.0;
                for (std::size_t i = 0; i < choice.size(); ++i)
                    for (std::size_t j = i + 1; j < choice.size(); ++j)
                        if (choice[i]->has_pos && choice[j]->has_pos)
                            spread = std::max(spread, std::hypot(choice[i]->x - choice[j]->x,
                                                                 choice[i]->y - choice[j]->y));
                double e = cost.w_s * spread;
                for (const auto& r : a.relations) e += r.energy;
                for (const auto* it : choice) e += it->energy;
                if (e > cost.spatial_prune) return;

                Item it;
                it.and_id = aid;
                it.concept = a.concept;
                it.energy = e;
                it.members = members;
                double sx = 0.0, sy = 0.0;
                int np = 0;
                for (const auto* c : choice) {
                    if (c->has_pos) {
                        sx += c->x;
                        sy += c->y;
                        ++np;
                    }
                    it.parts.push_back(*c);
                    it.shape.insert(it.shape.end(), c->shape.begin(), c->shape.end());
                }
                if (np > 0) {
                    it.x = sx / np;
                    it.y = sy / np;
                    it.has_pos = true;
                }
                fresh.push_back(std::move(it));
                return;
            }
            for (const auto* cand : slot_cands[s]) {
                choice[s] = cand;
                combine(s + 1);
            }
        };
        combine(0);
        composed.insert(composed.end(), fresh.begin(), fresh.end());
    }

    std::sort(composed.begin(), composed.end(), [](const Item& a, const Item& b) {
        if (a.energy != b.energy) return a.energy < b.energy;
        return a.shape < b.shape;
    });
    std::set<std::string> used;
    std::vector<SpatialObject> out;
    int counter = 0;
    std::function<std::string(const Item&, ParseGraph*)> emit =
        [&](const Item& it, ParseGraph* pg) -> std::string {
        if (it.and_id.empty()) {
            const Detection& d = stream.by_id(*it.members.begin());
            if (!pg->has_node(d.id)) {
                PgNode n;
                n.id = d.id;
                n.concept = d.concept;
                n.at = d.annotation();
                pg->add_node(n);
            }
            return d.id;
        }
        PgNode n;
        n.id = detail::lower(it.concept) + "-s" + std::to_string(counter++);
        n.concept = it.concept;
        if (it.has_pos) {
            n.at.x = it.x;
            n.at.y = it.y;
        }
        pg->add_node(n);
        for (const auto& p : it.parts) pg->add_edge({emit(p, pg), n.id, "PartOf"});
        return n.id;
    };
    for (const auto& it : composed) {
        bool conflict = false;
        for (const auto& m : it.members) conflict |= used.count(m) > 0;
        if (conflict) continue;
        SpatialObject obj;
        obj.energy = it.energy;
        obj.head = emit(it, &obj.fragment);
        obj.members = it.members;
        out.push_back(std::move(obj));
        for (const auto& m : it.members) used.insert(m);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Temporal parsing: Earley chart with per-frame prediction, scanning and
// completion. Every complete top-level derivation is a candidate; maximal
// partial top-level derivations are emitted with missing-part penalties.

inline std::vector<CandidateParse> parse_temporal(const DetectionStream& stream, const StcAog& g,
                                                  const CostModel& cost, char dim = 'T') {
    std::vector<CandidateParse> out;
    std::set<std::string> seen;
    for (const auto& d : detail::temporal_derivations(stream, g, cost, dim)) {
        CandidateParse c = detail::render_derivation(d, stream, g, cost);
        std::string key = c.pg.canonical_dump() + detail::bits(c.energy);
        if (!seen.insert(key).second) continue;
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(), [](const CandidateParse& a, const CandidateParse& b) {
        if (a.energy != b.energy) return a.energy < b.energy;
        return a.signature < b.signature;
    });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i);
    return out;
}

// ---------------------------------------------------------------------------
// Causal parsing: explain each detected fluent change from the events ending
// inside the window right before it, via the causal grammar rooted there.

inline std::vector<CandidateParse> parse_causal(const std::vector<CandidateParse>& pgs,
                                                const DetectionStream& fluent_detections,
                                                const StcAog& g, const CostModel& cost) {
    const Ontology& o = g.ontology();
    std::vector<CandidateParse> out = pgs;
    if (out.empty()) out.emplace_back();

    for (const auto& f : fluent_detections.detections) {
        if (!o.has_concept(f.concept) || o.top_category(f.concept) != "Fluent") continue;
        std::string entry = g.canonical(f.concept);
        std::vector<CandidateParse> next;
        for (const auto& cand : out) {
            std::vector<CandidateParse> variants;
            if (!entry.empty()) {
                for (const auto& h : g.or_closure(entry)) {
                    const AogNode& head = g.node(h.head);
                    if (head.kind != AogKind::And) continue;
                    CandidateParse v = cand;
                    PgNode fn;
                    fn.id = f.id;
                    fn.concept = f.concept;
                    fn.at = f.annotation();
                    fn.fluent_track = {{f.t0, 0.0}, {f.t1, 1.0}};
                    if (!v.pg.has_node(fn.id)) v.pg.add_node(fn);
                    double e = h.chain;
                    int matched = 0, missing = 0;
                    for (const auto& slot_id : head.children) {
                        const AogNode& slot = g.node(slot_id);
                        std::string found;
                        if (o.has_concept(slot.concept) &&
                            o.top_category(slot.concept) == "Fluent") {
                            for (const auto& fd : fluent_detections.detections) {
                                if (fd.id == f.id) continue;
                                if (!o.is_subtype(fd.concept, slot.concept)) continue;
                                if (fd.t0 > f.t1 || fd.t1 < f.t0 - cost.causal_window) continue;
                                if (!v.pg.has_node(fd.id)) {
                                    PgNode cn;
                                    cn.id = fd.id;
                                    cn.concept = fd.concept;
                                    cn.at = fd.annotation();
                                    v.pg.add_node(cn);
                                    v.likelihood_energy += -std::log(fd.confidence);
                                    v.incorporated.insert(fd.id);
                                }
                                found = fd.id;
                                break;
                            }
                        } else {
                            double best_end = -1.0;
                            for (const auto& [nid, n] : cand.pg.nodes()) {
                                if (!o.has_concept(n.concept)) continue;
                                if (!o.is_subtype(n.concept, slot.concept)) continue;
                                if (!n.at.t1) continue;
                                double end = *n.at.t1;
                                if (end > f.t1 + 1e-9 || end < f.t0 - cost.causal_window)
                                    continue;
                                if (found.empty() || end > best_end) {
                                    found = nid;
                                    best_end = end;
                                }
                            }
                        }
                        if (found.empty()) {
                            ++missing;
                        } else {
                            ++matched;
                            v.pg.add_edge({found, f.id, "Causal"});
                        }
                    }
                    for (const auto& r : head.relations) e += r.energy;
                    e += g.missing_part_energy * missing;
                    v.grammar_energy += e;
                    v.likelihood_energy += -std::log(f.confidence);
                    v.incorporated.insert(f.id);
                    v.energy = v.grammar_energy + v.likelihood_energy;
                    v.signature = cand.signature + "|" + f.id + ":" + h.head;
                    if (matched > 0) variants.push_back(std::move(v));
                }
            }
            if (variants.empty()) {
                // no cause in the window: keep the change, pay the penalty
                CandidateParse v = cand;
                PgNode fn;
                fn.id = f.id;
                fn.concept = f.concept;
                fn.at = f.annotation();
                fn.fluent_track = {{f.t0, 0.0}, {f.t1, 1.0}};
                if (!v.pg.has_node(fn.id)) v.pg.add_node(fn);
                v.grammar_energy += g.missing_part_energy;
                v.likelihood_energy += -std::log(f.confidence);
                v.incorporated.insert(f.id);
                v.energy = v.grammar_energy + v.likelihood_energy;
                v.signature = cand.signature + "|" + f.id + ":unexplained";
                variants.push_back(std::move(v));
            }
            for (auto& v : variants) next.push_back(std::move(v));
        }
        out = std::move(next);
    }

    std::sort(out.begin(), out.end(), [](const CandidateParse& a, const CandidateParse& b) {
        if (a.energy != b.energy) return a.energy < b.energy;
        return a.signature < b.signature;
    });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i);
    return out;
}

// ---------------------------------------------------------------------------
// Full video parsing: spatial, temporal and causal stages combined into scene
// interpretations, ranked by grammar energy plus detection likelihood.

inline std::vector<CandidateParse> parse_video(const DetectionStream& stream, const StcAog& g,
                                               const CostModel& cost, int k) {
    if (k < 1) throw Error("parse_video requires k >= 1");
    const Ontology& o = g.ontology();

    DetectionStream objects, fluents;
    objects.frame_rate = fluents.frame_rate = stream.frame_rate;
    objects.scene_id = fluents.scene_id = stream.scene_id;
    std::set<std::string> event_ids;
    for (const auto& d : stream.detections) {
        std::string cat = o.has_concept(d.concept) ? o.top_category(d.concept) : "";
        if (cat == "Event") event_ids.insert(d.id);
        else if (cat == "Fluent") fluents.detections.push_back(d);
        else objects.detections.push_back(d);
    }

    std::vector<SpatialObject> spatial = parse_spatial(objects, g, cost);
    std::vector<detail::TemporalDeriv> derivs =
        detail::temporal_derivations(stream, g, cost, 'T');

    // Enumerate compatible derivation subsets (conflict: an event detection
    // bound by two chosen derivations), capped best-first.
    struct Scene {
        std::vector<std::size_t> chosen;
        std::set<std::string> bound;
        double acc = 0.0;
    };
    std::vector<Scene> frontier = {{}};
    for (std::size_t i = 0; i < derivs.size(); ++i) {
        std::vector<Scene> next;
        for (const auto& sc : frontier) {
            next.push_back(sc);
            bool conflict = false;
            for (const auto& id : derivs[i].events_bound)
                conflict |= sc.bound.count(id) > 0;
            if (conflict) continue;
            Scene ext = sc;
            ext.chosen.push_back(i);
            for (const auto& id : derivs[i].events_bound) ext.bound.insert(id);
            ext.acc += derivs[i].e_stc;
            next.push_back(std::move(ext));
        }
        std::sort(next.begin(), next.end(), [](const Scene& a, const Scene& b) {
            // prefer covering more detections at lower accumulated energy
            if (a.bound.size() != b.bound.size()) return a.bound.size() > b.bound.size();
            if (a.acc != b.acc) return a.acc < b.acc;
            return a.chosen < b.chosen;
        });
        if (static_cast<int>(next.size()) > cost.max_scene_states)
            next.resize(cost.max_scene_states);
        frontier = std::move(next);
    }

    std::vector<CandidateParse> assembled;
    for (const auto& sc : frontier) {
        CandidateParse c;
        std::set<std::string> incorporated;
        detail::Assembler as{g, stream, &c.pg, &incorporated};
        for (const auto& obj : spatial) {
            for (const auto& [id, n] : obj.fragment.nodes())
                if (!c.pg.has_node(id)) c.pg.add_node(n);
            for (const auto& e : obj.fragment.edges()) c.pg.add_edge(e);
            for (const auto& m : obj.members) incorporated.insert(m);
        }
        std::string sig;
        for (std::size_t i : sc.chosen) {
            derivs[i].emit(&as);
            sig += derivs[i].signature + "&";
        }
        c.incorporated = std::move(incorporated);
        c.signature = sig.empty() ? "empty" : sig;
        assembled.push_back(std::move(c));
    }

    std::vector<CandidateParse> final_set;
    for (auto& c : assembled) {
        std::vector<CandidateParse> causal_in = {c};
        std::vector<CandidateParse> causal_out =
            fluents.detections.empty() ? causal_in : parse_causal(causal_in, fluents, g, cost);
        for (auto& v : causal_out) {
            double like = 0.0;
            for (const auto& d : stream.detections) {
                if (v.incorporated.count(d.id))
                    like += -std::log(d.confidence);
                else
                    like += cost.unexplained_penalty;
            }
            v.likelihood_energy = like;
            v.grammar_energy = g.energy_lenient(v.pg);
            v.energy = v.grammar_energy + v.likelihood_energy;
            final_set.push_back(std::move(v));
        }
    }

    std::sort(final_set.begin(), final_set.end(),
              [](const CandidateParse& a, const CandidateParse& b) {
                  if (a.energy != b.energy) return a.energy < b.energy;
                  return a.signature < b.signature;
              });
    std::vector<CandidateParse> top;
    std::set<std::string> canon;
    for (auto& c : final_set) {
        if (static_cast<int>(top.size()) >= k) break;
        if (!canon.insert(c.pg.canonical_dump()).second) continue;
        c.rank = static_cast<int>(top.size());
        top.push_back(std::move(c));
    }
    return top;
}

}  // namespace stcpg

#endif  // STCPG_VIDEO_PARSER_HPP
