#ifndef STCPG_MATCHING_HPP
#define STCPG_MATCHING_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "stcpg/cost_model.hpp"
#include "stcpg/ontology.hpp"
#include "stcpg/parse_graph.hpp"

namespace stcpg {

// Combined semantic + temporal + spatial distance between two nodes.
inline double node_distance(const Ontology& o, const CostModel& cost, const PgNode& a,
                            const PgNode& b) {
    double d_o = o.semantic_distance(a.concept, b.concept);
    if (d_o >= kDisjointDistance) return kDisjointDistance;
    double d = cost.w_o * d_o;
    if (a.at.has_time() && b.at.has_time())
        d += cost.w_t * std::fabs(a.at.time_mid() - b.at.time_mid());
    if (a.at.has_space() && b.at.has_space())
        d += cost.w_s * std::hypot(*a.at.x - *b.at.x, *a.at.y - *b.at.y);
    return d;
}

inline double edge_distance(const Ontology& o, const CostModel& cost, const PgEdge& a,
                            const PgEdge& b) {
    double d_o = o.relation_distance(a.relation, b.relation);
    if (d_o >= kDisjointDistance) return kDisjointDistance;
    return cost.w_o * d_o;
}

struct Matching {
    std::vector<std::pair<std::string, std::string>> node_pairs;  // (id in a, id in b)
    std::vector<std::pair<PgEdge, PgEdge>> edge_pairs;
    double total_distance = 0.0;

    std::size_t matched_size() const { return node_pairs.size() + edge_pairs.size(); }
};

namespace detail {

struct MatchCandidate {
    std::string b_id;
    double dist;
};

struct MatchSearch {
    const ParseGraph& a;
    const ParseGraph& b;
    const Ontology& o;
    const CostModel& cost;

    std::vector<std::string> a_ids{};
    std::map<std::string, std::vector<MatchCandidate>> candidates{};

    std::map<std::string, std::string> assignment{};  // a id -> b id
    std::map<std::string, bool> b_used{};

    std::size_t best_count = 0;
    double best_dist = 0.0;
    Matching best{};
    bool have_best = false;

    // Edges of a matchable under a node assignment: endpoints matched and
    // relation within threshold. One-to-one per b edge, chosen greedily in
    // (distance, key) order: edge candidate sets are tiny once endpoints are
    // fixed.
    void score_edges(std::vector<std::pair<PgEdge, PgEdge>>* pairs, double* dist) const {
        std::map<std::string, bool> used;
        struct Option {
            double d;
            PgEdge ea, eb;
        };
        std::vector<Option> options;
        for (const auto& ea : a.edges()) {
            auto sa = assignment.find(ea.src);
            auto da = assignment.find(ea.dst);
            if (sa == assignment.end() || da == assignment.end()) continue;
            for (const auto& eb : b.edges()) {
                if (eb.src != sa->second || eb.dst != da->second) continue;
                double d = edge_distance(o, cost, ea, eb);
                if (d < cost.match_threshold) options.push_back({d, ea, eb});
            }
        }
        std::sort(options.begin(), options.end(), [](const Option& x, const Option& y) {
            if (x.d != y.d) return x.d < y.d;
            if (!(x.ea == y.ea)) return x.ea < y.ea;
            return x.eb < y.eb;
        });
        std::map<std::string, bool> a_used;
        for (const auto& opt : options) {
            if (a_used[opt.ea.key()] || used[opt.eb.key()]) continue;
            a_used[opt.ea.key()] = used[opt.eb.key()] = true;
            pairs->emplace_back(opt.ea, opt.eb);
            *dist += opt.d;
        }
    }

    void consider_leaf(double node_dist) {
        std::vector<std::pair<PgEdge, PgEdge>> epairs;
        double edist = 0.0;
        score_edges(&epairs, &edist);
        std::size_t count = assignment.size() + epairs.size();
        double dist = node_dist + edist;
        if (!have_best || count > best_count ||
            (count == best_count && dist < best_dist - 1e-12)) {
            have_best = true;
            best_count = count;
            best_dist = dist;
            best.node_pairs.assign(assignment.begin(), assignment.end());
            best.edge_pairs = epairs;
            best.total_distance = dist;
        }
    }

    std::vector<std::size_t> suffix_matchable;  // nodes with candidates at >= i
    std::size_t edge_cap = 0;

    // Upper bound on total matched elements from position i onward.
    std::size_t bound(std::size_t i) const {
        return assignment.size() + suffix_matchable[i] + edge_cap;
    }

    void dfs(std::size_t i, double node_dist) {
        if (have_best && bound(i) < best_count) return;
        if (i == a_ids.size()) {
            consider_leaf(node_dist);
            return;
        }
        const std::string& aid = a_ids[i];
        for (const auto& cand : candidates.at(aid)) {
            if (b_used[cand.b_id]) continue;
            assignment[aid] = cand.b_id;
            b_used[cand.b_id] = true;
            dfs(i + 1, node_dist + cand.dist);
            b_used[cand.b_id] = false;
            assignment.erase(aid);
        }
        dfs(i + 1, node_dist);  // leave unmatched
    }
};

}  // namespace detail

// One-to-one matching between the elements of two graphs maximizing matched
// element count and, among equals, minimizing total combined distance.
// Depth-first search over node assignments with count-bound pruning; only
// pairs below the match threshold are admissible. Deterministic: candidates
// ordered by (distance, id).
inline Matching match_subgraphs(const ParseGraph& a, const ParseGraph& b, const Ontology& o,
                                const CostModel& cost) {
    detail::MatchSearch s{a, b, o, cost};
    for (const auto& [id, _] : a.nodes()) s.a_ids.push_back(id);
    for (const auto& aid : s.a_ids) {
        std::vector<detail::MatchCandidate> cands;
        for (const auto& [bid, bn] : b.nodes()) {
            double d = node_distance(o, cost, a.node(aid), bn);
            if (d < cost.match_threshold) cands.push_back({bid, d});
        }
        std::sort(cands.begin(), cands.end(),
                  [](const detail::MatchCandidate& x, const detail::MatchCandidate& y) {
                      if (x.dist != y.dist) return x.dist < y.dist;
                      return x.b_id < y.b_id;
                  });
        s.candidates[aid] = cands;
    }
    // Nodes with candidates first keeps the search shallow on sparse overlaps.
    std::stable_sort(s.a_ids.begin(), s.a_ids.end(), [&](const std::string& x, const std::string& y) {
        return s.candidates.at(x).size() > s.candidates.at(y).size();
    });
    s.edge_cap = std::min(a.edges().size(), b.edges().size());
    s.suffix_matchable.assign(s.a_ids.size() + 1, 0);
    for (std::size_t i = s.a_ids.size(); i-- > 0;)
        s.suffix_matchable[i] =
            s.suffix_matchable[i + 1] + (s.candidates.at(s.a_ids[i]).empty() ? 0 : 1);
    s.dfs(0, 0.0);
    if (!s.have_best) return Matching{};
    std::sort(s.best.node_pairs.begin(), s.best.node_pairs.end());
    std::sort(s.best.edge_pairs.begin(), s.best.edge_pairs.end(),
              [](const auto& x, const auto& y) {
                  if (!(x.first == y.first)) return x.first < y.first;
                  return x.second < y.second;
              });
    return s.best;
}

}  // namespace stcpg

#endif  // STCPG_MATCHING_HPP
