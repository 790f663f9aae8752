#include "routecast/synthgen.hpp"

#include "routecast/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace routecast {

RoadNetwork RoadNetwork::grid(int width, int height) {
    if (width < 2 || height < 2) {
        throw std::invalid_argument("RoadNetwork::grid: width and height must be >= 2");
    }
    RoadNetwork net;
    net.width_ = width;
    net.height_ = height;
    return net;
}

std::size_t RoadNetwork::node_count() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
}

std::size_t RoadNetwork::segment_count() const {
    const std::size_t w = static_cast<std::size_t>(width_);
    const std::size_t h = static_cast<std::size_t>(height_);
    return 2 * (w * (h - 1) + h * (w - 1));
}

bool RoadNetwork::in_bounds(GridNode n) const {
    return n.x >= 0 && n.x < width_ && n.y >= 0 && n.y < height_;
}

bool RoadNetwork::adjacent(GridNode a, GridNode b) {
    return std::abs(a.x - b.x) + std::abs(a.y - b.y) == 1;
}

SegmentId RoadNetwork::segment_id(GridNode from, GridNode to) const {
    if (!in_bounds(from) || !in_bounds(to) || !adjacent(from, to)) {
        throw std::invalid_argument("segment_id: endpoints must be adjacent in-bounds nodes");
    }
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%d_%d>%d_%d", from.x, from.y, to.x, to.y);
    return SegmentId(buf);
}

void GenConfig::validate() const {
    if (grid_width < 2 || grid_height < 2) {
        throw std::invalid_argument("gen config: grid dimensions must be >= 2");
    }
    if (n_pois < 2) {
        throw std::invalid_argument("gen config: need at least 2 POIs");
    }
    if (static_cast<std::size_t>(n_pois) > RoadNetwork::grid(grid_width, grid_height).node_count()) {
        throw std::invalid_argument("gen config: more POIs than grid nodes");
    }
    if (od_pairs < 1) {
        throw std::invalid_argument("gen config: need at least one OD pair");
    }
    if (routes_per_od < 1 || routes_per_od > 3) {
        throw std::invalid_argument("gen config: routes_per_od must be 1..3");
    }
    if (trips_total < 1) {
        throw std::invalid_argument("gen config: need at least one trip");
    }
    if (p_drop < 0 || p_drop > 0.5 || p_spurious < 0 || p_spurious > 0.5) {
        throw std::invalid_argument("gen config: noise probabilities must lie in [0, 0.5]");
    }
}

namespace {

// Minimum pairwise dissimilarity enforced between generated routes so that a
// 0.3-threshold route clustering recovers them exactly on a noiseless corpus.
constexpr double kSameOdMargin = 0.45;
constexpr double kGlobalMargin = 0.35;

int manhattan(GridNode a, GridNode b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

// Uniformly random monotone lattice path; every such path is a shortest path.
std::vector<GridNode> staircase(GridNode from, GridNode to, Rng& rng) {
    std::vector<GridNode> nodes{from};
    GridNode cur = from;
    int dx = std::abs(to.x - cur.x);
    int dy = std::abs(to.y - cur.y);
    const int sx = to.x > cur.x ? 1 : -1;
    const int sy = to.y > cur.y ? 1 : -1;
    while (dx > 0 || dy > 0) {
        const bool step_x =
            dy == 0 ||
            (dx > 0 && rng.below(static_cast<std::uint64_t>(dx + dy)) <
                           static_cast<std::uint64_t>(dx));
        if (step_x) {
            cur.x += sx;
            --dx;
        } else {
            cur.y += sy;
            --dy;
        }
        nodes.push_back(cur);
    }
    return nodes;
}

// Removes cycles from a node walk: on a repeated node the loop in between is
// cut, leaving a simple path with the same endpoints.
std::vector<GridNode> splice_loops(const std::vector<GridNode>& walk) {
    std::vector<GridNode> path;
    std::unordered_map<long long, std::size_t> pos;
    const auto key = [](GridNode n) {
        return (static_cast<long long>(n.x) << 32) | static_cast<unsigned>(n.y);
    };
    for (const GridNode& n : walk) {
        const auto it = pos.find(key(n));
        if (it != pos.end()) {
            for (std::size_t i = it->second + 1; i < path.size(); ++i) {
                pos.erase(key(path[i]));
            }
            path.resize(it->second + 1);
        } else {
            pos.emplace(key(n), path.size());
            path.push_back(n);
        }
    }
    return path;
}

std::vector<SegmentId> nodes_to_segments(const RoadNetwork& net,
                                         const std::vector<GridNode>& nodes) {
    std::vector<SegmentId> out;
    out.reserve(nodes.size() - 1);
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        out.push_back(net.segment_id(nodes[i - 1], nodes[i]));
    }
    return out;
}

double segment_set_dissimilarity(const std::vector<SegmentId>& a,
                                 const std::vector<SegmentId>& b) {
    const std::unordered_set<SegmentId> sa(a.begin(), a.end());
    std::uint64_t both = 0;
    std::unordered_set<SegmentId> sb(b.begin(), b.end());
    for (const SegmentId& s : sb) {
        both += sa.count(s);
    }
    const std::uint64_t either = sa.size() + sb.size() - both;
    return either == 0 ? 0.0 : 1.0 - static_cast<double>(both) / static_cast<double>(either);
}

std::vector<PoiSite> place_pois(const RoadNetwork& net, int n_pois, Rng& rng) {
    // Rejection sampling with a minimum pairwise Manhattan separation keeps
    // destinations distinguishable; the bound relaxes if the grid is tight.
    int min_sep = std::max(2, (net.width() + net.height()) / 4);
    std::vector<PoiSite> pois;
    while (true) {
        pois.clear();
        int attempts = 0;
        while (static_cast<int>(pois.size()) < n_pois && attempts < 1000) {
            ++attempts;
            const GridNode cand{static_cast<int>(rng.below(net.width())),
                                static_cast<int>(rng.below(net.height()))};
            bool ok = true;
            for (const PoiSite& p : pois) {
                if (manhattan(p.node, cand) < min_sep) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                char name[16];
                std::snprintf(name, sizeof(name), "poi%zu", pois.size());
                pois.push_back({name, cand});
            }
        }
        if (static_cast<int>(pois.size()) == n_pois) {
            return pois;
        }
        if (min_sep <= 2) {
            throw std::runtime_error("place_pois: grid too small for requested POIs");
        }
        min_sep = std::max(2, min_sep * 3 / 4);
    }
}

}  // namespace

RoutePlan generate_routes(const RoadNetwork& net, const GenConfig& cfg, Rng& rng) {
    RoutePlan plan;
    plan.pois = place_pois(net, cfg.n_pois, rng);

    std::vector<std::pair<int, int>> all_pairs;
    for (int i = 0; i < cfg.n_pois; ++i) {
        for (int j = i + 1; j < cfg.n_pois; ++j) {
            all_pairs.emplace_back(i, j);
        }
    }
    rng.shuffle(all_pairs);
    const std::size_t n_pairs =
        std::min<std::size_t>(all_pairs.size(), static_cast<std::size_t>(cfg.od_pairs));
    if (n_pairs < static_cast<std::size_t>(cfg.od_pairs)) {
        plan.warnings.push_back("requested more OD pairs than available; using " +
                                std::to_string(n_pairs));
    }

    const auto route_ok = [&](const std::vector<SegmentId>& cand,
                              const std::vector<const Route*>& same_od) {
        for (const Route& r : plan.routes) {
            if (segment_set_dissimilarity(cand, r.segments) <= kGlobalMargin) {
                return false;
            }
        }
        for (const Route* r : same_od) {
            if (segment_set_dissimilarity(cand, r->segments) <= kSameOdMargin) {
                return false;
            }
        }
        return true;
    };

    for (std::size_t p = 0; p < n_pairs; ++p) {
        auto [ia, ib] = all_pairs[p];
        if (rng.bernoulli(0.5)) {
            std::swap(ia, ib);
        }
        const PoiSite& origin = plan.pois[static_cast<std::size_t>(ia)];
        const PoiSite& dest = plan.pois[static_cast<std::size_t>(ib)];
        plan.od_pairs.emplace_back(origin.name, dest.name);

        std::vector<const Route*> same_od;
        for (int r = 0; r < cfg.routes_per_od; ++r) {
            std::vector<SegmentId> segments;
            bool found = false;
            for (int attempt = 0; attempt < 80 && !found; ++attempt) {
                std::vector<GridNode> nodes;
                if (r == 0) {
                    // Base route: a (random) shortest path.
                    nodes = staircase(origin.node, dest.node, rng);
                } else {
                    // Alternate route via a random waypoint; loops spliced out.
                    const GridNode w{static_cast<int>(rng.below(net.width())),
                                     static_cast<int>(rng.below(net.height()))};
                    if (w == origin.node || w == dest.node) {
                        continue;
                    }
                    std::vector<GridNode> walk = staircase(origin.node, w, rng);
                    const std::vector<GridNode> tail = staircase(w, dest.node, rng);
                    walk.insert(walk.end(), tail.begin() + 1, tail.end());
                    nodes = splice_loops(walk);
                }
                if (nodes.size() < 3) {
                    continue;
                }
                std::vector<SegmentId> cand = nodes_to_segments(net, nodes);
                if (r == 0 ? !route_ok(cand, {}) : !route_ok(cand, same_od)) {
                    continue;
                }
                segments = std::move(cand);
                found = true;
            }
            if (!found) {
                if (r == 0) {
                    // A base route is mandatory; accept the plain staircase.
                    segments = nodes_to_segments(net, staircase(origin.node, dest.node, rng));
                    plan.warnings.push_back("base route for " + origin.name + "->" +
                                            dest.name + " overlaps an existing corridor");
                } else {
                    plan.warnings.push_back("only " + std::to_string(r) +
                                            " sufficiently distinct route(s) for " +
                                            origin.name + "->" + dest.name);
                    break;
                }
            }
            char rid[16];
            std::snprintf(rid, sizeof(rid), "R%02zu", plan.routes.size());
            plan.routes.push_back(Route{rid, origin.name, dest.name, std::move(segments)});
            same_od.push_back(&plan.routes.back());
        }
    }
    return plan;
}

History generate_trips(std::span<const Route> routes, const GenConfig& cfg, Rng& rng) {
    if (routes.empty()) {
        throw std::invalid_argument("generate_trips: no routes");
    }
    History h;
    h.trips.reserve(static_cast<std::size_t>(cfg.trips_total));
    std::uint64_t spurious_counter = 0;

    for (int i = 0; i < cfg.trips_total; ++i) {
        const Route& route = routes[rng.below(routes.size())];
        Trip t;
        char tid[16];
        std::snprintf(tid, sizeof(tid), "t%05d", i);
        t.trip_id = tid;
        t.origin_poi = route.origin_poi;
        t.destination_poi = route.destination_poi;
        t.cluster_id = route.route_id;

        // Dropout never removes the first or last segment.
        std::vector<SegmentId> segments;
        segments.reserve(route.segments.size());
        for (std::size_t s = 0; s < route.segments.size(); ++s) {
            const bool interior = s > 0 && s + 1 < route.segments.size();
            if (interior && rng.bernoulli(cfg.p_drop)) {
                continue;
            }
            segments.push_back(route.segments[s]);
        }
        // Fresh spurious ids, one per interior gap at most.
        std::vector<SegmentId> noisy;
        noisy.reserve(segments.size() + 2);
        for (std::size_t s = 0; s < segments.size(); ++s) {
            noisy.push_back(segments[s]);
            if (s + 1 < segments.size() && rng.bernoulli(cfg.p_spurious)) {
                char sid[24];
                std::snprintf(sid, sizeof(sid), "noise%06llu",
                              static_cast<unsigned long long>(spurious_counter++));
                noisy.push_back(sid);
            }
        }
        t.segments = std::move(noisy);

        t.timestamps.reserve(t.segments.size());
        for (std::size_t s = 0; s < t.segments.size(); ++s) {
            const double jitter = s == 0 ? rng.unit() * 2.0 : rng.unit() * 4.0 - 2.0;
            t.timestamps.push_back(10.0 * static_cast<double>(s) + jitter);
        }
        h.trips.push_back(std::move(t));
    }
    return h;
}

Corpus generate_corpus(const GenConfig& cfg) {
    cfg.validate();
    const RoadNetwork net = RoadNetwork::grid(cfg.grid_width, cfg.grid_height);
    Rng root(cfg.seed);
    Rng route_rng = root.fork(1);
    Rng trip_rng = root.fork(2);

    Corpus corpus;
    corpus.plan = generate_routes(net, cfg, route_rng);
    corpus.history = generate_trips(corpus.plan.routes, cfg, trip_rng);
    return corpus;
}

void save_ground_truth(std::ostream& out, const Corpus& corpus) {
    nlohmann::ordered_json doc;
    doc["pois"] = nlohmann::ordered_json::object();
    for (const PoiSite& p : corpus.plan.pois) {
        doc["pois"][p.name] = {p.node.x, p.node.y};
    }
    doc["od_pairs"] = nlohmann::ordered_json::array();
    for (const auto& [o, d] : corpus.plan.od_pairs) {
        doc["od_pairs"].push_back({o, d});
    }
    doc["routes"] = nlohmann::ordered_json::array();
    for (const Route& r : corpus.plan.routes) {
        nlohmann::ordered_json jr;
        jr["route_id"] = r.route_id;
        jr["origin_poi"] = r.origin_poi;
        jr["destination_poi"] = r.destination_poi;
        jr["segments"] = r.segments;
        doc["routes"].push_back(std::move(jr));
    }
    doc["labels"] = nlohmann::ordered_json::object();
    for (const Trip& t : corpus.history.trips) {
        nlohmann::ordered_json lbl;
        lbl["od"] = *t.origin_poi + "->" + *t.destination_poi;
        lbl["route"] = *t.cluster_id;
        doc["labels"][t.trip_id] = std::move(lbl);
    }
    out << doc.dump(2) << '\n';
}

}  // namespace routecast
