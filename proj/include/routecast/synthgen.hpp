#pragma once

#include "routecast/rng.hpp"
#include "routecast/trips.hpp"

#include <iosfwd>
#include <span>

namespace routecast {

struct GridNode {
    int x = 0;
    int y = 0;

    bool operator==(const GridNode&) const = default;
};

// Directed grid road network: nodes at integer coordinates, one segment per
// ordered pair of 4-neighbors. Segment ids are stable functions of the
// endpoints, so identical dimensions always yield identical networks.
class RoadNetwork {
public:
    static RoadNetwork grid(int width, int height);  // throws unless both >= 2

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t node_count() const;
    std::size_t segment_count() const;  // 2*(W*(H-1) + H*(W-1))

    bool in_bounds(GridNode n) const;
    static bool adjacent(GridNode a, GridNode b);
    SegmentId segment_id(GridNode from, GridNode to) const;  // throws unless adjacent

private:
    int width_ = 0;
    int height_ = 0;
};

struct GenConfig {
    int grid_width = 20;
    int grid_height = 20;
    int n_pois = 7;
    int od_pairs = 17;       // OD pairs that receive routes (<= C(n_pois, 2))
    int routes_per_od = 3;   // up to this many distinct routes per pair
    int trips_total = 781;
    double p_drop = 0.02;     // per-interior-segment dropout probability
    double p_spurious = 0.01; // per-gap fresh off-network segment insertion
    std::uint64_t seed = 1;

    void validate() const;
};

struct Route {
    std::string route_id;
    std::string origin_poi;
    std::string destination_poi;
    std::vector<SegmentId> segments;
};

struct PoiSite {
    std::string name;
    GridNode node;
};

struct RoutePlan {
    std::vector<PoiSite> pois;
    std::vector<std::pair<std::string, std::string>> od_pairs;  // ordered (origin, dest)
    std::vector<Route> routes;
    std::vector<std::string> warnings;
};

// Places POIs and generates up to routes_per_od pairwise-distinct simple
// routes per selected OD pair: a random shortest (staircase) path plus
// alternates through random waypoints. Routes that cannot be made
// sufficiently dissimilar are skipped with a warning.
RoutePlan generate_routes(const RoadNetwork& net, const GenConfig& cfg, Rng& rng);

// Draws trips_total trips, each a uniformly chosen route with per-segment
// dropout (never the first or last segment) and fresh spurious segment
// insertions, timestamped at one segment per 10 s with +-2 s jitter.
// Ground-truth OD and route labels are attached to every trip.
History generate_trips(std::span<const Route> routes, const GenConfig& cfg, Rng& rng);

struct Corpus {
    History history;
    RoutePlan plan;
};

Corpus generate_corpus(const GenConfig& cfg);

// Ground-truth JSON: {pois, od_pairs, routes, labels}.
void save_ground_truth(std::ostream& out, const Corpus& corpus);

}  // namespace routecast
