#include "routecast/clustering.hpp"

#include "routecast/kernels.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>
#include <unordered_set>

namespace routecast {

ClusteringMode parse_clustering_mode(std::string_view s) {
    if (s == "od") {
        return ClusteringMode::od;
    }
    if (s == "route") {
        return ClusteringMode::route;
    }
    throw std::invalid_argument("unknown clustering mode '" + std::string(s) + "'");
}

std::string_view to_string(ClusteringMode m) {
    return m == ClusteringMode::od ? "od" : "route";
}

SimilarityMode parse_similarity_mode(std::string_view s) {
    if (s == "jaccard") {
        return SimilarityMode::jaccard;
    }
    if (s == "shared-over-sum" || s == "shared_over_sum") {
        return SimilarityMode::shared_over_sum;
    }
    throw std::invalid_argument("unknown similarity mode '" + std::string(s) + "'");
}

std::string_view to_string(SimilarityMode m) {
    return m == SimilarityMode::jaccard ? "jaccard" : "shared-over-sum";
}

namespace {

double dissimilarity_from_counts(std::uint64_t both, std::uint64_t size_a,
                                 std::uint64_t size_b, std::uint64_t either,
                                 SimilarityMode mode) {
    if (mode == SimilarityMode::jaccard) {
        return either == 0 ? 0.0
                           : 1.0 - static_cast<double>(both) / static_cast<double>(either);
    }
    const std::uint64_t total = size_a + size_b;
    return total == 0 ? 0.0 : 1.0 - static_cast<double>(both) / static_cast<double>(total);
}

}  // namespace

double route_dissimilarity(const Trip& a, const Trip& b, SimilarityMode mode) {
    const std::unordered_set<SegmentId> sa(a.segments.begin(), a.segments.end());
    const std::unordered_set<SegmentId> sb(b.segments.begin(), b.segments.end());
    std::uint64_t both = 0;
    for (const SegmentId& s : sa) {
        both += sb.count(s);
    }
    const std::uint64_t either = sa.size() + sb.size() - both;
    return dissimilarity_from_counts(both, sa.size(), sb.size(), either, mode);
}

DissimilarityMatrix route_dissimilarity_matrix(const History& deduped, SimilarityMode mode) {
    const std::size_t n = deduped.trips.size();
    DissimilarityMatrix d;
    d.n = n;
    d.values.assign(n * n, 0.0);
    if (n == 0) {
        return d;
    }

    // Pack each trip's distinct segments into a bitset over the history's
    // segment universe; pair counts then reduce to AND/OR popcounts.
    const Lexicon lexicon = Lexicon::build(deduped);
    const std::size_t words = (lexicon.size() + 63) / 64;
    std::vector<std::vector<std::uint64_t>> bits(n, std::vector<std::uint64_t>(words, 0));
    std::vector<std::uint64_t> set_size(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (const SegmentId& s : deduped.trips[i].segments) {
            const StateIndex idx = lexicon.encode(s);
            std::uint64_t& word = bits[i][idx / 64];
            const std::uint64_t mask = 1ull << (idx % 64);
            if (!(word & mask)) {
                word |= mask;
                ++set_size[i];
            }
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto overlap = kernels::bitset_overlap(bits[i], bits[j]);
            d.set(i, j, dissimilarity_from_counts(overlap.both, set_size[i], set_size[j],
                                                  overlap.either, mode));
        }
    }
    return d;
}

ClusterSet hierarchical_cluster(const DissimilarityMatrix& d, double threshold,
                                std::span<const std::string> trip_ids,
                                std::string_view prefix) {
    if (d.n == 0) {
        throw std::invalid_argument("hierarchical_cluster: empty dissimilarity matrix");
    }
    if (!(threshold > 0.0) || !(threshold < 1.0)) {
        throw std::invalid_argument("hierarchical_cluster: threshold must lie in (0, 1)");
    }
    if (trip_ids.size() != d.n) {
        throw std::invalid_argument("hierarchical_cluster: trip_ids/matrix size mismatch");
    }

    const std::size_t n = d.n;
    std::vector<std::vector<std::size_t>> members(n);
    std::vector<bool> active(n, true);
    std::vector<double> link(d.values);  // average linkage, updated in place
    for (std::size_t i = 0; i < n; ++i) {
        members[i] = {i};
    }

    for (;;) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = n, bj = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) {
                continue;
            }
            for (std::size_t j = i + 1; j < n; ++j) {
                if (active[j] && link[i * n + j] < best) {
                    best = link[i * n + j];
                    bi = i;
                    bj = j;
                }
            }
        }
        if (bi == n || best > threshold) {
            break;  // minimum linkage exceeds the cut, or one cluster left
        }

        // Lance-Williams update for average linkage: the merged cluster's
        // linkage to any other is the size-weighted mean.
        const double wa = static_cast<double>(members[bi].size());
        const double wb = static_cast<double>(members[bj].size());
        for (std::size_t k = 0; k < n; ++k) {
            if (k == bi || k == bj || !active[k]) {
                continue;
            }
            const double merged =
                (wa * link[bi * n + k] + wb * link[bj * n + k]) / (wa + wb);
            link[bi * n + k] = merged;
            link[k * n + bi] = merged;
        }
        members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
        members[bj].clear();
        active[bj] = false;
    }

    std::vector<std::vector<std::size_t>> finals;
    for (std::size_t i = 0; i < n; ++i) {
        if (active[i]) {
            std::sort(members[i].begin(), members[i].end());
            finals.push_back(std::move(members[i]));
        }
    }
    std::sort(finals.begin(), finals.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });

    ClusterSet cs;
    char buf[16];
    for (std::size_t c = 0; c < finals.size(); ++c) {
        std::snprintf(buf, sizeof(buf), "%03zu", c);
        ClusterSet::Cluster cluster;
        cluster.cluster_id = std::string(prefix) + buf;
        for (std::size_t idx : finals[c]) {
            cluster.trip_ids.push_back(trip_ids[idx]);
        }
        cs.clusters.push_back(std::move(cluster));
    }
    return cs;
}

ClusterSet cluster_by_od(const History& deduped) {
    if (deduped.trips.empty()) {
        throw std::invalid_argument("cluster_by_od: empty history");
    }
    std::size_t labeled = 0;
    for (const Trip& t : deduped.trips) {
        if (t.origin_poi && t.destination_poi) {
            ++labeled;
        }
    }
    if (labeled != 0 && labeled != deduped.trips.size()) {
        throw std::invalid_argument(
            "cluster_by_od: mixed labeling; either every trip carries origin_poi and "
            "destination_poi or none does");
    }
    const bool use_labels = labeled == deduped.trips.size();

    std::map<std::pair<std::string, std::string>, std::vector<std::string>> groups;
    for (const Trip& t : deduped.trips) {
        const std::pair<std::string, std::string> key =
            use_labels ? std::make_pair(*t.origin_poi, *t.destination_poi)
                       : std::make_pair(t.segments.front(), t.segments.back());
        groups[key].push_back(t.trip_id);
    }

    ClusterSet cs;
    std::unordered_set<std::string> used_ids;
    for (auto& [key, ids] : groups) {
        std::string cluster_id = key.first + "->" + key.second;
        while (!used_ids.insert(cluster_id).second) {
            cluster_id += "#";
        }
        std::sort(ids.begin(), ids.end());
        cs.clusters.push_back({std::move(cluster_id), std::move(ids)});
    }
    return cs;
}

ClusterSet cluster_history(const History& deduped, ClusteringMode mode,
                           double route_threshold, SimilarityMode similarity) {
    if (mode == ClusteringMode::od) {
        return cluster_by_od(deduped);
    }
    std::vector<std::string> trip_ids;
    trip_ids.reserve(deduped.trips.size());
    for (const Trip& t : deduped.trips) {
        trip_ids.push_back(t.trip_id);
    }
    const DissimilarityMatrix d = route_dissimilarity_matrix(deduped, similarity);
    return hierarchical_cluster(d, route_threshold, trip_ids);
}

}  // namespace routecast
