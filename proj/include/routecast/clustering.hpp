#pragma once

#include "routecast/trips.hpp"

#include <span>
#include <string_view>

namespace routecast {

enum class ClusteringMode { od, route };

ClusteringMode parse_clustering_mode(std::string_view s);
std::string_view to_string(ClusteringMode m);

// How trip similarity is read off the segment sets A, B:
//   jaccard:         sim = |A n B| / |A u B|   (identical trips -> 1)
//   shared_over_sum: sim = |A n B| / (|A| + |B|)
// Dissimilarity is 1 - sim in both cases.
enum class SimilarityMode { jaccard, shared_over_sum };

SimilarityMode parse_similarity_mode(std::string_view s);
std::string_view to_string(SimilarityMode m);

// Symmetric matrix of pairwise trip dissimilarities in [0, 1], zero diagonal.
struct DissimilarityMatrix {
    std::size_t n = 0;
    std::vector<double> values;  // row-major n*n

    double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
    void set(std::size_t i, std::size_t j, double v) {
        values[i * n + j] = v;
        values[j * n + i] = v;
    }
};

double route_dissimilarity(const Trip& a, const Trip& b,
                           SimilarityMode mode = SimilarityMode::jaccard);

// All-pairs dissimilarities over the history, via packed segment bitsets.
DissimilarityMatrix route_dissimilarity_matrix(const History& deduped,
                                               SimilarityMode mode = SimilarityMode::jaccard);

// Agglomerative clustering with average linkage; merging stops when the
// minimum inter-cluster linkage exceeds the threshold. Merge-order ties go to
// the lowest (i, j) index pair. Output clusters are named <prefix>NNN in
// order of their smallest trip index.
ClusterSet hierarchical_cluster(const DissimilarityMatrix& d, double threshold,
                                std::span<const std::string> trip_ids,
                                std::string_view prefix = "route_");

// Two trips share a cluster iff their origin and destination keys match:
// (origin_poi, destination_poi) when every trip carries both labels, else
// (first segment, last segment). Mixed labeling is an error.
ClusterSet cluster_by_od(const History& deduped);

ClusterSet cluster_history(const History& deduped, ClusteringMode mode,
                           double route_threshold = 0.3,
                           SimilarityMode similarity = SimilarityMode::jaccard);

}  // namespace routecast
