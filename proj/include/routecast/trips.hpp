#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace routecast {

// Opaque road-segment identifier (e.g. an OSM way id). Equality is exact
// string equality.
using SegmentId = std::string;

// Dense state index; the lexicon's unseen state u is a valid value.
using StateIndex = std::uint32_t;

struct Trip {
    std::string trip_id;
    std::vector<double> timestamps;   // seconds, monotone non-decreasing
    std::vector<SegmentId> segments;  // same length as timestamps, length >= 1
    std::optional<std::string> origin_poi;
    std::optional<std::string> destination_poi;
    std::optional<std::string> cluster_id;  // ground-truth label, when known

    std::size_t length() const { return segments.size(); }
};

struct History {
    std::vector<Trip> trips;
};

struct ClusterSet {
    struct Cluster {
        std::string cluster_id;
        std::vector<std::string> trip_ids;
    };
    std::vector<Cluster> clusters;

    std::size_t size() const { return clusters.size(); }
};

// Dense index over every segment seen in a training history, plus the
// reserved unseen state u == size(). Index order is first appearance over
// trips sorted by trip_id, so serialized models are byte-reproducible.
class Lexicon {
public:
    static Lexicon build(const History& history);
    static Lexicon from_segments(std::vector<SegmentId> ordered);

    StateIndex size() const { return static_cast<StateIndex>(ordered_.size()); }
    StateIndex unseen() const { return size(); }

    // Dense index of s, or unseen() when s never occurred in training.
    StateIndex encode(const SegmentId& s) const {
        const auto it = index_.find(s);
        return it == index_.end() ? unseen() : it->second;
    }

    const SegmentId& segment(StateIndex i) const { return ordered_.at(i); }
    const std::vector<SegmentId>& segments() const { return ordered_; }

private:
    std::vector<SegmentId> ordered_;
    std::unordered_map<SegmentId, StateIndex> index_;
};

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Reads trip-JSONL: one JSON object per line with fields trip_id,
// timestamps, segments and optional origin_poi/destination_poi/cluster_id.
// Throws ParseError naming the offending line. No dedup is applied.
History parse_trips(std::istream& in);

// Writes the same JSONL format, one LF-terminated line per trip.
void write_trips(std::ostream& out, const History& h);

// Collapses consecutive runs of equal segments to their first element,
// keeping that element's timestamp.
Trip dedup_consecutive(const Trip& t);
History dedup_history(History h);

// Maps each segment to its dense index, or to lexicon.unseen() when absent.
std::vector<StateIndex> encode_trip(const Trip& t, const Lexicon& lexicon);

ClusterSet load_cluster_set(std::istream& in);
void save_cluster_set(std::ostream& out, const ClusterSet& cs);

// Verifies that the clusters partition the history: every trip_id appears in
// exactly one cluster and no unknown trip_ids occur. Throws on violation.
void validate_partition(const ClusterSet& cs, const History& h);

}  // namespace routecast
