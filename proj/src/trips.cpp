#include "routecast/trips.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

namespace routecast {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
    throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

Trip parse_trip_record(const json& rec, std::size_t line_no) {
    if (!rec.is_object()) {
        fail_line(line_no, "record is not a JSON object");
    }
    Trip t;
    if (!rec.contains("trip_id") || !rec["trip_id"].is_string()) {
        fail_line(line_no, "missing or non-string field 'trip_id'");
    }
    t.trip_id = rec["trip_id"].get<std::string>();
    if (t.trip_id.empty()) {
        fail_line(line_no, "empty trip_id");
    }

    if (!rec.contains("timestamps") || !rec["timestamps"].is_array()) {
        fail_line(line_no, "missing or non-array field 'timestamps'");
    }
    if (!rec.contains("segments") || !rec["segments"].is_array()) {
        fail_line(line_no, "missing or non-array field 'segments'");
    }
    for (const auto& v : rec["timestamps"]) {
        if (!v.is_number()) {
            fail_line(line_no, "non-numeric timestamp");
        }
        t.timestamps.push_back(v.get<double>());
    }
    for (const auto& v : rec["segments"]) {
        if (!v.is_string() || v.get<std::string>().empty()) {
            fail_line(line_no, "segment ids must be non-empty strings");
        }
        t.segments.push_back(v.get<std::string>());
    }

    if (t.timestamps.size() != t.segments.size()) {
        fail_line(line_no, "timestamps/segments length mismatch (" +
                               std::to_string(t.timestamps.size()) + " vs " +
                               std::to_string(t.segments.size()) + ")");
    }
    if (t.segments.empty()) {
        fail_line(line_no, "trip must contain at least one segment");
    }
    for (std::size_t i = 0; i < t.timestamps.size(); ++i) {
        if (t.timestamps[i] < 0.0) {
            fail_line(line_no, "negative timestamp");
        }
        if (i > 0 && t.timestamps[i] < t.timestamps[i - 1]) {
            fail_line(line_no, "timestamps must be monotone non-decreasing");
        }
    }

    const auto optional_string = [&](const char* field) -> std::optional<std::string> {
        if (!rec.contains(field) || rec[field].is_null()) {
            return std::nullopt;
        }
        if (!rec[field].is_string()) {
            fail_line(line_no, std::string("field '") + field + "' must be a string");
        }
        return rec[field].get<std::string>();
    };
    t.origin_poi = optional_string("origin_poi");
    t.destination_poi = optional_string("destination_poi");
    t.cluster_id = optional_string("cluster_id");
    return t;
}

}  // namespace

History parse_trips(std::istream& in) {
    History h;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            fail_line(line_no, std::string("malformed JSON: ") + e.what());
        }
        Trip t = parse_trip_record(rec, line_no);
        if (!seen_ids.insert(t.trip_id).second) {
            fail_line(line_no, "duplicate trip_id '" + t.trip_id + "'");
        }
        h.trips.push_back(std::move(t));
    }
    return h;
}

void write_trips(std::ostream& out, const History& h) {
    for (const Trip& t : h.trips) {
        ordered_json rec;
        rec["trip_id"] = t.trip_id;
        rec["timestamps"] = t.timestamps;
        rec["segments"] = t.segments;
        if (t.origin_poi) {
            rec["origin_poi"] = *t.origin_poi;
        }
        if (t.destination_poi) {
            rec["destination_poi"] = *t.destination_poi;
        }
        if (t.cluster_id) {
            rec["cluster_id"] = *t.cluster_id;
        }
        out << rec.dump() << '\n';
    }
}

Trip dedup_consecutive(const Trip& t) {
    Trip out;
    out.trip_id = t.trip_id;
    out.origin_poi = t.origin_poi;
    out.destination_poi = t.destination_poi;
    out.cluster_id = t.cluster_id;
    for (std::size_t i = 0; i < t.segments.size(); ++i) {
        if (i == 0 || t.segments[i] != out.segments.back()) {
            out.segments.push_back(t.segments[i]);
            out.timestamps.push_back(t.timestamps[i]);
        }
    }
    return out;
}

History dedup_history(History h) {
    for (Trip& t : h.trips) {
        t = dedup_consecutive(t);
    }
    return h;
}

Lexicon Lexicon::build(const History& history) {
    if (history.trips.empty()) {
        throw std::invalid_argument("Lexicon::build: empty history");
    }
    std::vector<const Trip*> order;
    order.reserve(history.trips.size());
    for (const Trip& t : history.trips) {
        order.push_back(&t);
    }
    std::sort(order.begin(), order.end(),
              [](const Trip* a, const Trip* b) { return a->trip_id < b->trip_id; });

    Lexicon lex;
    for (const Trip* t : order) {
        for (const SegmentId& s : t->segments) {
            if (lex.index_.emplace(s, static_cast<StateIndex>(lex.ordered_.size())).second) {
                lex.ordered_.push_back(s);
            }
        }
    }
    return lex;
}

Lexicon Lexicon::from_segments(std::vector<SegmentId> ordered) {
    Lexicon lex;
    lex.ordered_ = std::move(ordered);
    for (std::size_t i = 0; i < lex.ordered_.size(); ++i) {
        if (!lex.index_.emplace(lex.ordered_[i], static_cast<StateIndex>(i)).second) {
            throw std::invalid_argument("Lexicon::from_segments: duplicate segment '" +
                                        lex.ordered_[i] + "'");
        }
    }
    return lex;
}

std::vector<StateIndex> encode_trip(const Trip& t, const Lexicon& lexicon) {
    std::vector<StateIndex> out;
    out.reserve(t.segments.size());
    for (const SegmentId& s : t.segments) {
        out.push_back(lexicon.encode(s));
    }
    return out;
}

ClusterSet load_cluster_set(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("cluster set: malformed JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("clusters") || !doc["clusters"].is_array()) {
        throw ParseError("cluster set: expected object with 'clusters' array");
    }
    ClusterSet cs;
    std::unordered_set<std::string> seen;
    for (const auto& c : doc["clusters"]) {
        if (!c.is_object() || !c.contains("cluster_id") || !c["cluster_id"].is_string() ||
            !c.contains("trip_ids") || !c["trip_ids"].is_array()) {
            throw ParseError("cluster set: each cluster needs cluster_id and trip_ids");
        }
        ClusterSet::Cluster cluster;
        cluster.cluster_id = c["cluster_id"].get<std::string>();
        if (!seen.insert(cluster.cluster_id).second) {
            throw ParseError("cluster set: duplicate cluster_id '" + cluster.cluster_id + "'");
        }
        for (const auto& id : c["trip_ids"]) {
            if (!id.is_string()) {
                throw ParseError("cluster set: trip_ids must be strings");
            }
            cluster.trip_ids.push_back(id.get<std::string>());
        }
        cs.clusters.push_back(std::move(cluster));
    }
    return cs;
}

void save_cluster_set(std::ostream& out, const ClusterSet& cs) {
    ordered_json doc;
    doc["clusters"] = ordered_json::array();
    for (const auto& c : cs.clusters) {
        ordered_json entry;
        entry["cluster_id"] = c.cluster_id;
        entry["trip_ids"] = c.trip_ids;
        doc["clusters"].push_back(std::move(entry));
    }
    out << doc.dump(2) << '\n';
}

void validate_partition(const ClusterSet& cs, const History& h) {
    std::unordered_map<std::string, const std::string*> assignment;
    for (const auto& c : cs.clusters) {
        for (const auto& id : c.trip_ids) {
            if (!assignment.emplace(id, &c.cluster_id).second) {
                throw std::invalid_argument("cluster set: trip '" + id +
                                            "' assigned to more than one cluster");
            }
        }
    }
    for (const Trip& t : h.trips) {
        if (assignment.erase(t.trip_id) == 0) {
            throw std::invalid_argument("cluster set: trip '" + t.trip_id +
                                        "' is missing from the clustering");
        }
    }
    if (!assignment.empty()) {
        throw std::invalid_argument("cluster set: unknown trip_id '" +
                                    assignment.begin()->first + "'");
    }
}

}  // namespace routecast
