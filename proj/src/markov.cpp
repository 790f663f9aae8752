#include "routecast/markov.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

namespace routecast {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

}  // namespace

PiMode parse_pi_mode(std::string_view s) {
    if (s == "ml") {
        return PiMode::ml;
    }
    if (s == "cluster-uniform" || s == "cluster_uniform") {
        return PiMode::cluster_uniform;
    }
    if (s == "global-uniform" || s == "global_uniform") {
        return PiMode::global_uniform;
    }
    throw std::invalid_argument("unknown pi mode '" + std::string(s) + "'");
}

std::string_view to_string(PiMode m) {
    switch (m) {
        case PiMode::ml: return "ml";
        case PiMode::cluster_uniform: return "cluster-uniform";
        case PiMode::global_uniform: return "global-uniform";
    }
    return "?";
}

StateSpace StateSpace::all(StateIndex n) {
    StateSpace s;
    s.n_ = n;
    s.limit_ = n + 1;  // u == n is a valid input
    return s;
}

StateSpace StateSpace::subset(std::vector<bool> member) {
    StateSpace s;
    s.member_ = std::move(member);
    s.n_ = static_cast<StateIndex>(std::count(s.member_.begin(), s.member_.end(), true));
    s.limit_ = static_cast<StateIndex>(s.member_.size()) + 1;
    return s;
}

SmoothingParams SmoothingParams::make(double epsilon, StateIndex n_states) {
    if (!(epsilon > 0)) {
        throw std::invalid_argument("smoothing epsilon must be positive");
    }
    SmoothingParams p;
    p.epsilon = epsilon;
    p.n_states = n_states;
    const double n = static_cast<double>(n_states);
    p.bar_epsilon = epsilon / (1.0 + (n + 1.0) * epsilon);
    p.row_denom = 1.0 + (n - 1.0) * epsilon;
    p.floor_seen = epsilon / p.row_denom;
    p.log_bar_epsilon = std::log(p.bar_epsilon);
    p.log_row_denom = std::log(p.row_denom);
    p.log_floor_seen = std::log(epsilon) - p.log_row_denom;
    p.log_row_uniform = n_states >= 2 ? -std::log(n - 1.0) : kNegInf;
    return p;
}

void ClusterCounts::add_trip(std::span<const StateIndex> encoded) {
    if (encoded.empty()) {
        throw std::invalid_argument("train_counts: empty trip");
    }
    ++n_trips;
    ++start_counts[encoded[0]];
    for (std::size_t t = 1; t < encoded.size(); ++t) {
        if (encoded[t] == encoded[t - 1]) {
            throw std::invalid_argument(
                "train_counts: consecutive duplicate state; deduplicate trips first");
        }
        ++transitions[key(encoded[t - 1], encoded[t])];
        ++row_totals[encoded[t - 1]];
    }
}

ClusterCounts train_counts(std::string cluster_id,
                           std::span<const std::span<const StateIndex>> trips) {
    ClusterCounts c;
    c.cluster_id = std::move(cluster_id);
    for (const auto& t : trips) {
        c.add_trip(t);
    }
    return c;
}

ClusterModel::ClusterModel(std::shared_ptr<const ClusterCounts> counts,
                           std::shared_ptr<const StateSpace> space, double epsilon,
                           PiMode pi_mode)
    : counts_(std::move(counts)),
      space_(std::move(space)),
      smoothing_(SmoothingParams::make(epsilon, space_->seen_count())),
      pi_mode_(pi_mode) {
    log_numerator_.reserve(counts_->transitions.size());
    for (const auto& [k, cnt] : counts_->transitions) {
        const StateIndex from = static_cast<StateIndex>(k >> 32);
        const double row = static_cast<double>(counts_->row_totals.at(from));
        const double ml = static_cast<double>(cnt) / row;
        log_numerator_.emplace(k, std::log(ml + epsilon));
    }
    for (const auto& [k, cnt] : counts_->transitions) {
        cluster_states_.insert(static_cast<StateIndex>(k >> 32));
        cluster_states_.insert(static_cast<StateIndex>(k & 0xffffffffu));
    }
    for (const auto& [i, cnt] : counts_->start_counts) {
        cluster_states_.insert(i);
        if (counts_->n_trips > 0) {
            log_pi_ml_.emplace(i, std::log(static_cast<double>(cnt) /
                                           static_cast<double>(counts_->n_trips)));
        }
    }
    log_pi_cluster_uniform_ =
        cluster_states_.empty() ? kNegInf
                                : -std::log(static_cast<double>(cluster_states_.size()));
}

void ClusterModel::check_index(StateIndex s) const {
    if (s >= space_->input_limit()) {
        throw std::out_of_range("state index " + std::to_string(s) +
                                " out of range (limit " +
                                std::to_string(space_->input_limit()) + ")");
    }
}

double ClusterModel::transition_prob(StateIndex i, StateIndex j) const {
    check_index(i);
    check_index(j);
    if (!space_->contains(i) || !space_->contains(j)) {
        return smoothing_.bar_epsilon;
    }
    if (i == j) {
        return 0.0;
    }
    const auto row = counts_->row_totals.find(i);
    if (row == counts_->row_totals.end() || row->second == 0) {
        // Never transitioned from: smoothing degenerates to uniform over the
        // off-diagonal seen states.
        return 1.0 / (static_cast<double>(smoothing_.n_states) - 1.0);
    }
    const auto it = counts_->transitions.find(ClusterCounts::key(i, j));
    const double ml =
        it == counts_->transitions.end()
            ? 0.0
            : static_cast<double>(it->second) / static_cast<double>(row->second);
    return (ml + smoothing_.epsilon) / smoothing_.row_denom;
}

double ClusterModel::log_transition_prob(StateIndex i, StateIndex j) const {
    check_index(i);
    check_index(j);
    if (!space_->contains(i) || !space_->contains(j)) {
        return smoothing_.log_bar_epsilon;
    }
    if (i == j) {
        return kNegInf;
    }
    const auto row = counts_->row_totals.find(i);
    if (row == counts_->row_totals.end() || row->second == 0) {
        return smoothing_.log_row_uniform;
    }
    const auto it = log_numerator_.find(ClusterCounts::key(i, j));
    if (it == log_numerator_.end()) {
        return smoothing_.log_floor_seen;
    }
    return it->second - smoothing_.log_row_denom;
}

double ClusterModel::initial_prob(StateIndex i) const {
    check_index(i);
    if (!space_->contains(i)) {
        return smoothing_.bar_epsilon;
    }
    switch (pi_mode_) {
        case PiMode::ml: {
            if (counts_->n_trips == 0) {
                throw std::domain_error("initial_prob: ml mode with empty cluster '" +
                                        counts_->cluster_id + "'");
            }
            const auto it = counts_->start_counts.find(i);
            return it == counts_->start_counts.end()
                       ? 0.0
                       : static_cast<double>(it->second) /
                             static_cast<double>(counts_->n_trips);
        }
        case PiMode::cluster_uniform:
            return cluster_states_.count(i)
                       ? 1.0 / static_cast<double>(cluster_states_.size())
                       : 0.0;
        case PiMode::global_uniform:
            return 1.0 / static_cast<double>(smoothing_.n_states);
    }
    return 0.0;
}

double ClusterModel::log_initial_prob(StateIndex i) const {
    check_index(i);
    if (!space_->contains(i)) {
        return smoothing_.log_bar_epsilon;
    }
    switch (pi_mode_) {
        case PiMode::ml: {
            if (counts_->n_trips == 0) {
                throw std::domain_error("initial_prob: ml mode with empty cluster '" +
                                        counts_->cluster_id + "'");
            }
            const auto it = log_pi_ml_.find(i);
            return it == log_pi_ml_.end() ? kNegInf : it->second;
        }
        case PiMode::cluster_uniform:
            return cluster_states_.count(i) ? log_pi_cluster_uniform_ : kNegInf;
        case PiMode::global_uniform:
            return -std::log(static_cast<double>(smoothing_.n_states));
    }
    return kNegInf;
}

double ClusterModel::trip_log_likelihood(std::span<const StateIndex> trip) const {
    if (trip.empty()) {
        throw std::invalid_argument("trip_log_likelihood: empty trip");
    }
    double ll = log_initial_prob(trip[0]);
    for (std::size_t t = 1; t < trip.size(); ++t) {
        ll += log_transition_prob(trip[t - 1], trip[t]);
    }
    return ll;
}

double ClusterModel::step_log_likelihood(double prev, StateIndex from, StateIndex to) const {
    return prev + log_transition_prob(from, to);
}

TrainedModels assemble_models(std::vector<ClusterCounts> counts,
                              std::shared_ptr<const StateSpace> space, double epsilon,
                              PiMode pi_mode) {
    TrainedModels out;
    out.space = space;
    out.smoothing = SmoothingParams::make(epsilon, space->seen_count());
    out.pi_mode = pi_mode;
    out.epsilon = epsilon;
    out.models.reserve(counts.size());
    out.cluster_ids.reserve(counts.size());
    for (auto& c : counts) {
        out.cluster_ids.push_back(c.cluster_id);
        out.models.emplace_back(std::make_shared<const ClusterCounts>(std::move(c)), space,
                                epsilon, pi_mode);
    }
    return out;
}

ModelBundle train_bundle(const History& deduped, const ClusterSet& clusters, double epsilon,
                         PiMode pi_mode) {
    validate_partition(clusters, deduped);
    Lexicon lexicon = Lexicon::build(deduped);

    std::unordered_map<std::string, std::size_t> cluster_of;
    for (std::size_t k = 0; k < clusters.clusters.size(); ++k) {
        for (const auto& id : clusters.clusters[k].trip_ids) {
            cluster_of.emplace(id, k);
        }
    }

    std::vector<ClusterCounts> counts(clusters.size());
    for (std::size_t k = 0; k < clusters.size(); ++k) {
        counts[k].cluster_id = clusters.clusters[k].cluster_id;
    }
    for (const Trip& t : deduped.trips) {
        const std::vector<StateIndex> enc = encode_trip(t, lexicon);
        counts[cluster_of.at(t.trip_id)].add_trip(enc);
    }

    auto space = std::make_shared<const StateSpace>(StateSpace::all(lexicon.size()));
    ModelBundle bundle{std::move(lexicon),
                       assemble_models(std::move(counts), space, epsilon, pi_mode)};
    return bundle;
}

void save_bundle(std::ostream& out, const ModelBundle& bundle) {
    ordered_json doc;
    doc["format_version"] = 1;
    doc["epsilon"] = bundle.models.epsilon;
    doc["pi_mode"] = std::string(to_string(bundle.models.pi_mode));
    doc["lexicon"] = bundle.lexicon.segments();

    ordered_json clusters = ordered_json::array();
    for (const ClusterModel& m : bundle.models.models) {
        const ClusterCounts& c = m.counts();
        ordered_json entry;
        entry["cluster_id"] = c.cluster_id;
        entry["n_trips"] = c.n_trips;

        std::vector<std::pair<StateIndex, std::uint32_t>> starts(c.start_counts.begin(),
                                                                 c.start_counts.end());
        std::sort(starts.begin(), starts.end());
        ordered_json jstarts = ordered_json::array();
        for (const auto& [i, n] : starts) {
            jstarts.push_back({i, n});
        }
        entry["starts"] = std::move(jstarts);

        std::vector<std::pair<std::uint64_t, std::uint32_t>> trans(c.transitions.begin(),
                                                                   c.transitions.end());
        std::sort(trans.begin(), trans.end());
        ordered_json jtrans = ordered_json::array();
        for (const auto& [k, n] : trans) {
            jtrans.push_back({static_cast<StateIndex>(k >> 32),
                              static_cast<StateIndex>(k & 0xffffffffu), n});
        }
        entry["transitions"] = std::move(jtrans);
        clusters.push_back(std::move(entry));
    }
    doc["clusters"] = std::move(clusters);
    out << doc.dump(2) << '\n';
}

ModelBundle load_bundle(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("model bundle: malformed JSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("format_version", -1) != 1) {
        throw ParseError("model bundle: missing or unsupported format_version");
    }
    if (!doc.contains("lexicon") || !doc["lexicon"].is_array() || !doc.contains("clusters") ||
        !doc["clusters"].is_array()) {
        throw ParseError("model bundle: expected lexicon and clusters arrays");
    }
    const double epsilon = doc.value("epsilon", 0.0);
    const PiMode pi_mode = parse_pi_mode(doc.value("pi_mode", std::string()));

    std::vector<SegmentId> segments;
    for (const auto& s : doc["lexicon"]) {
        if (!s.is_string()) {
            throw ParseError("model bundle: lexicon entries must be strings");
        }
        segments.push_back(s.get<std::string>());
    }
    Lexicon lexicon = Lexicon::from_segments(std::move(segments));
    const StateIndex n = lexicon.size();

    std::vector<ClusterCounts> counts;
    for (const auto& jc : doc["clusters"]) {
        ClusterCounts c;
        c.cluster_id = jc.value("cluster_id", std::string());
        if (c.cluster_id.empty()) {
            throw ParseError("model bundle: cluster without cluster_id");
        }
        c.n_trips = jc.value("n_trips", 0u);
        std::uint64_t start_total = 0;
        for (const auto& e : jc["starts"]) {
            const StateIndex i = e.at(0).get<StateIndex>();
            const std::uint32_t cnt = e.at(1).get<std::uint32_t>();
            if (i >= n || cnt == 0) {
                throw ParseError("model bundle: invalid start entry in cluster '" +
                                 c.cluster_id + "'");
            }
            c.start_counts[i] = cnt;
            start_total += cnt;
        }
        if (start_total != c.n_trips) {
            throw ParseError("model bundle: start counts of cluster '" + c.cluster_id +
                             "' do not sum to n_trips");
        }
        for (const auto& e : jc["transitions"]) {
            const StateIndex i = e.at(0).get<StateIndex>();
            const StateIndex j = e.at(1).get<StateIndex>();
            const std::uint32_t cnt = e.at(2).get<std::uint32_t>();
            if (i >= n || j >= n || i == j || cnt == 0) {
                throw ParseError("model bundle: invalid transition entry in cluster '" +
                                 c.cluster_id + "'");
            }
            c.transitions[ClusterCounts::key(i, j)] = cnt;
            c.row_totals[i] += cnt;
        }
        counts.push_back(std::move(c));
    }

    auto space = std::make_shared<const StateSpace>(StateSpace::all(n));
    ModelBundle bundle{std::move(lexicon),
                       assemble_models(std::move(counts), space, epsilon, pi_mode)};
    return bundle;
}

}  // namespace routecast
