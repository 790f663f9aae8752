#pragma once

#include "routecast/trips.hpp"

#include <iosfwd>
#include <memory>
#include <span>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

namespace routecast {

// Choice of initial distribution pi^k.
enum class PiMode {
    ml,              // relative frequency of trip start states within the cluster
    cluster_uniform, // uniform over states appearing anywhere in the cluster
    global_uniform,  // 1/N over all seen states
};

PiMode parse_pi_mode(std::string_view s);
std::string_view to_string(PiMode m);

// Which dense state indices count as "seen in training". A model trained on
// a full history uses all(N); evaluation folds restrict a full-corpus index
// to the states visited by the fold's training trips. Any index outside the
// space behaves as the unseen state u.
class StateSpace {
public:
    static StateSpace all(StateIndex n);
    static StateSpace subset(std::vector<bool> member);

    // N: number of seen states.
    StateIndex seen_count() const { return n_; }

    // Raw indices must be < input_limit(); the top value is the global u.
    StateIndex input_limit() const { return limit_; }

    bool contains(StateIndex s) const {
        if (member_.empty()) {
            return s < n_;
        }
        return s < member_.size() && member_[s];
    }

private:
    StateIndex n_ = 0;
    StateIndex limit_ = 0;
    std::vector<bool> member_;
};

// Constants derived from epsilon for a state space with N seen states.
struct SmoothingParams {
    double epsilon = 0;
    double bar_epsilon = 0;      // eps/(1+(N+1)eps): any step touching u
    double floor_seen = 0;       // eps/(1+(N-1)eps): minimum seen-to-seen probability
    double row_denom = 1;        // 1+(N-1)eps
    double log_bar_epsilon = 0;
    double log_row_denom = 0;
    double log_floor_seen = 0;   // log eps - log row_denom
    double log_row_uniform = 0;  // -log(N-1): rows never transitioned from
    StateIndex n_states = 0;

    static SmoothingParams make(double epsilon, StateIndex n_states);
};

// Raw sufficient statistics of one cluster: transition pair counts, row
// totals, and trip start counts. Indices are dense lexicon states.
struct ClusterCounts {
    std::string cluster_id;
    std::uint32_t n_trips = 0;
    std::unordered_map<std::uint64_t, std::uint32_t> transitions;  // key(i,j) -> count
    std::unordered_map<StateIndex, std::uint32_t> row_totals;
    std::unordered_map<StateIndex, std::uint32_t> start_counts;

    static std::uint64_t key(StateIndex i, StateIndex j) {
        return (static_cast<std::uint64_t>(i) << 32) | j;
    }

    // Accumulates one encoded, deduplicated trip. Throws on consecutive
    // duplicate states: those means the input was not deduplicated.
    void add_trip(std::span<const StateIndex> encoded);
};

// Builds counts for one cluster from its encoded trips.
ClusterCounts train_counts(std::string cluster_id,
                           std::span<const std::span<const StateIndex>> trips);

// One cluster's Markov chain: counts plus epsilon-smoothing, evaluated on
// demand. Smoothed probabilities are never materialized as a dense matrix;
// log values for counted transitions are precomputed once.
class ClusterModel {
public:
    ClusterModel(std::shared_ptr<const ClusterCounts> counts,
                 std::shared_ptr<const StateSpace> space, double epsilon, PiMode pi_mode);

    // Smoothed transition probability a_ij:
    //  - both endpoints seen, i != j, row i counted: (a_ij^ML + eps)/(1+(N-1)eps)
    //  - both endpoints seen, i != j, row i never transitioned from: 1/(N-1)
    //  - i == j (seen): 0; self-loops are excluded from smoothing
    //  - either endpoint unseen: bar_epsilon, including u -> u
    // Throws std::out_of_range when an index exceeds the space's input limit.
    double transition_prob(StateIndex i, StateIndex j) const;
    double log_transition_prob(StateIndex i, StateIndex j) const;

    // Initial probability pi_i per the configured mode; unseen states get
    // bar_epsilon under every mode. Throws std::domain_error in ml mode when
    // the cluster is empty.
    double initial_prob(StateIndex i) const;
    double log_initial_prob(StateIndex i) const;

    // log P(r_1..r_L | cluster) = log pi_{r_1} + sum_t log a_{r_{t-1} r_t}.
    // -inf is a legal result (pi == 0 in ml/cluster_uniform modes).
    double trip_log_likelihood(std::span<const StateIndex> trip) const;

    // One step of the likelihood recursion; -inf is absorbing.
    double step_log_likelihood(double prev, StateIndex from, StateIndex to) const;

    const ClusterCounts& counts() const { return *counts_; }
    const StateSpace& space() const { return *space_; }
    const SmoothingParams& smoothing() const { return smoothing_; }
    PiMode pi_mode() const { return pi_mode_; }
    const std::string& cluster_id() const { return counts_->cluster_id; }

private:
    void check_index(StateIndex s) const;

    std::shared_ptr<const ClusterCounts> counts_;
    std::shared_ptr<const StateSpace> space_;
    SmoothingParams smoothing_;
    PiMode pi_mode_;
    // log(a_ij^ML + eps) per counted transition; the row denominator is
    // applied at lookup so the table survives state-space rebinding.
    std::unordered_map<std::uint64_t, double> log_numerator_;
    std::unordered_map<StateIndex, double> log_pi_ml_;
    std::unordered_set<StateIndex> cluster_states_;  // states appearing in the cluster
    double log_pi_cluster_uniform_ = 0;
};

// A trained bundle: shared state space and smoothing plus per-cluster models
// aligned with the cluster-set order used at training time.
struct TrainedModels {
    std::shared_ptr<const StateSpace> space;
    SmoothingParams smoothing;
    PiMode pi_mode = PiMode::global_uniform;
    double epsilon = 0;
    std::vector<ClusterModel> models;
    std::vector<std::string> cluster_ids;

    std::size_t size() const { return models.size(); }
};

TrainedModels assemble_models(std::vector<ClusterCounts> counts,
                              std::shared_ptr<const StateSpace> space, double epsilon,
                              PiMode pi_mode);

// Canonical training path: lexicon from the (deduplicated) history, one
// model per cluster. The bundle serializes raw counts, epsilon and pi mode,
// so epsilon can be swept without retraining.
struct ModelBundle {
    Lexicon lexicon;
    TrainedModels models;
};

ModelBundle train_bundle(const History& deduped, const ClusterSet& clusters, double epsilon,
                         PiMode pi_mode);

void save_bundle(std::ostream& out, const ModelBundle& bundle);
ModelBundle load_bundle(std::istream& in);

}  // namespace routecast
