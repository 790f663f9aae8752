#pragma once

#include "routecast/markov.hpp"
#include "routecast/predictor.hpp"

#include <iosfwd>
#include <optional>
#include <span>

namespace routecast {

struct EvalOutcome {
    std::string trip_id;
    std::string true_cluster;
    std::optional<std::string> predicted_cluster;
    std::optional<std::uint32_t> segments_at_decision;
    std::uint32_t trip_length = 0;
    std::optional<double> fraction_used;  // segments_at_decision / trip_length

    bool correct() const {
        return predicted_cluster.has_value() && *predicted_cluster == true_cluster;
    }
};

// failure_rate counts wrong predictions and trips that ended undecided;
// mean_fraction_used averages over correct predictions only (wrong and
// absent predictions are excluded, the NaN convention).
struct EvalReport {
    std::size_t n_trips = 0;
    std::size_t n_correct = 0;
    std::size_t n_wrong = 0;
    std::size_t n_no_prediction = 0;
    double failure_rate = 0.0;
    std::optional<double> mean_fraction_used;
    std::vector<EvalOutcome> outcomes;  // sorted by trip_id
};

EvalReport aggregate_outcomes(std::vector<EvalOutcome> outcomes, bool keep_outcomes = true);

struct EvalConfig {
    double alpha = 0.1;
    double epsilon = 1e-6;
    PiMode pi_mode = PiMode::global_uniform;
    PriorMode prior_mode = PriorMode::uniform;
};

// Deduplicated history encoded once against its own full-data lexicon.
// Cross-validation folds restrict this shared dense index to the states the
// fold's training trips visit instead of re-indexing segment strings; a
// held-out segment outside the fold's training set behaves exactly as the
// unseen state u. Trips are kept sorted by trip_id.
class EncodedCorpus {
public:
    EncodedCorpus(History deduped, const ClusterSet& labels);

    std::size_t n_trips() const { return history_.trips.size(); }
    const History& history() const { return history_; }
    const Trip& trip(std::size_t i) const { return history_.trips[i]; }
    std::span<const StateIndex> encoded(std::size_t i) const { return encoded_[i]; }
    std::size_t label(std::size_t i) const { return label_[i]; }
    std::size_t n_clusters() const { return cluster_ids_.size(); }
    const std::string& cluster_id(std::size_t k) const { return cluster_ids_[k]; }
    const std::vector<std::string>& cluster_ids() const { return cluster_ids_; }
    const Lexicon& lexicon() const { return lexicon_; }

private:
    History history_;
    Lexicon lexicon_;
    std::vector<std::vector<StateIndex>> encoded_;
    std::vector<std::size_t> label_;
    std::vector<std::string> cluster_ids_;
};

// Trains one model per cluster on the given trips; cluster membership comes
// from the corpus's full-data labels. Clusters with no training trips yield
// legal all-zero-count models.
TrainedModels train_fold(const EncodedCorpus& corpus, std::span<const std::size_t> training,
                         double epsilon, PiMode pi_mode);

// Feeds the trip into a session, stopping at the first decision or at trip
// end. An undefined posterior (possible under ml priors/initials) counts as
// no prediction.
EvalOutcome predict_trip(const TrainedModels& models, const Priors& priors, double alpha,
                         const EncodedCorpus& corpus, std::size_t trip_index);

EvalReport evaluate_set(const TrainedModels& models, const Priors& priors, double alpha,
                        const EncodedCorpus& corpus, std::span<const std::size_t> test);

// Per-observation running maximum posterior and its (lowest-index) argmax.
// The trajectory does not depend on alpha, so one pass serves a whole
// alpha grid.
struct TrajectoryPoint {
    double max_posterior;
    std::size_t argmax;
};

std::vector<TrajectoryPoint> posterior_trajectory(const TrainedModels& models,
                                                  const Priors& priors,
                                                  std::span<const StateIndex> encoded);

EvalOutcome outcome_from_trajectory(std::span<const TrajectoryPoint> traj, double alpha,
                                    const EncodedCorpus& corpus, std::size_t trip_index);

// Protocol: n_rounds random train/test splits. Clusters stay fixed from the
// full dataset; only model training respects the split. Unstratified,
// seeded, deterministic.
std::vector<EvalReport> random_split_cv(const EncodedCorpus& corpus, const EvalConfig& cfg,
                                        int n_rounds, double split_fraction,
                                        std::uint64_t seed);

// Protocol: for every trip, train on the remaining trips and predict it.
EvalReport leave_one_out_cv(const EncodedCorpus& corpus, const EvalConfig& cfg);

// One leave-one-out pass evaluated against a whole alpha grid.
std::vector<std::pair<double, EvalReport>> leave_one_out_alpha_sweep(
    const EncodedCorpus& corpus, const EvalConfig& cfg, std::span<const double> alphas);

// Protocol: train on the first m trips of `order`, evaluate the rest, for
// m = 1..N-1.
std::vector<std::pair<std::size_t, EvalReport>> incremental_experiment(
    const EncodedCorpus& corpus, const EvalConfig& cfg, std::span<const std::size_t> order,
    bool keep_outcomes = false);

struct SweepRow {
    double alpha = 0;
    double epsilon = 0;
    std::string clustering_mode;
    std::string protocol;
    double failure_rate = 0;
    std::optional<double> mean_fraction_used;
    std::size_t n_trips = 0;
};

// One row per (alpha, epsilon) cell; split rounds are pooled. The same seed
// reproduces identical splits for every epsilon.
std::vector<SweepRow> grid_sweep(const EncodedCorpus& corpus, const EvalConfig& base,
                                 std::span<const double> alphas,
                                 std::span<const double> epsilons, std::string_view protocol,
                                 std::string_view clustering_mode, int n_rounds,
                                 double split_fraction, std::uint64_t seed);

// CSV emission; headers are fixed, values locale-independent shortest
// round-trip decimals, absent optionals are empty cells.
void write_outcomes_csv(std::ostream& out, std::span<const EvalOutcome> outcomes);
void write_incremental_csv(std::ostream& out,
                           std::span<const std::pair<std::size_t, EvalReport>> series);
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

std::string format_double(double v);

}  // namespace routecast
