#pragma once

#include "routecast/markov.hpp"

#include <optional>
#include <span>

namespace routecast {

enum class PriorMode { uniform, proportional };

PriorMode parse_prior_mode(std::string_view s);
std::string_view to_string(PriorMode m);

// Per-cluster log prior probabilities, aligned with the model order.
struct Priors {
    std::vector<double> log_prior;
};

// uniform: P(C_k) = 1/N_C. proportional: P(C_k) = |C_k| / N_H, which sums to
// one because the clusters partition the history.
Priors make_priors(const ClusterSet& clusters, PriorMode mode);

// Same, with cluster sizes taken from trained counts (the training subset in
// cross-validation folds).
Priors make_priors(const TrainedModels& models, PriorMode mode);

// Raised when every posterior numerator is zero (all log-likelihoods -inf
// against zero-prior mass): the posterior would be 0/0.
class UndefinedPosteriorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PredictorConfig {
    double alpha = 0.1;  // decide once a posterior exceeds 1 - alpha
    PriorMode prior_mode = PriorMode::uniform;
    double epsilon = 1e-6;  // forwarded to model training
};

struct Decision {
    std::size_t cluster_index;
    std::uint32_t segments_seen;
};

// Running posterior state for one ongoing trip. Observations of states
// outside the model's state space contribute the same bar_epsilon factor to
// every cluster; that shared mass is accumulated separately so the per-
// cluster terms -- and hence the posteriors at real-segment steps -- are
// bitwise independent of unseen-segment observations. Transitions resume
// from the last seen state, and the initial distribution applies to the
// first seen segment.
//
// A session borrows the models and priors; they must outlive it. One session
// is single-threaded mutable state; any number of sessions may run
// concurrently against the same immutable models.
class PredictionSession {
public:
    enum class StopPolicy {
        one_shot,   // observing after a decision is an error
        continuous, // keep updating; the first threshold crossing stays recorded
    };

    PredictionSession(const TrainedModels& models, const Priors& priors, double alpha,
                      StateIndex first_segment, StopPolicy policy = StopPolicy::one_shot);

    void observe(StateIndex segment);

    std::span<const double> posteriors() const { return posterior_; }
    std::uint32_t segments_seen() const { return segments_seen_; }

    // ell_k: running log-likelihood including the shared unseen-segment mass.
    double log_likelihood(std::size_t k) const {
        return rel_log_lik_.at(k) + shared_log_lik_;
    }

    // First crossing of the 1 - alpha threshold, if any.
    const std::optional<Decision>& decision() const { return decision_; }

    // Threshold check on the current posteriors; ties resolve to the lowest
    // cluster index.
    std::optional<std::size_t> decide() const;

private:
    void renormalize();
    void check_decision();

    const TrainedModels* models_;
    const Priors* priors_;
    double threshold_;
    StopPolicy policy_;
    std::vector<double> rel_log_lik_;  // cluster-dependent log terms only
    double shared_log_lik_ = 0.0;      // identical-across-clusters log terms
    std::vector<double> weights_;      // scratch: rel + log prior
    std::vector<double> posterior_;
    std::optional<StateIndex> last_seen_state_;
    std::uint32_t segments_seen_ = 0;
    std::optional<Decision> decision_;
};

}  // namespace routecast
