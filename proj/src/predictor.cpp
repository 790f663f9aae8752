#include "routecast/predictor.hpp"

#include "routecast/kernels.hpp"

#include <cmath>
#include <limits>

namespace routecast {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

PriorMode parse_prior_mode(std::string_view s) {
    if (s == "uniform") {
        return PriorMode::uniform;
    }
    if (s == "proportional") {
        return PriorMode::proportional;
    }
    throw std::invalid_argument("unknown prior mode '" + std::string(s) + "'");
}

std::string_view to_string(PriorMode m) {
    return m == PriorMode::uniform ? "uniform" : "proportional";
}

namespace {

Priors priors_from_sizes(std::span<const std::size_t> sizes, PriorMode mode) {
    if (sizes.empty()) {
        throw std::invalid_argument("make_priors: no clusters");
    }
    Priors p;
    p.log_prior.reserve(sizes.size());
    if (mode == PriorMode::uniform) {
        const double lp = -std::log(static_cast<double>(sizes.size()));
        p.log_prior.assign(sizes.size(), lp);
        return p;
    }
    std::size_t total = 0;
    for (std::size_t s : sizes) {
        total += s;
    }
    if (total == 0) {
        throw std::invalid_argument("make_priors: proportional priors over empty history");
    }
    for (std::size_t s : sizes) {
        p.log_prior.push_back(s == 0 ? kNegInf
                                     : std::log(static_cast<double>(s) /
                                                static_cast<double>(total)));
    }
    return p;
}

}  // namespace

Priors make_priors(const ClusterSet& clusters, PriorMode mode) {
    std::vector<std::size_t> sizes;
    sizes.reserve(clusters.size());
    for (const auto& c : clusters.clusters) {
        sizes.push_back(c.trip_ids.size());
    }
    return priors_from_sizes(sizes, mode);
}

Priors make_priors(const TrainedModels& models, PriorMode mode) {
    std::vector<std::size_t> sizes;
    sizes.reserve(models.size());
    for (const ClusterModel& m : models.models) {
        sizes.push_back(m.counts().n_trips);
    }
    return priors_from_sizes(sizes, mode);
}

PredictionSession::PredictionSession(const TrainedModels& models, const Priors& priors,
                                     double alpha, StateIndex first_segment,
                                     StopPolicy policy)
    : models_(&models), priors_(&priors), threshold_(1.0 - alpha), policy_(policy) {
    if (models.models.empty()) {
        throw std::invalid_argument("prediction session needs at least one model");
    }
    if (priors.log_prior.size() != models.models.size()) {
        throw std::invalid_argument("priors/models size mismatch");
    }
    if (!(alpha > 0.0) || !(alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in (0, 1)");
    }
    const std::size_t n = models.models.size();
    rel_log_lik_.assign(n, 0.0);
    weights_.resize(n);
    posterior_.resize(n);
    renormalize();  // posteriors start at the normalized priors
    observe(first_segment);
}

void PredictionSession::observe(StateIndex segment) {
    if (decision_ && policy_ == StopPolicy::one_shot) {
        throw std::logic_error("observe called after the prediction was decided");
    }
    ++segments_seen_;
    if (!models_->space->contains(segment)) {
        // Unseen segment: every cluster picks up the same bar_epsilon factor,
        // so the posteriors are unchanged.
        shared_log_lik_ += models_->smoothing.log_bar_epsilon;
    } else {
        const std::size_t n = models_->models.size();
        if (!last_seen_state_) {
            for (std::size_t k = 0; k < n; ++k) {
                rel_log_lik_[k] += models_->models[k].log_initial_prob(segment);
            }
        } else {
            for (std::size_t k = 0; k < n; ++k) {
                rel_log_lik_[k] +=
                    models_->models[k].log_transition_prob(*last_seen_state_, segment);
            }
        }
        last_seen_state_ = segment;
        renormalize();
    }
    check_decision();
}

void PredictionSession::renormalize() {
    bool any_finite = false;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        weights_[k] = rel_log_lik_[k] + priors_->log_prior[k];
        any_finite = any_finite || weights_[k] > kNegInf;
    }
    if (!any_finite) {
        throw UndefinedPosteriorError(
            "posterior undefined: zero likelihood against every cluster prior");
    }
    kernels::normalize_log_weights(weights_, posterior_);
}

void PredictionSession::check_decision() {
    if (decision_) {
        return;
    }
    const auto winner = decide();
    if (winner) {
        decision_ = Decision{*winner, segments_seen_};
    }
}

std::optional<std::size_t> PredictionSession::decide() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < posterior_.size(); ++k) {
        if (posterior_[k] > posterior_[best]) {
            best = k;
        }
    }
    if (posterior_[best] > threshold_) {
        return best;
    }
    return std::nullopt;
}

}  // namespace routecast
