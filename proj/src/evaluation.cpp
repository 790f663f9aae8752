#include "routecast/evaluation.hpp"

#include "routecast/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>

namespace routecast {

EvalReport aggregate_outcomes(std::vector<EvalOutcome> outcomes, bool keep_outcomes) {
    EvalReport r;
    r.n_trips = outcomes.size();
    double fraction_sum = 0.0;
    for (const EvalOutcome& o : outcomes) {
        if (!o.predicted_cluster) {
            ++r.n_no_prediction;
        } else if (o.correct()) {
            ++r.n_correct;
            fraction_sum += *o.fraction_used;
        } else {
            ++r.n_wrong;
        }
    }
    if (r.n_trips > 0) {
        r.failure_rate = static_cast<double>(r.n_wrong + r.n_no_prediction) /
                         static_cast<double>(r.n_trips);
    }
    if (r.n_correct > 0) {
        r.mean_fraction_used = fraction_sum / static_cast<double>(r.n_correct);
    }
    if (keep_outcomes) {
        std::sort(outcomes.begin(), outcomes.end(),
                  [](const EvalOutcome& a, const EvalOutcome& b) {
                      return a.trip_id < b.trip_id;
                  });
        r.outcomes = std::move(outcomes);
    }
    return r;
}

EncodedCorpus::EncodedCorpus(History deduped, const ClusterSet& labels)
    : history_(std::move(deduped)) {
    validate_partition(labels, history_);
    std::sort(history_.trips.begin(), history_.trips.end(),
              [](const Trip& a, const Trip& b) { return a.trip_id < b.trip_id; });
    lexicon_ = Lexicon::build(history_);

    std::unordered_map<std::string, std::size_t> cluster_of;
    cluster_ids_.reserve(labels.size());
    for (std::size_t k = 0; k < labels.clusters.size(); ++k) {
        cluster_ids_.push_back(labels.clusters[k].cluster_id);
        for (const std::string& id : labels.clusters[k].trip_ids) {
            cluster_of.emplace(id, k);
        }
    }

    encoded_.reserve(history_.trips.size());
    label_.reserve(history_.trips.size());
    for (const Trip& t : history_.trips) {
        encoded_.push_back(encode_trip(t, lexicon_));
        label_.push_back(cluster_of.at(t.trip_id));
    }
}

TrainedModels train_fold(const EncodedCorpus& corpus, std::span<const std::size_t> training,
                         double epsilon, PiMode pi_mode) {
    if (training.empty()) {
        throw std::invalid_argument("train_fold: empty training set");
    }
    std::vector<bool> member(corpus.lexicon().size(), false);
    std::vector<ClusterCounts> counts(corpus.n_clusters());
    for (std::size_t k = 0; k < corpus.n_clusters(); ++k) {
        counts[k].cluster_id = corpus.cluster_id(k);
    }
    for (const std::size_t idx : training) {
        const auto enc = corpus.encoded(idx);
        for (const StateIndex s : enc) {
            member[s] = true;
        }
        counts[corpus.label(idx)].add_trip(enc);
    }
    auto space = std::make_shared<const StateSpace>(StateSpace::subset(std::move(member)));
    return assemble_models(std::move(counts), std::move(space), epsilon, pi_mode);
}

namespace {

EvalOutcome base_outcome(const EncodedCorpus& corpus, std::size_t trip_index) {
    EvalOutcome o;
    o.trip_id = corpus.trip(trip_index).trip_id;
    o.true_cluster = corpus.cluster_id(corpus.label(trip_index));
    o.trip_length = static_cast<std::uint32_t>(corpus.encoded(trip_index).size());
    return o;
}

}  // namespace

EvalOutcome predict_trip(const TrainedModels& models, const Priors& priors, double alpha,
                         const EncodedCorpus& corpus, std::size_t trip_index) {
    EvalOutcome o = base_outcome(corpus, trip_index);
    const auto enc = corpus.encoded(trip_index);
    try {
        PredictionSession session(models, priors, alpha, enc[0]);
        for (std::size_t t = 1; t < enc.size() && !session.decision(); ++t) {
            session.observe(enc[t]);
        }
        if (const auto& d = session.decision()) {
            o.predicted_cluster = models.cluster_ids[d->cluster_index];
            o.segments_at_decision = d->segments_seen;
            o.fraction_used = static_cast<double>(d->segments_seen) /
                              static_cast<double>(o.trip_length);
        }
    } catch (const UndefinedPosteriorError&) {
        // zero posterior mass everywhere: the trip ends without a prediction
    }
    return o;
}

EvalReport evaluate_set(const TrainedModels& models, const Priors& priors, double alpha,
                        const EncodedCorpus& corpus, std::span<const std::size_t> test) {
    if (test.empty()) {
        throw std::invalid_argument("evaluate_set: empty test set");
    }
    std::vector<EvalOutcome> outcomes;
    outcomes.reserve(test.size());
    for (const std::size_t idx : test) {
        outcomes.push_back(predict_trip(models, priors, alpha, corpus, idx));
    }
    return aggregate_outcomes(std::move(outcomes));
}

std::vector<TrajectoryPoint> posterior_trajectory(const TrainedModels& models,
                                                  const Priors& priors,
                                                  std::span<const StateIndex> encoded) {
    std::vector<TrajectoryPoint> traj;
    traj.reserve(encoded.size());
    try {
        PredictionSession session(models, priors, 0.5, encoded[0],
                                  PredictionSession::StopPolicy::continuous);
        const auto record = [&] {
            const auto post = session.posteriors();
            std::size_t best = 0;
            for (std::size_t k = 1; k < post.size(); ++k) {
                if (post[k] > post[best]) {
                    best = k;
                }
            }
            traj.push_back({post[best], best});
        };
        record();
        for (std::size_t t = 1; t < encoded.size(); ++t) {
            session.observe(encoded[t]);
            record();
        }
    } catch (const UndefinedPosteriorError&) {
        // truncated trajectory; no decision is reachable past this point
    }
    return traj;
}

EvalOutcome outcome_from_trajectory(std::span<const TrajectoryPoint> traj, double alpha,
                                    const EncodedCorpus& corpus, std::size_t trip_index) {
    EvalOutcome o = base_outcome(corpus, trip_index);
    const double threshold = 1.0 - alpha;
    for (std::size_t t = 0; t < traj.size(); ++t) {
        if (traj[t].max_posterior > threshold) {
            o.predicted_cluster = corpus.cluster_id(traj[t].argmax);
            o.segments_at_decision = static_cast<std::uint32_t>(t + 1);
            o.fraction_used =
                static_cast<double>(t + 1) / static_cast<double>(o.trip_length);
            break;
        }
    }
    return o;
}

std::vector<EvalReport> random_split_cv(const EncodedCorpus& corpus, const EvalConfig& cfg,
                                        int n_rounds, double split_fraction,
                                        std::uint64_t seed) {
    if (n_rounds < 1) {
        throw std::invalid_argument("random_split_cv: need at least one round");
    }
    if (!(split_fraction > 0.0) || !(split_fraction < 1.0)) {
        throw std::invalid_argument("random_split_cv: split fraction must lie in (0, 1)");
    }
    const std::size_t n = corpus.n_trips();
    if (n < 2) {
        throw std::invalid_argument("random_split_cv: need at least two trips");
    }
    Rng rng(seed);
    std::vector<EvalReport> reports;
    reports.reserve(static_cast<std::size_t>(n_rounds));
    for (int round = 0; round < n_rounds; ++round) {
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) {
            perm[i] = i;
        }
        rng.shuffle(perm);
        std::size_t n_train = static_cast<std::size_t>(
            std::llround(split_fraction * static_cast<double>(n)));
        n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

        std::vector<std::size_t> train(perm.begin(), perm.begin() + n_train);
        std::vector<std::size_t> test(perm.begin() + n_train, perm.end());
        std::sort(test.begin(), test.end());

        const TrainedModels models = train_fold(corpus, train, cfg.epsilon, cfg.pi_mode);
        const Priors priors = make_priors(models, cfg.prior_mode);
        reports.push_back(evaluate_set(models, priors, cfg.alpha, corpus, test));
    }
    return reports;
}

EvalReport leave_one_out_cv(const EncodedCorpus& corpus, const EvalConfig& cfg) {
    const std::size_t n = corpus.n_trips();
    if (n < 2) {
        throw std::invalid_argument("leave_one_out_cv: need at least two trips");
    }
    std::vector<EvalOutcome> outcomes;
    outcomes.reserve(n);
    std::vector<std::size_t> train;
    train.reserve(n - 1);
    for (std::size_t held = 0; held < n; ++held) {
        train.clear();
        for (std::size_t i = 0; i < n; ++i) {
            if (i != held) {
                train.push_back(i);
            }
        }
        const TrainedModels models = train_fold(corpus, train, cfg.epsilon, cfg.pi_mode);
        const Priors priors = make_priors(models, cfg.prior_mode);
        outcomes.push_back(predict_trip(models, priors, cfg.alpha, corpus, held));
    }
    return aggregate_outcomes(std::move(outcomes));
}

std::vector<std::pair<double, EvalReport>> leave_one_out_alpha_sweep(
    const EncodedCorpus& corpus, const EvalConfig& cfg, std::span<const double> alphas) {
    const std::size_t n = corpus.n_trips();
    if (n < 2) {
        throw std::invalid_argument("leave_one_out_alpha_sweep: need at least two trips");
    }
    std::vector<std::vector<EvalOutcome>> per_alpha(alphas.size());
    std::vector<std::size_t> train;
    train.reserve(n - 1);
    for (std::size_t held = 0; held < n; ++held) {
        train.clear();
        for (std::size_t i = 0; i < n; ++i) {
            if (i != held) {
                train.push_back(i);
            }
        }
        const TrainedModels models = train_fold(corpus, train, cfg.epsilon, cfg.pi_mode);
        const Priors priors = make_priors(models, cfg.prior_mode);
        const auto traj = posterior_trajectory(models, priors, corpus.encoded(held));
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            per_alpha[a].push_back(outcome_from_trajectory(traj, alphas[a], corpus, held));
        }
    }
    std::vector<std::pair<double, EvalReport>> out;
    out.reserve(alphas.size());
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        out.emplace_back(alphas[a], aggregate_outcomes(std::move(per_alpha[a])));
    }
    return out;
}

std::vector<std::pair<std::size_t, EvalReport>> incremental_experiment(
    const EncodedCorpus& corpus, const EvalConfig& cfg, std::span<const std::size_t> order,
    bool keep_outcomes) {
    const std::size_t n = corpus.n_trips();
    if (order.size() != n || n < 2) {
        throw std::invalid_argument("incremental_experiment: order must cover >= 2 trips");
    }
    std::vector<std::pair<std::size_t, EvalReport>> series;
    series.reserve(n - 1);
    for (std::size_t m = 1; m + 1 <= n - 0 && m <= n - 1; ++m) {
        const std::span<const std::size_t> train = order.subspan(0, m);
        std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(m),
                                      order.end());
        std::sort(test.begin(), test.end());
        const TrainedModels models = train_fold(corpus, train, cfg.epsilon, cfg.pi_mode);
        const Priors priors = make_priors(models, cfg.prior_mode);
        std::vector<EvalOutcome> outcomes;
        outcomes.reserve(test.size());
        for (const std::size_t idx : test) {
            outcomes.push_back(predict_trip(models, priors, cfg.alpha, corpus, idx));
        }
        series.emplace_back(m, aggregate_outcomes(std::move(outcomes), keep_outcomes));
    }
    return series;
}

namespace {

struct CellAccum {
    std::size_t n = 0;
    std::size_t correct = 0;
    std::size_t wrong = 0;
    std::size_t nopred = 0;
    double fraction_sum = 0.0;

    void add(const EvalOutcome& o) {
        ++n;
        if (!o.predicted_cluster) {
            ++nopred;
        } else if (o.correct()) {
            ++correct;
            fraction_sum += *o.fraction_used;
        } else {
            ++wrong;
        }
    }
};

}  // namespace

std::vector<SweepRow> grid_sweep(const EncodedCorpus& corpus, const EvalConfig& base,
                                 std::span<const double> alphas,
                                 std::span<const double> epsilons, std::string_view protocol,
                                 std::string_view clustering_mode, int n_rounds,
                                 double split_fraction, std::uint64_t seed) {
    if (alphas.empty() || epsilons.empty()) {
        throw std::invalid_argument("grid_sweep: empty grids");
    }
    if (protocol != "split" && protocol != "loo") {
        throw std::invalid_argument("grid_sweep: protocol must be 'split' or 'loo'");
    }
    const std::size_t n = corpus.n_trips();

    // cells[e][a]
    std::vector<std::vector<CellAccum>> cells(
        epsilons.size(), std::vector<CellAccum>(alphas.size()));

    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        EvalConfig cfg = base;
        cfg.epsilon = epsilons[e];
        const auto run_fold = [&](std::span<const std::size_t> train,
                                  std::span<const std::size_t> test) {
            const TrainedModels models = train_fold(corpus, train, cfg.epsilon, cfg.pi_mode);
            const Priors priors = make_priors(models, cfg.prior_mode);
            for (const std::size_t idx : test) {
                const auto traj = posterior_trajectory(models, priors, corpus.encoded(idx));
                for (std::size_t a = 0; a < alphas.size(); ++a) {
                    cells[e][a].add(outcome_from_trajectory(traj, alphas[a], corpus, idx));
                }
            }
        };

        if (protocol == "split") {
            // Fresh generator per epsilon: every epsilon sees identical splits.
            Rng rng(seed);
            for (int round = 0; round < n_rounds; ++round) {
                std::vector<std::size_t> perm(n);
                for (std::size_t i = 0; i < n; ++i) {
                    perm[i] = i;
                }
                rng.shuffle(perm);
                std::size_t n_train = static_cast<std::size_t>(
                    std::llround(split_fraction * static_cast<double>(n)));
                n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
                std::vector<std::size_t> train(perm.begin(), perm.begin() + n_train);
                std::vector<std::size_t> test(perm.begin() + n_train, perm.end());
                std::sort(test.begin(), test.end());
                run_fold(train, test);
            }
        } else {
            std::vector<std::size_t> train;
            train.reserve(n - 1);
            for (std::size_t held = 0; held < n; ++held) {
                train.clear();
                for (std::size_t i = 0; i < n; ++i) {
                    if (i != held) {
                        train.push_back(i);
                    }
                }
                const std::size_t test[] = {held};
                run_fold(train, test);
            }
        }
    }

    std::vector<SweepRow> rows;
    rows.reserve(alphas.size() * epsilons.size());
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        for (std::size_t e = 0; e < epsilons.size(); ++e) {
            const CellAccum& c = cells[e][a];
            SweepRow row;
            row.alpha = alphas[a];
            row.epsilon = epsilons[e];
            row.clustering_mode = std::string(clustering_mode);
            row.protocol = std::string(protocol);
            row.n_trips = c.n;
            row.failure_rate =
                c.n == 0 ? 0.0
                         : static_cast<double>(c.wrong + c.nopred) / static_cast<double>(c.n);
            if (c.correct > 0) {
                row.mean_fraction_used = c.fraction_sum / static_cast<double>(c.correct);
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_outcomes_csv(std::ostream& out, std::span<const EvalOutcome> outcomes) {
    out << "trip_id,true_cluster,predicted_cluster,segments_at_decision,trip_length,"
           "fraction_used\n";
    for (const EvalOutcome& o : outcomes) {
        out << o.trip_id << ',' << o.true_cluster << ',';
        if (o.predicted_cluster) {
            out << *o.predicted_cluster;
        }
        out << ',';
        if (o.segments_at_decision) {
            out << *o.segments_at_decision;
        }
        out << ',' << o.trip_length << ',';
        if (o.fraction_used) {
            out << format_double(*o.fraction_used);
        }
        out << '\n';
    }
}

void write_incremental_csv(std::ostream& out,
                           std::span<const std::pair<std::size_t, EvalReport>> series) {
    out << "m,failure_rate,mean_fraction_used\n";
    for (const auto& [m, report] : series) {
        out << m << ',' << format_double(report.failure_rate) << ',';
        if (report.mean_fraction_used) {
            out << format_double(*report.mean_fraction_used);
        }
        out << '\n';
    }
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
    out << "alpha,epsilon,clustering_mode,protocol,failure_rate,mean_fraction_used,"
           "n_trips\n";
    for (const SweepRow& r : rows) {
        out << format_double(r.alpha) << ',' << format_double(r.epsilon) << ','
            << r.clustering_mode << ',' << r.protocol << ','
            << format_double(r.failure_rate) << ',';
        if (r.mean_fraction_used) {
            out << format_double(*r.mean_fraction_used);
        }
        out << ',' << r.n_trips << '\n';
    }
}

}  // namespace routecast
