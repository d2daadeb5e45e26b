#include "logdp/pipeline.hpp"

#include "logdp/rng.hpp"

#include <future>
#include <string>

namespace logdp {

namespace {

template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    const int workers = std::min(threads, count);
    std::vector<std::future<void>> futures;
    for (int w = 0; w < workers; ++w) {
        futures.push_back(std::async(std::launch::async, [&, w] {
            for (int i = w; i < count; i += workers) fn(i);
        }));
    }
    for (auto& f : futures) f.get();
}

} // namespace

ModelBundle train_core(const EventCountMatrix& X_train, const EventCountMatrix& X_val,
                       const TrainOptions& options) {
    if (X_train.event_ids != X_val.event_ids)
        throw Error("training and validation matrices disagree on event columns");
    if (X_train.rows() == 0) throw Error("training set empty");
    if (X_val.rows() == 0) throw Error("validation set empty");

    const int m = static_cast<int>(X_train.event_ids.size());
    ModelBundle bundle;
    bundle.fingerprint = options.fingerprint;
    bundle.seed = options.seed;
    bundle.hyper = options.mlp;
    bundle.margin = options.margin;
    bundle.event_ids = X_train.event_ids;
    bundle.sentinel_id = options.sentinel_id;

    Eigen::MatrixXd train = X_train.as_double();

    if (options.force_all_independent) {
        bundle.blankets.related.assign(static_cast<std::size_t>(m), {});
        bundle.blankets.alpha = options.mb.alpha;
        bundle.blankets.algorithm = "none";
        bundle.blankets.symmetry = options.mb.symmetry == SymmetryRule::And ? "AND" : "OR";
    } else {
        bundle.blankets = discover_all(train, options.mb, options.threads);
    }
    bundle.classification = classify_events(bundle.blankets);

    if (X_train.rows() <= 4)
        bundle.warnings.push_back("training set too small for independence tests; "
                                  "all events treated as independent");

    bundle.models.resize(static_cast<std::size_t>(m));
    std::vector<std::string> warnings(static_cast<std::size_t>(m));
    parallel_for(m, options.threads, [&](int j) {
        const auto& mb = bundle.blankets.related[static_cast<std::size_t>(j)];
        const int event_id = X_train.event_ids[static_cast<std::size_t>(j)];
        PatternModel model;
        model.event_id = event_id;
        if (mb.empty()) {
            model.model = train_mean(train, j);
        } else {
            Eigen::MatrixXd inputs(train.rows(), static_cast<long>(mb.size()));
            std::vector<int> input_ids;
            for (std::size_t k = 0; k < mb.size(); ++k) {
                inputs.col(static_cast<long>(k)) = train.col(mb[k]);
                input_ids.push_back(X_train.event_ids[static_cast<std::size_t>(mb[k])]);
            }
            auto trained = train_mlp(inputs, train.col(j), input_ids, options.mlp,
                                     seed_for_event(options.seed, event_id));
            if (trained.regressor) {
                model.model = std::move(*trained.regressor);
                model.note = trained.note;
            } else {
                model.model = train_mean(train, j);
                model.fallback = true;
                model.note = trained.note;
                warnings[static_cast<std::size_t>(j)] =
                    "event " + std::to_string(event_id) + ": " + trained.note;
            }
        }
        bundle.models[static_cast<std::size_t>(j)] = std::move(model);
    });
    for (auto& w : warnings)
        if (!w.empty()) bundle.warnings.push_back(std::move(w));

    Eigen::MatrixXd deviations = compute_deviation_matrix(X_val, bundle.models);
    bundle.thresholds = calibrate_thresholds(deviations, options.margin);
    return bundle;
}

} // namespace logdp
