#include "logdp/pattern_models.hpp"

#include "logdp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

namespace logdp {

MeanModel train_mean(const Eigen::MatrixXd& X_train, int focused_col) {
    if (X_train.rows() == 0) throw Error("cannot train a mean model on an empty matrix");
    return MeanModel{X_train.col(focused_col).mean()};
}

double MlpRegressor::predict_standardized(const Eigen::VectorXd& z) const {
    Eigen::VectorXd h = ((hidden_weights * z) + hidden_bias).array().tanh();
    return output_weights.dot(h) + output_bias;
}

double MlpRegressor::predict_raw(const Eigen::VectorXd& raw_inputs) const {
    Eigen::VectorXd z =
        (raw_inputs - input_mean).cwiseQuotient(input_std);
    return predict_standardized(z);
}

double mlp_loss(const MlpRegressor& net, const Eigen::MatrixXd& Z, const Eigen::VectorXd& y) {
    Eigen::MatrixXd a = Z * net.hidden_weights.transpose();
    a.rowwise() += net.hidden_bias.transpose();
    Eigen::MatrixXd h = a.array().tanh();
    Eigen::VectorXd yhat = h * net.output_weights;
    yhat.array() += net.output_bias;
    return (yhat - y).squaredNorm() / static_cast<double>(Z.rows());
}

MlpGradients mlp_gradients(const MlpRegressor& net, const Eigen::MatrixXd& Z,
                           const Eigen::VectorXd& y, double* loss_out) {
    const double n = static_cast<double>(Z.rows());
    Eigen::MatrixXd a = Z * net.hidden_weights.transpose();
    a.rowwise() += net.hidden_bias.transpose();
    Eigen::MatrixXd h = a.array().tanh();
    Eigen::VectorXd yhat = h * net.output_weights;
    yhat.array() += net.output_bias;
    Eigen::VectorXd err = yhat - y;
    if (loss_out) *loss_out = err.squaredNorm() / n;

    Eigen::VectorXd g = (2.0 / n) * err;
    MlpGradients grads;
    grads.output_weights = h.transpose() * g;
    grads.output_bias = g.sum();
    Eigen::MatrixXd gh =
        (g * net.output_weights.transpose()).array() * (1.0 - h.array().square());
    grads.hidden_weights = gh.transpose() * Z;
    grads.hidden_bias = gh.colwise().sum();
    return grads;
}

namespace {

MlpRegressor init_regressor(int d, int h, std::uint64_t seed, double target_mean) {
    Rng rng(seed);
    MlpRegressor net;
    net.seed = seed;
    net.hidden_weights.resize(h, d);
    const double a = 1.0 / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < d; ++j) net.hidden_weights(i, j) = rng.uniform(-a, a);
    net.hidden_bias = Eigen::VectorXd::Zero(h);
    net.output_weights.resize(h);
    const double b = 1.0 / std::sqrt(static_cast<double>(h));
    for (int i = 0; i < h; ++i) net.output_weights[i] = rng.uniform(-b, b);
    net.output_bias = target_mean; // start at the proximity answer
    return net;
}

bool run_training(MlpRegressor& net, const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                  const MlpConfig& hp, double learning_rate) {
    Eigen::MatrixXd vW = Eigen::MatrixXd::Zero(net.hidden_weights.rows(), net.hidden_weights.cols());
    Eigen::VectorXd vb = Eigen::VectorXd::Zero(net.hidden_bias.size());
    Eigen::VectorXd vw2 = Eigen::VectorXd::Zero(net.output_weights.size());
    double vb2 = 0.0;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        double loss = 0.0;
        MlpGradients g = mlp_gradients(net, Z, y, &loss);
        if (!std::isfinite(loss)) return false;
        vW = hp.momentum * vW - learning_rate * g.hidden_weights;
        vb = hp.momentum * vb - learning_rate * g.hidden_bias;
        vw2 = hp.momentum * vw2 - learning_rate * g.output_weights;
        vb2 = hp.momentum * vb2 - learning_rate * g.output_bias;
        net.hidden_weights += vW;
        net.hidden_bias += vb;
        net.output_weights += vw2;
        net.output_bias += vb2;
        net.epochs_trained = epoch + 1;
    }
    return std::isfinite(mlp_loss(net, Z, y));
}

} // namespace

MlpTrainResult train_mlp(const Eigen::MatrixXd& raw_inputs, const Eigen::VectorXd& target,
                         std::vector<int> input_ids, const MlpConfig& hp, std::uint64_t seed) {
    if (raw_inputs.cols() != static_cast<long>(input_ids.size()))
        throw Error("input id list does not match input matrix width");
    if (raw_inputs.rows() != target.size())
        throw Error("target length does not match input rows");
    if (input_ids.empty()) throw Error("dependency regressor needs at least one input");

    const long n = raw_inputs.rows();
    if (n < static_cast<long>(hp.min_rows_per_input) * raw_inputs.cols()) {
        return {std::nullopt, "insufficient rows (" + std::to_string(n) + ") for " +
                                  std::to_string(raw_inputs.cols()) + " inputs"};
    }

    // Drop constant inputs; their z-score is undefined.
    Eigen::VectorXd mean = raw_inputs.colwise().mean();
    std::vector<int> keep;
    std::string dropped_note;
    for (long j = 0; j < raw_inputs.cols(); ++j) {
        double var = (raw_inputs.col(j).array() - mean[j]).square().sum() /
                     static_cast<double>(n);
        if (var > 0.0) {
            keep.push_back(static_cast<int>(j));
        } else {
            if (!dropped_note.empty()) dropped_note += ",";
            dropped_note += std::to_string(input_ids[static_cast<std::size_t>(j)]);
        }
    }
    if (keep.empty()) return {std::nullopt, "all inputs constant"};

    const int d = static_cast<int>(keep.size());
    Eigen::MatrixXd X(n, d);
    std::vector<int> kept_ids;
    for (int j = 0; j < d; ++j) {
        X.col(j) = raw_inputs.col(keep[static_cast<std::size_t>(j)]);
        kept_ids.push_back(input_ids[static_cast<std::size_t>(keep[static_cast<std::size_t>(j)])]);
    }
    Eigen::VectorXd mu = X.colwise().mean();
    Eigen::VectorXd sigma(d);
    for (int j = 0; j < d; ++j)
        sigma[j] = std::sqrt((X.col(j).array() - mu[j]).square().sum() / static_cast<double>(n));
    Eigen::MatrixXd Z = (X.rowwise() - mu.transpose()).array().rowwise() /
                        sigma.transpose().array();

    std::string note = dropped_note.empty() ? "" : "dropped constant inputs " + dropped_note;
    double rate = hp.learning_rate;
    for (int attempt = 0; attempt < 2; ++attempt) {
        MlpRegressor net = init_regressor(d, hp.hidden, seed, target.mean());
        net.input_ids = kept_ids;
        net.input_mean = mu;
        net.input_std = sigma;
        if (run_training(net, Z, target, hp, rate)) return {std::move(net), note};
        rate *= 0.5; // non-finite loss: halve the rate and restart once
    }
    return {std::nullopt, "training diverged twice; using mean model"};
}

double predict_expected(const PatternModel& model, const Eigen::VectorXd& row,
                        const std::vector<int>& schema) {
    if (const auto* mean = std::get_if<MeanModel>(&model.model)) return mean->mean;
    const auto& net = std::get<MlpRegressor>(model.model);
    Eigen::VectorXd inputs(net.inputs());
    for (int k = 0; k < net.inputs(); ++k) {
        int id = net.input_ids[static_cast<std::size_t>(k)];
        auto it = std::lower_bound(schema.begin(), schema.end(), id);
        if (it == schema.end() || *it != id)
            throw Error("row schema is missing input event " + std::to_string(id) +
                        " required by the model for event " + std::to_string(model.event_id));
        inputs[k] = row[it - schema.begin()];
    }
    return net.predict_raw(inputs);
}

Eigen::MatrixXd compute_deviation_matrix(const EventCountMatrix& X,
                                         const std::vector<PatternModel>& models) {
    if (static_cast<long>(models.size()) != X.cols())
        throw Error("need exactly one model per event column (" + std::to_string(models.size()) +
                    " models, " + std::to_string(X.cols()) + " columns)");
    Eigen::MatrixXd observed = X.as_double();
    Eigen::MatrixXd deviations(X.rows(), X.cols());
    for (long i = 0; i < X.rows(); ++i) {
        Eigen::VectorXd row = observed.row(i);
        for (long j = 0; j < X.cols(); ++j) {
            double expected;
            try {
                expected = predict_expected(models[static_cast<std::size_t>(j)], row, X.event_ids);
            } catch (const Error& e) {
                throw Error("row " + std::to_string(i) + " ('" +
                            X.sequence_ids[static_cast<std::size_t>(i)] + "'), event " +
                            std::to_string(X.event_ids[static_cast<std::size_t>(j)]) + ": " +
                            e.what());
            }
            deviations(i, j) = std::abs(row[j] - expected);
        }
    }
    return deviations;
}

ThresholdVector calibrate_thresholds(const Eigen::MatrixXd& deviations, double margin) {
    if (deviations.rows() == 0) throw Error("validation set empty");
    if (margin < 1.0) throw Error("margin must be >= 1");
    ThresholdVector t;
    t.margin = margin;
    t.values.resize(static_cast<std::size_t>(deviations.cols()));
    for (long j = 0; j < deviations.cols(); ++j)
        t.values[static_cast<std::size_t>(j)] = margin * deviations.col(j).maxCoeff();
    return t;
}

// ---------------------------------------------------------------------------
// Bundle serialization
// ---------------------------------------------------------------------------

int ModelBundle::column_of(int event_id) const {
    auto it = std::lower_bound(event_ids.begin(), event_ids.end(), event_id);
    if (it == event_ids.end() || *it != event_id) return -1;
    return static_cast<int>(it - event_ids.begin());
}

namespace {

void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
    for (long i = 0; i < v.size(); ++i) os << ' ' << text::format_double(v[i]);
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
    for (long i = 0; i < m.rows(); ++i)
        for (long j = 0; j < m.cols(); ++j) os << ' ' << text::format_double(m(i, j));
}

void write_ids(std::ostream& os, const std::vector<int>& ids) {
    for (int id : ids) os << ' ' << id;
}

} // namespace

void ModelBundle::save(const std::string& path) const {
    std::ostringstream os;
    os << "logdp-bundle v1\n";
    os << "fingerprint " << text::to_hex(fingerprint) << "\n";
    os << "seed " << seed << "\n";
    os << "margin " << text::format_double(margin) << "\n";
    os << "mlp hidden " << hyper.hidden << " epochs " << hyper.epochs << " learning_rate "
       << text::format_double(hyper.learning_rate) << " momentum "
       << text::format_double(hyper.momentum) << " min_rows_per_input "
       << hyper.min_rows_per_input << "\n";
    os << "events";
    write_ids(os, event_ids);
    os << "\n";
    os << "sentinel " << sentinel_id << "\n";
    os << "mb-header algorithm " << blankets.algorithm << " alpha "
       << text::format_double(blankets.alpha) << " symmetry " << blankets.symmetry << "\n";
    for (int i = 0; i < blankets.size(); ++i) {
        os << "mb " << event_ids[static_cast<std::size_t>(i)] << " :";
        for (int j : blankets.related[static_cast<std::size_t>(i)])
            os << ' ' << event_ids[static_cast<std::size_t>(j)];
        os << "\n";
    }
    os << "dependent";
    for (int c : classification.dependent_events) os << ' ' << event_ids[static_cast<std::size_t>(c)];
    os << "\n";
    os << "independent";
    for (int c : classification.independent_events)
        os << ' ' << event_ids[static_cast<std::size_t>(c)];
    os << "\n";
    for (const auto& m : models) {
        if (const auto* mean = std::get_if<MeanModel>(&m.model)) {
            os << "model " << m.event_id << " mean " << text::format_double(mean->mean);
            if (m.fallback) os << " fallback";
            os << "\n";
        } else {
            const auto& net = std::get<MlpRegressor>(m.model);
            os << "model " << m.event_id << " mlp " << net.inputs() << " " << net.hidden();
            write_ids(os, net.input_ids);
            write_vector(os, net.input_mean);
            write_vector(os, net.input_std);
            write_matrix(os, net.hidden_weights);
            write_vector(os, net.hidden_bias);
            write_vector(os, net.output_weights);
            os << ' ' << text::format_double(net.output_bias);
            os << ' ' << net.seed << ' ' << net.epochs_trained << "\n";
        }
        if (!m.note.empty()) os << "note " << m.event_id << " " << m.note << "\n";
    }
    for (std::size_t j = 0; j < thresholds.values.size(); ++j) {
        os << "threshold " << event_ids[j] << ' ' << text::format_double(thresholds.values[j])
           << "\n";
    }
    for (const auto& w : warnings) os << "warning " << w << "\n";
    write_file(path, os.str());
}

namespace {

class TokenCursor {
public:
    explicit TokenCursor(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {}
    const std::string& next() {
        if (pos_ >= tokens_.size()) throw Error("truncated bundle record");
        return tokens_[pos_++];
    }
    double next_double() { return text::parse_double(next()); }
    int next_int() { return static_cast<int>(text::parse_int(next())); }
    std::uint64_t next_u64() { return static_cast<std::uint64_t>(text::parse_int(next())); }
    bool done() const { return pos_ >= tokens_.size(); }

private:
    std::vector<std::string> tokens_;
    std::size_t pos_ = 0;
};

} // namespace

ModelBundle ModelBundle::load(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "logdp-bundle v1")
        throw Error("not a model bundle: " + path);

    ModelBundle b;
    std::map<int, int> col_of; // event id -> column
    auto col = [&](int id) {
        auto it = col_of.find(id);
        if (it == col_of.end()) throw Error("unknown event id " + std::to_string(id) + " in " + path);
        return it->second;
    };

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("note ", 0) == 0) {
            auto rest = std::string_view(line).substr(5);
            auto sp = rest.find(' ');
            int id = static_cast<int>(text::parse_int(rest.substr(0, sp)));
            for (auto& m : b.models)
                if (m.event_id == id) m.note = std::string(rest.substr(sp + 1));
            continue;
        }
        if (line.rfind("warning ", 0) == 0) {
            b.warnings.emplace_back(line.substr(8));
            continue;
        }
        TokenCursor cur(text::split_ws(line));
        const std::string kind = cur.next();
        if (kind == "fingerprint") {
            b.fingerprint = text::from_hex(cur.next());
        } else if (kind == "seed") {
            b.seed = cur.next_u64();
        } else if (kind == "margin") {
            b.margin = cur.next_double();
            b.thresholds.margin = b.margin;
        } else if (kind == "mlp") {
            while (!cur.done()) {
                const std::string key = cur.next();
                if (key == "hidden") b.hyper.hidden = cur.next_int();
                else if (key == "epochs") b.hyper.epochs = cur.next_int();
                else if (key == "learning_rate") b.hyper.learning_rate = cur.next_double();
                else if (key == "momentum") b.hyper.momentum = cur.next_double();
                else if (key == "min_rows_per_input") b.hyper.min_rows_per_input = cur.next_int();
                else throw Error("unknown mlp field '" + key + "' in " + path);
            }
        } else if (kind == "events") {
            while (!cur.done()) b.event_ids.push_back(cur.next_int());
            for (std::size_t j = 0; j < b.event_ids.size(); ++j)
                col_of[b.event_ids[j]] = static_cast<int>(j);
            b.blankets.related.resize(b.event_ids.size());
        } else if (kind == "sentinel") {
            b.sentinel_id = cur.next_int();
        } else if (kind == "mb-header") {
            while (!cur.done()) {
                const std::string key = cur.next();
                if (key == "algorithm") b.blankets.algorithm = cur.next();
                else if (key == "alpha") b.blankets.alpha = cur.next_double();
                else if (key == "symmetry") b.blankets.symmetry = cur.next();
            }
        } else if (kind == "mb") {
            int id = cur.next_int();
            if (cur.next() != ":") throw Error("bad mb record in " + path);
            auto& rel = b.blankets.related[static_cast<std::size_t>(col(id))];
            while (!cur.done()) rel.push_back(col(cur.next_int()));
            std::sort(rel.begin(), rel.end());
        } else if (kind == "dependent") {
            while (!cur.done()) b.classification.dependent_events.push_back(col(cur.next_int()));
        } else if (kind == "independent") {
            while (!cur.done()) b.classification.independent_events.push_back(col(cur.next_int()));
        } else if (kind == "model") {
            PatternModel m;
            m.event_id = cur.next_int();
            const std::string mk = cur.next();
            if (mk == "mean") {
                MeanModel mean{cur.next_double()};
                if (!cur.done() && cur.next() == "fallback") m.fallback = true;
                m.model = mean;
            } else if (mk == "mlp") {
                MlpRegressor net;
                int d = cur.next_int();
                int h = cur.next_int();
                net.input_ids.resize(static_cast<std::size_t>(d));
                for (int k = 0; k < d; ++k) net.input_ids[static_cast<std::size_t>(k)] = cur.next_int();
                net.input_mean.resize(d);
                for (int k = 0; k < d; ++k) net.input_mean[k] = cur.next_double();
                net.input_std.resize(d);
                for (int k = 0; k < d; ++k) net.input_std[k] = cur.next_double();
                net.hidden_weights.resize(h, d);
                for (int i = 0; i < h; ++i)
                    for (int k = 0; k < d; ++k) net.hidden_weights(i, k) = cur.next_double();
                net.hidden_bias.resize(h);
                for (int i = 0; i < h; ++i) net.hidden_bias[i] = cur.next_double();
                net.output_weights.resize(h);
                for (int i = 0; i < h; ++i) net.output_weights[i] = cur.next_double();
                net.output_bias = cur.next_double();
                net.seed = cur.next_u64();
                net.epochs_trained = cur.next_int();
                m.model = std::move(net);
            } else {
                throw Error("unknown model kind '" + mk + "' in " + path);
            }
            b.models.push_back(std::move(m));
        } else if (kind == "threshold") {
            cur.next_int(); // event id; thresholds arrive in column order
            b.thresholds.values.push_back(cur.next_double());
        } else {
            throw Error("unknown bundle record '" + kind + "' in " + path);
        }
    }
    b.thresholds.margin = b.margin;
    return b;
}

} // namespace logdp
