#pragma once

#include "logdp/common.hpp"
#include "logdp/config.hpp"
#include "logdp/mb_discovery.hpp"
#include "logdp/sequencer.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace logdp {

/// Proximity pattern: the expected value of an independent event is its
/// training-set mean, regardless of the rest of the sequence.
struct MeanModel {
    double mean = 0.0;
};

MeanModel train_mean(const Eigen::MatrixXd& X_train, int focused_col);

/// Dependency pattern: a single-hidden-layer tanh regressor predicting the
/// focused event's count from its related events. Inputs are z-scored by
/// training statistics; the target stays in raw count units so deviations and
/// thresholds are in count units too.
struct MlpRegressor {
    std::vector<int> input_ids; // event ids, sorted; constant inputs already dropped
    Eigen::VectorXd input_mean;
    Eigen::VectorXd input_std; // all > 0
    Eigen::MatrixXd hidden_weights; // h x d
    Eigen::VectorXd hidden_bias;    // h
    Eigen::VectorXd output_weights; // h
    double output_bias = 0.0;
    std::uint64_t seed = 0;
    int epochs_trained = 0;

    int inputs() const { return static_cast<int>(input_ids.size()); }
    int hidden() const { return static_cast<int>(hidden_bias.size()); }

    double predict_standardized(const Eigen::VectorXd& z) const;
    double predict_raw(const Eigen::VectorXd& raw_inputs) const;
};

struct MlpGradients {
    Eigen::MatrixXd hidden_weights;
    Eigen::VectorXd hidden_bias;
    Eigen::VectorXd output_weights;
    double output_bias = 0.0;
};

/// Mean squared error of the regressor over standardized inputs.
double mlp_loss(const MlpRegressor& net, const Eigen::MatrixXd& Z, const Eigen::VectorXd& y);

/// Analytic loss gradients (backpropagation). The finite-difference oracle in
/// the test suite checks these against mlp_loss directly.
MlpGradients mlp_gradients(const MlpRegressor& net, const Eigen::MatrixXd& Z,
                           const Eigen::VectorXd& y, double* loss_out = nullptr);

struct MlpTrainResult {
    std::optional<MlpRegressor> regressor; // empty = fall back to the mean model
    std::string note;
};

/// Trains a dependency regressor with full-batch gradient descent plus
/// momentum. Deterministic given (data, hyperparameters, seed). Falls back
/// (empty result) when rows < min_rows_per_input * |inputs|, when every input
/// is constant, or when the loss stays non-finite after one halved-rate
/// restart.
MlpTrainResult train_mlp(const Eigen::MatrixXd& raw_inputs, const Eigen::VectorXd& target,
                         std::vector<int> input_ids, const MlpConfig& hp, std::uint64_t seed);

struct PatternModel {
    int event_id = 0;
    std::variant<MeanModel, MlpRegressor> model;
    bool fallback = false; // dependent event served by a mean model
    std::string note;

    bool is_dependency() const { return std::holds_alternative<MlpRegressor>(model); }
};

/// Expected value of the model's event for one sequence row (bundle column
/// order). Throws if a required input column is missing from the schema.
double predict_expected(const PatternModel& model, const Eigen::VectorXd& row,
                        const std::vector<int>& schema);

/// |observed - expected| for every (row, event); models aligned with X columns.
Eigen::MatrixXd compute_deviation_matrix(const EventCountMatrix& X,
                                         const std::vector<PatternModel>& models);

struct ThresholdVector {
    std::vector<double> values; // per column, >= 0
    double margin = 1.0;
};

/// Per-event threshold: margin times the column maximum of the validation
/// deviation matrix.
ThresholdVector calibrate_thresholds(const Eigen::MatrixXd& deviations, double margin);

struct ModelBundle {
    std::uint64_t fingerprint = 0;
    std::uint64_t seed = 0;
    MlpConfig hyper;
    double margin = 1.0;
    std::vector<int> event_ids; // schema, ascending
    int sentinel_id = -1;       // -1 when the data has no parser sentinel column
    MarkovBlanketMap blankets;  // column-indexed, symmetry-corrected
    EventClassification classification;
    std::vector<PatternModel> models; // one per column
    ThresholdVector thresholds;
    std::vector<std::string> warnings;

    int column_of(int event_id) const;

    void save(const std::string& path) const;
    static ModelBundle load(const std::string& path);
};

} // namespace logdp
