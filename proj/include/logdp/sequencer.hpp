#pragma once

#include "logdp/common.hpp"
#include "logdp/config.hpp"
#include "logdp/log_ingest.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace logdp {

struct LogSequence {
    std::string sequence_id; // session key or window ordinal
    std::vector<std::uint64_t> line_nos;
    std::vector<int> template_ids; // aligned with line_nos
    Label label = Label::Unknown;
};

struct EventCountMatrix {
    Eigen::MatrixXi counts;                // n x m
    std::vector<int> event_ids;            // m, strictly ascending
    std::vector<std::string> sequence_ids; // n
    std::vector<Label> labels;             // n

    long rows() const { return counts.rows(); }
    long cols() const { return counts.cols(); }

    Eigen::MatrixXd as_double() const { return counts.cast<double>(); }

    /// Column position for an event id, or -1.
    int column_of(int event_id) const;

    void save(const std::string& path, std::uint64_t pipeline_fingerprint) const;
    static std::pair<EventCountMatrix, std::uint64_t> load(const std::string& path);
};

struct PartitionResult {
    std::vector<LogSequence> sequences;
    std::uint64_t missing_session = 0; // messages excluded for lack of a session key
};

/// Groups messages into sequences. Session and fixed modes assign each
/// message to exactly one sequence; sliding windows may overlap. A windowed
/// sequence is anomalous iff any member message is; session labels can be
/// overridden by a ground-truth table.
PartitionResult partition(const std::vector<ParsedMessage>& messages, const WindowSpec& spec,
                          const std::map<std::string, Label>* session_labels = nullptr);

/// Counts event occurrences per sequence. Columns are ascending template ids
/// plus one trailing sentinel column for unseen templates.
EventCountMatrix build_ecm(const std::vector<LogSequence>& sequences,
                           const TemplateStore& store);

/// Chronological split: first ceil(n * ratio) rows train, remainder validate.
/// Rejects anomalous-labeled rows — training data must be clean.
std::pair<EventCountMatrix, EventCountMatrix> split_train_val(const EventCountMatrix& X,
                                                              double ratio);

/// Drops anomalous-labeled rows, preserving order. Returns the removed count.
std::pair<EventCountMatrix, std::size_t> drop_anomalous_rows(const EventCountMatrix& X);

} // namespace logdp
