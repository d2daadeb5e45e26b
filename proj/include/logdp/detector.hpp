#pragma once

#include "logdp/common.hpp"
#include "logdp/pattern_models.hpp"
#include "logdp/sequencer.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace logdp {

struct Verdict {
    std::string sequence_id;
    std::vector<double> deviations;  // per bundle column
    std::vector<int> violated_events; // event ids with deviation strictly above threshold
    bool is_anomaly = false;          // violated non-empty or an unseen template occurred
    bool unseen_event_hit = false;
};

/// Scores one sequence row (bundle column order) against every pattern.
/// Strict exceedance: deviation equal to the threshold passes. A nonzero
/// count in the sentinel column flags the sequence regardless of thresholds.
Verdict score_sequence(const Eigen::VectorXd& row, const ModelBundle& bundle);

/// Row-wise scoring, order preserving. Rows may be scored in parallel; the
/// verdict list is identical either way. Throws on a schema mismatch,
/// naming the differing columns.
std::vector<Verdict> detect_batch(const EventCountMatrix& X_test, const ModelBundle& bundle,
                                  int threads = 1);

std::size_t count_anomalies(const std::vector<Verdict>& verdicts);

void save_verdicts(const std::string& path, const std::vector<Verdict>& verdicts,
                   const ModelBundle& bundle);
std::vector<Verdict> load_verdicts(const std::string& path, std::uint64_t* fingerprint_out = nullptr);

} // namespace logdp
