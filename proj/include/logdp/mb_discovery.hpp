#pragma once

#include "logdp/common.hpp"
#include "logdp/config.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace logdp {

struct CITestResult {
    double statistic = 0.0; // sqrt(n - |cond| - 3) * |fisher z|
    double p_value = 1.0;
    bool independent = true; // p_value > alpha
    int effective_n = 0;
    bool degenerate = false; // zero-variance column or ridge fallback
};

/// Markov blankets per ECM column (by column index). The event-id mapping is
/// attached when the map is persisted or embedded in a bundle.
struct MarkovBlanketMap {
    std::vector<std::vector<int>> related; // sorted, self-excluded
    double alpha = 0.0;
    std::string algorithm = "inc-assoc";
    std::string symmetry = "none";

    int size() const { return static_cast<int>(related.size()); }
    bool is_symmetric() const;
};

struct EventClassification {
    std::vector<int> dependent_events;   // columns with non-empty MB
    std::vector<int> independent_events; // the rest
};

/// Precomputed Pearson correlation structure over the columns of a data
/// matrix. Partial correlations for any (i, j | cond) come from inverting the
/// corresponding correlation submatrix, so every CI test over the same data
/// shares this one pass.
class CorrelationModel {
public:
    static CorrelationModel fit(const Eigen::MatrixXd& X);

    /// Fisher-z partial correlation test of columns i and j given cond.
    /// Zero-variance columns test independent with p = 1 and the degenerate
    /// flag set; a singular conditioning matrix is retried with a ridge.
    CITestResult test(int i, int j, std::span<const int> cond, double alpha,
                      double ridge = 1e-6) const;

    int sample_size() const { return n_; }
    int cols() const { return static_cast<int>(corr_.rows()); }
    bool is_constant(int col) const { return constant_[static_cast<std::size_t>(col)]; }

private:
    Eigen::MatrixXd corr_;
    std::vector<bool> constant_;
    int n_ = 0;
};

/// One-off CI test; fits a CorrelationModel over X first.
CITestResult ci_test(const Eigen::MatrixXd& X, int i, int j, std::span<const int> cond,
                     double alpha);

/// Incremental-association search for the Markov blanket of one column:
/// grow by maximal conditional association while dependent, then shrink
/// members that test independent given the rest. Conditioning sets larger
/// than max_cond are truncated to the most marginally associated members.
/// Deterministic: ties break toward the lower column index.
std::vector<int> discover_mb(const CorrelationModel& model, int focused, const MbConfig& config);

/// Discovers all blankets (optionally in parallel; results are identical to
/// the sequential run) and applies the symmetry rule.
MarkovBlanketMap discover_all(const Eigen::MatrixXd& X, const MbConfig& config, int threads = 1);

/// AND keeps j in MB(i) only when i is in MB(j); OR adds the reciprocal.
MarkovBlanketMap symmetry_correct(const MarkovBlanketMap& raw, SymmetryRule rule);

EventClassification classify_events(const MarkovBlanketMap& mbs);

void save_mb_map(const std::string& path, const MarkovBlanketMap& mbs,
                 const std::vector<int>& event_ids);

} // namespace logdp
