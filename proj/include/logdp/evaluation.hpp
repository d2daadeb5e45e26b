#pragma once

#include "logdp/common.hpp"
#include "logdp/detector.hpp"
#include "logdp/pipeline.hpp"
#include "logdp/sequencer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace logdp {

struct MetricsReport {
    long long tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    bool precision_defined = false, recall_defined = false, f1_defined = false;

    std::string human_text() const;
    std::string json_text(std::uint64_t fingerprint) const;
};

MetricsReport metrics_from_counts(long long tp, long long fp, long long fn, long long tn);

/// Confusion counts and derived metrics of verdicts against ground truth,
/// aligned by sequence id. Throws on the first id divergence.
MetricsReport evaluate(const std::vector<Verdict>& verdicts,
                       const std::vector<std::pair<std::string, Label>>& labels);

std::vector<std::pair<std::string, Label>> labels_of(const EventCountMatrix& X);

/// One planted dependency: target = sum of coeff * source^power + noise.
struct DependencyTerm {
    int source = 0;
    int power = 1; // 1 or 2
    double coeff = 1.0;
};

struct DependencySpec {
    int target = 0;
    std::vector<DependencyTerm> terms;
};

struct IntRange {
    int lo = 0;
    int hi = 0; // inclusive
};

/// Ground-truth generator spec: events without a dependency definition draw
/// uniformly from their base range; targets follow their definition plus
/// uniform integer noise in [-noise_span, +noise_span]. Counts clamp at 0.
struct SyntheticSpec {
    int events = 10;
    std::vector<IntRange> base;        // per event; ignored for targets
    std::vector<DependencySpec> deps;  // acyclic: targets defined in order
    int noise_span = 1;
    double anomaly_rate = 0.1;         // test rows only
    double perturb_sigma = 5.0;        // perturbation magnitude in noise-sigma units
    long n_train = 1000, n_val = 500, n_test = 500;
    std::uint64_t seed = 1;

    void validate() const;
    double noise_sigma() const; // stddev of the uniform integer noise
    std::uint64_t fingerprint() const;

    /// m=10, two linear dependencies and one quadratic one, 1000/500/500
    /// rows, 10% anomalies, 5-sigma perturbations.
    static SyntheticSpec acceptance_default(std::uint64_t seed);
};

enum class AnomalyKind { None, DependencyBreak, ProximityBreak };

struct AnomalyNote {
    std::string sequence_id;
    AnomalyKind kind = AnomalyKind::None;
    int perturbed_event = -1;
};

struct SyntheticData {
    EventCountMatrix train, val, test;
    std::vector<AnomalyNote> notes; // per test row
};

/// Normal rows satisfy every dependency within the noise bound. Each
/// anomalous test row breaks one pattern: a dependency target shifted by the
/// perturbation magnitude toward its marginal mean (invisible to marginal
/// checks), or an independent event shifted far above its mean.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

void save_labels(const std::string& path, const EventCountMatrix& X,
                 const std::vector<AnomalyNote>* notes = nullptr);
std::vector<std::pair<std::string, Label>> load_labels(const std::string& path);

struct BaselineResult {
    std::vector<Verdict> verdicts;
    MetricsReport metrics;
};

/// Ablation: the identical pipeline with every event forced independent, so
/// only proximity patterns are learned.
BaselineResult mean_only_baseline(const EventCountMatrix& X_train, const EventCountMatrix& X_val,
                                  const EventCountMatrix& X_test, const TrainOptions& options);

} // namespace logdp
