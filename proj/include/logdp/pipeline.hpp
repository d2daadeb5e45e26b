#pragma once

#include "logdp/config.hpp"
#include "logdp/detector.hpp"
#include "logdp/mb_discovery.hpp"
#include "logdp/pattern_models.hpp"
#include "logdp/sequencer.hpp"

#include <cstdint>
#include <vector>

namespace logdp {

struct TrainOptions {
    MbConfig mb;
    MlpConfig mlp;
    double margin = 1.0;
    std::uint64_t seed = 1;
    int threads = 1;
    std::uint64_t fingerprint = 0;
    int sentinel_id = -1;
    bool force_all_independent = false; // ablation: skip blanket discovery entirely
};

/// Trains pattern models on a clean training split and calibrates thresholds
/// on the validation split: discover blankets, classify events, fit one
/// model per event (regressor on the blanket for dependent events, mean for
/// independent ones), then set each threshold to the margin times the
/// maximum validation deviation.
ModelBundle train_core(const EventCountMatrix& X_train, const EventCountMatrix& X_val,
                       const TrainOptions& options);

} // namespace logdp
