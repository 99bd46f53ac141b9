#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "thermid/io.hpp"
#include "thermid/modelselect.hpp"

namespace thermid::pipeline {

/// Random schedule and noisy plant run for an experiment; the schedule draws
/// from derive_seed(seed, "schedule") and the sensor noise from
/// derive_seed(seed, "noise").
Trace simulate_trace(const io::ExperimentConfig& config, std::uint64_t seed);

/// A trace at the identification rate with its development/test split.
struct Prepared {
    Trace resampled;
    modelselect::DevTestSplit split;
    std::size_t test_begin = 0; ///< first test row within `resampled`
};

/// Resamples (when the rates differ) and splits 79/1/20.
Prepared prepare(const Trace& trace, double target_hz);

modelselect::EvalOptions eval_options(const io::ExperimentConfig& config);

/// Free-run prediction over the test rows, warmed up on the preceding inputs
/// (which reach back through the gap into the development rows).
Eigen::VectorXd predict_test(const sysid::StateSpaceModel& model, const Prepared& data,
                             double warmup_s);

struct Trained {
    sysid::Identification identification;
    double test_mse = 0.0;
};

/// Fits on the whole development split and scores the test split.
Trained train(const Prepared& data, const features::RegressorSpec& spec, int order,
              const modelselect::EvalOptions& options);

} // namespace thermid::pipeline
