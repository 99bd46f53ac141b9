#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "thermid/features.hpp"

namespace thermid::sysid {

/// Innovation-form state-space model with no feedthrough (D = 0):
///
///     x(k+1) = A x(k) + B v(k) + K e(k)
///     y(k)   = C x(k) + output_offset + e(k)
///
/// where v is the normalized regressor vector produced by `spec`.
struct StateSpaceModel {
    Eigen::MatrixXd A; ///< n x n
    Eigen::MatrixXd B; ///< n x m
    Eigen::MatrixXd C; ///< 1 x n
    Eigen::MatrixXd K; ///< n x 1
    double sample_rate = 0.0;
    features::RegressorSpec spec;
    double output_offset = 0.0;
    bool stable = false;

    int order() const noexcept { return static_cast<int>(A.rows()); }
    int inputs() const noexcept { return static_cast<int>(B.cols()); }

    /// n^2 + n*m + n: the entries of A, B and C. K is estimated but not counted.
    std::size_t parameter_count() const noexcept { return parameter_count(order(), inputs()); }
    static constexpr std::size_t parameter_count(std::size_t n, std::size_t m) noexcept {
        return n * n + n * m + n;
    }

    double spectral_radius() const;

    /// Checks matrix shapes against order and input count; throws DataError.
    void validate() const;
};

struct N4sidOptions {
    int horizon = 0;            ///< block rows of the Hankel matrices; 0 = default_horizon(order)
    double sv_tolerance = 1e-10; ///< singular values below tol * sigma_1 count as zero
    std::size_t chunk_rows = 0; ///< Hankel rows per streamed QR update; 0 = automatic
    double sample_rate = 0.0;   ///< copied into the model
};

struct Identification {
    StateSpaceModel model;
    Eigen::VectorXd singular_values; ///< of the weighted oblique projection
    std::vector<std::string> warnings;
};

/// max(order + 2, ceil(1.2 * order)).
int default_horizon(int order);

/// Minimum sample count accepted by n4sid_identify.
std::size_t min_samples(int order, int horizon, int inputs);

/// Combined deterministic-stochastic subspace identification (N4SID, identity
/// weighting) of a single-output system.
///
/// `v` is samples x m (normalize it first) and `y` the output. Both are
/// mean-centered internally and output_offset absorbs the means, so a stable
/// model reproduces the training level from the raw normalized inputs.
///
/// Steps: a streamed Householder QR reduces the past/future block-Hankel
/// data; the oblique projections of future outputs (at horizons i and i-1)
/// are formed from the triangular factor; the SVD of the first gives the
/// extended observability matrix, and both give the state sequences. A and C
/// come from least squares on the shifted states. Eigenvalues of A outside
/// the unit circle are reflected to 1/conj(lambda) (capped at modulus 0.999)
/// with a warning. B is then the least-squares fit of the input contribution
/// to the output, with A and C fixed and D = 0, estimated jointly with the
/// initial state. K comes from the steady-state Riccati equation on the state
/// residual covariances (K = 0 with a warning if that fails).
Identification n4sid_identify(const Eigen::MatrixXd& v, const Eigen::VectorXd& y, int order,
                              const N4sidOptions& options = {});

/// Free-run output from x(0) = 0.
Eigen::VectorXd simulate(const StateSpaceModel& model, const Eigen::MatrixXd& v);

/// Free-run output from an explicit initial state.
Eigen::VectorXd simulate(const StateSpaceModel& model, const Eigen::MatrixXd& v,
                         const Eigen::VectorXd& x0);

/// State the model settles in under the constant input `v`: (I - A)^-1 B v.
/// Returns the zero state for models that are not stable.
Eigen::VectorXd steady_state_state(const StateSpaceModel& model, const Eigen::VectorXd& v);

/// One-step-ahead predictor: x(k+1) = (A - K C) x(k) + B v(k) + K (y(k) - offset).
Eigen::VectorXd predict_one_step(const StateSpaceModel& model, const Eigen::MatrixXd& v,
                                 const Eigen::VectorXd& y);

/// Mean squared error after dropping the first `discard` samples.
double mse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& measured,
           std::size_t discard = 0);

/// NRMSE fit in percent: 100 * (1 - |y - yhat| / |y - mean(y)|).
double nrmse_fit(const Eigen::VectorXd& predicted, const Eigen::VectorXd& measured);

/// DC gain C (I - A)^-1 B (1 x m). Throws DataError unless the spectral
/// radius is below 1 - 1e-9.
Eigen::RowVectorXd steady_state_gain(const StateSpaceModel& model);

/// Number of (I - A) solves performed by steady_state_gain in this process.
std::uint64_t gain_solve_count() noexcept;

} // namespace thermid::sysid
