#pragma once

#include <algorithm>
#include <vector>

#include <Eigen/Dense>

#include "thermid/explorer.hpp"
#include "thermid/plant.hpp"
#include "thermid/rng.hpp"
#include "thermid/sysid.hpp"

namespace thermid::testing {

/// Stable discrete system used as ground truth for identification tests.
struct LtiSystem {
    Eigen::MatrixXd A, B, C;
};

/// Random stable system: a random orthogonal basis around a block-diagonal
/// core with one complex pair and real poles, radius at most 0.95.
inline LtiSystem random_stable_system(int order, int inputs, std::uint64_t seed) {
    Rng rng(seed);
    auto gauss = [&](int r, int c) {
        Eigen::MatrixXd m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
        return m;
    };
    Eigen::MatrixXd core = Eigen::MatrixXd::Zero(order, order);
    int k = 0;
    if (order >= 2) {
        const double radius = rng.uniform(0.8, 0.95);
        const double angle = rng.uniform(0.1, 0.6);
        core(0, 0) = core(1, 1) = radius * std::cos(angle);
        core(0, 1) = radius * std::sin(angle);
        core(1, 0) = -core(0, 1);
        k = 2;
    }
    for (; k < order; ++k) core(k, k) = rng.uniform(0.3, 0.9);
    const Eigen::MatrixXd q = gauss(order, order).householderQr().householderQ();
    LtiSystem s;
    s.A = q * core * q.transpose();
    s.B = gauss(order, inputs);
    s.C = gauss(1, order);
    return s;
}

inline Eigen::VectorXd run_system(const LtiSystem& s, const Eigen::MatrixXd& u) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(s.A.rows());
    Eigen::VectorXd y(u.rows());
    for (Eigen::Index k = 0; k < u.rows(); ++k) {
        y(k) = (s.C * x)(0);
        x = s.A * x + s.B * u.row(k).transpose();
    }
    return y;
}

inline Eigen::MatrixXd white_inputs(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd u(rows, cols);
    for (Eigen::Index k = 0; k < rows; ++k)
        for (Eigen::Index j = 0; j < cols; ++j) u(k, j) = rng.normal();
    return u;
}

/// Adds white noise scaled to the requested signal-to-noise ratio (power, dB).
inline Eigen::VectorXd add_noise_db(const Eigen::VectorXd& y, double snr_db, std::uint64_t seed) {
    Rng rng(seed);
    const double signal_var = (y.array() - y.mean()).square().mean();
    const double sigma = std::sqrt(signal_var / std::pow(10.0, snr_db / 10.0));
    Eigen::VectorXd out = y;
    for (Eigen::Index k = 0; k < y.size(); ++k) out(k) += sigma * rng.normal();
    return out;
}

inline Configuration uniform_config(double f_big, double f_little, double u) {
    Configuration c;
    c.f_big_mhz = f_big;
    c.f_little_mhz = f_little;
    c.util.fill(u);
    return c;
}

inline Configuration random_grid_config(Rng& rng) {
    Configuration c;
    c.f_big_mhz = levels::big_mhz[rng.index(levels::big_mhz.size())];
    c.f_little_mhz = levels::little_mhz[rng.index(levels::little_mhz.size())];
    for (auto& u : c.util) u = levels::util[rng.index(levels::util.size())];
    return c;
}

/// Scalar model x' = a x + b v, y = x + offset.
inline sysid::StateSpaceModel scalar_model(double a, double b, double offset = 0.0) {
    sysid::StateSpaceModel m;
    m.A = Eigen::MatrixXd::Constant(1, 1, a);
    m.B = Eigen::MatrixXd::Constant(1, 1, b);
    m.C = Eigen::MatrixXd::Constant(1, 1, 1.0);
    m.K = Eigen::MatrixXd::Zero(1, 1);
    m.output_offset = offset;
    m.sample_rate = 5.0;
    m.stable = std::abs(a) < 1.0;
    return m;
}

/// O(n^2) dominance filter over feasible rows; exact (perf, temp) ties keep
/// the smaller configuration. Sorted by ascending performance proxy.
inline std::vector<explorer::ExplorationResult> brute_force_front(
    const std::vector<explorer::ExplorationResult>& all) {
    std::vector<explorer::ExplorationResult> out;
    for (const auto& r : all) {
        if (!r.feasible) continue;
        bool dropped = false;
        for (const auto& s : all) {
            if (!s.feasible) continue;
            const bool dominates = s.perf_proxy_ghz >= r.perf_proxy_ghz && s.predicted_c <= r.predicted_c &&
                                   (s.perf_proxy_ghz > r.perf_proxy_ghz || s.predicted_c < r.predicted_c);
            const bool same_point_smaller = s.perf_proxy_ghz == r.perf_proxy_ghz &&
                                            s.predicted_c == r.predicted_c && s.config < r.config;
            if (dominates || same_point_smaller) {
                dropped = true;
                break;
            }
        }
        if (!dropped) out.push_back(r);
    }
    std::sort(out.begin(), out.end(),
              [](const auto& x, const auto& y) { return x.perf_proxy_ghz < y.perf_proxy_ghz; });
    return out;
}

} // namespace thermid::testing
