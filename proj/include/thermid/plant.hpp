#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "thermid/configuration.hpp"
#include "thermid/trace.hpp"

namespace thermid::plant {

/// Lumped single-node RC thermal model of the SoC plus a DVFS power model.
///
/// Power per core is c_dyn * util * f^2 + c_sta * f^1.5 with f in GHz; the die
/// integrates C dT/dt = P - (T - T_amb) / R. Defaults put the hottest legal
/// configuration at about 87.6 degC, under the 90 degC throttle point, with a
/// 22 s time constant.
struct PlantParams {
    double t_amb = 21.0;        ///< degC
    double r_th = 2.0;          ///< K/W
    double c_th = 11.0;         ///< J/K
    double c_dyn_big = 1.75;    ///< W / (GHz^2 core) at full utilization
    double c_dyn_little = 0.34;
    double c_sta_big = 0.41;    ///< W / (GHz^1.5 core)
    double c_sta_little = 0.09;
    double noise_sigma = 0.33;  ///< degC, sensor noise on the recorded temperature
    double throttle_on = 90.0;  ///< degC
    double throttle_off = 85.0; ///< degC
    double throttle_freq = 900.0; ///< MHz, big-cluster clamp while throttled

    double time_constant() const noexcept { return r_th * c_th; }

    /// Throws DataError naming the first violated invariant.
    void validate() const;
};

struct Segment {
    Configuration config;
    double duration_s = 0.0;
};

using Schedule = std::vector<Segment>;

double schedule_duration(const Schedule& s) noexcept;

/// Total package power in watts.
double power(const Configuration& config, const PlantParams& params);

/// One explicit-Euler step of the RC equation. Rejects dt <= 0 and dt larger
/// than half the time constant.
double step_temperature(double t_now, double p_watts, const PlantParams& params, double dt);

/// Fixed point of the RC equation: t_amb + r_th * power.
double steady_state_temperature(const Configuration& config, const PlantParams& params);

/// Segments drawn uniformly over the legal grid with durations uniform on
/// [10, 60] s; the last one is truncated so the total equals total_duration_s.
Schedule random_schedule(double total_duration_s, std::uint64_t seed);

struct SimulationOptions {
    double output_rate_hz = 32.0;
    /// Internal steps per output sample; the internal step is 1/(rate*substeps).
    int substeps = 1;
    /// Starting die temperature. When empty, the plant first runs the first
    /// segment's configuration for ten time constants (throttle active), so the
    /// recording starts from a settled platform.
    std::optional<double> initial_temp;
};

/// Integrates the schedule, recording effective frequencies, utilizations and
/// the noisy temperature at output_rate_hz. Sample k is taken at t = k/rate,
/// before the state is advanced. Throttling clamps f_big to throttle_freq once
/// the true temperature reaches throttle_on, until it falls to throttle_off.
Trace simulate_schedule(const Schedule& schedule, const PlantParams& params, std::uint64_t seed,
                        const SimulationOptions& options = {});

} // namespace thermid::plant
