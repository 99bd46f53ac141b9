#include "thermid/plant.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "thermid/error.hpp"
#include "thermid/rng.hpp"

namespace thermid::plant {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw DataError(std::string("plant parameters: ") + what);
}

struct ThrottleState {
    bool active = false;

    void update(double temp, const PlantParams& p) {
        if (!active && temp >= p.throttle_on) active = true;
        else if (active && temp <= p.throttle_off) active = false;
    }

    Configuration apply(Configuration c, const PlantParams& p) const {
        if (active) c.f_big_mhz = std::min(c.f_big_mhz, p.throttle_freq);
        return c;
    }
};

double euler(double t_now, double p_watts, const PlantParams& params, double dt) {
    return t_now + (dt / params.c_th) * (p_watts - (t_now - params.t_amb) / params.r_th);
}

} // namespace

void PlantParams::validate() const {
    require(r_th > 0.0, "r_th must be positive");
    require(c_th > 0.0, "c_th must be positive");
    require(c_dyn_big >= 0.0 && c_dyn_little >= 0.0, "dynamic power coefficients must be >= 0");
    require(c_sta_big >= 0.0 && c_sta_little >= 0.0, "static power coefficients must be >= 0");
    require(noise_sigma >= 0.0, "noise_sigma must be >= 0");
    require(throttle_off < throttle_on, "throttle_off must be below throttle_on");
    require(throttle_freq > 0.0, "throttle_freq must be positive");
    require(std::isfinite(t_amb), "t_amb must be finite");
}

double schedule_duration(const Schedule& s) noexcept {
    return std::accumulate(s.begin(), s.end(), 0.0,
                           [](double acc, const Segment& seg) { return acc + seg.duration_s; });
}

double power(const Configuration& config, const PlantParams& params) {
    double total = 0.0;
    for (int core = 0; core < kCoreCount; ++core) {
        const bool big = cluster_of(core) == Cluster::big;
        const double f = config.core_frequency_mhz(core) / 1000.0;
        const double c_dyn = big ? params.c_dyn_big : params.c_dyn_little;
        const double c_sta = big ? params.c_sta_big : params.c_sta_little;
        total += c_dyn * config.util[core] * f * f + c_sta * f * std::sqrt(f);
    }
    return total;
}

double step_temperature(double t_now, double p_watts, const PlantParams& params, double dt) {
    if (!(dt > 0.0)) throw DataError("step_temperature: dt must be positive");
    if (dt > params.time_constant() / 2.0)
        throw DataError("step_temperature: dt exceeds half the thermal time constant (unstable)");
    return euler(t_now, p_watts, params, dt);
}

double steady_state_temperature(const Configuration& config, const PlantParams& params) {
    return params.t_amb + params.r_th * power(config, params);
}

Schedule random_schedule(double total_duration_s, std::uint64_t seed) {
    if (!(total_duration_s >= 10.0))
        throw DataError("random_schedule: total duration must be at least 10 s");
    Rng rng(seed);
    Schedule out;
    double elapsed = 0.0;
    while (elapsed < total_duration_s) {
        Segment seg;
        seg.config.f_big_mhz = levels::big_mhz[rng.index(levels::big_mhz.size())];
        seg.config.f_little_mhz = levels::little_mhz[rng.index(levels::little_mhz.size())];
        for (auto& u : seg.config.util) u = levels::util[rng.index(levels::util.size())];
        seg.duration_s = std::min(rng.uniform(10.0, 60.0), total_duration_s - elapsed);
        elapsed += seg.duration_s;
        out.push_back(seg);
    }
    return out;
}

Trace simulate_schedule(const Schedule& schedule, const PlantParams& params, std::uint64_t seed,
                        const SimulationOptions& options) {
    params.validate();
    if (schedule.empty()) throw DataError("simulate_schedule: empty schedule");
    if (!(options.output_rate_hz > 0.0) || options.substeps < 1)
        throw DataError("simulate_schedule: invalid output rate or substep count");

    const double dt = 1.0 / (options.output_rate_hz * options.substeps);
    if (dt > params.time_constant() / 10.0)
        throw DataError("simulate_schedule: internal step too large for the time constant");

    const double total = schedule_duration(schedule);
    const auto n_samples = static_cast<std::size_t>(std::llround(total * options.output_rate_hz));

    ThrottleState throttle;
    double temp = params.t_amb;
    if (options.initial_temp) {
        temp = *options.initial_temp;
    } else {
        const auto settle_steps =
            static_cast<std::size_t>(std::ceil(10.0 * params.time_constant() / dt));
        for (std::size_t s = 0; s < settle_steps; ++s) {
            throttle.update(temp, params);
            temp = euler(temp, power(throttle.apply(schedule.front().config, params), params),
                         params, dt);
        }
    }

    Rng noise(seed);
    Trace trace;
    trace.sample_rate = options.output_rate_hz;
    trace.reserve(n_samples);

    std::size_t seg = 0;
    double seg_end = schedule.front().duration_s;
    for (std::size_t k = 0; k < n_samples; ++k) {
        const double t = static_cast<double>(k) / options.output_rate_hz;
        while (t >= seg_end && seg + 1 < schedule.size()) {
            ++seg;
            seg_end += schedule[seg].duration_s;
        }
        throttle.update(temp, params);
        const Configuration effective = throttle.apply(schedule[seg].config, params);
        const double recorded =
            params.noise_sigma > 0.0 ? temp + params.noise_sigma * noise.normal() : temp;
        trace.push_back(t, effective, recorded);

        temp = euler(temp, power(effective, params), params, dt);
        // The clamp reacts at the internal rate; only the first substep is recorded.
        for (int s = 1; s < options.substeps; ++s) {
            throttle.update(temp, params);
            temp = euler(temp, power(throttle.apply(schedule[seg].config, params), params),
                         params, dt);
        }
    }
    return trace;
}

} // namespace thermid::plant
