#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "thermid/configuration.hpp"
#include "thermid/plant.hpp"
#include "thermid/sysid.hpp"

namespace thermid::explorer {

/// Level lists spanning the configuration space. Cores at index >= core_count
/// stay at the lowest utilization level, so the space has
/// |util|^core_count * |big| * |little| points.
struct ConfigGrid {
    std::vector<double> util_levels;
    int core_count = kCoreCount;
    std::vector<double> big_mhz;
    std::vector<double> little_mhz;

    /// The platform grid: 5 utilization levels, 8 cores, 10 big and 6 little frequencies.
    static ConfigGrid defaults();

    /// Throws DataError unless lists are non-empty and strictly ascending,
    /// frequencies are positive, utilizations lie in [0, 1] and
    /// 1 <= core_count <= 8.
    void validate() const;

    /// Human-readable one-liner, also stored in run summaries.
    std::string describe() const;

    /// "default", or semicolon-separated overrides of the defaults, e.g.
    /// "util=0,1;cores=2;big=1000,1500,1900;little=1000,1500".
    static ConfigGrid parse(const std::string& text);
};

/// Exact |util|^C * |big| * |little|; throws DataError on 64-bit overflow.
std::uint64_t config_count(const ConfigGrid& grid);

/// The configuration at position `index` of the lexicographic order over
/// (f_big, f_little, u0, ..., u7).
Configuration configuration_at(const ConfigGrid& grid, std::uint64_t index);

/// Forward iterator over the grid, restartable at any index.
class Enumerator {
public:
    explicit Enumerator(const ConfigGrid& grid, std::uint64_t start = 0);

    /// Writes the next configuration to `out`; false once exhausted.
    bool next(Configuration& out);
    std::uint64_t position() const noexcept { return position_; }

private:
    void advance();

    ConfigGrid grid_;
    std::uint64_t total_;
    std::uint64_t position_;
    std::vector<std::size_t> digits_; ///< big, little, u0 .. u(C-1)
};

/// Sum over cores of util * cluster frequency, in GHz.
double performance_proxy(const Configuration& config);

/// Steady-state temperature predictor with the DC gain computed once.
class SteadyStatePredictor {
public:
    /// Throws DataError for models not flagged stable.
    explicit SteadyStatePredictor(const sysid::StateSpaceModel& model);

    /// g * v + output_offset, v being the model's normalized features of `config`.
    double predict(const Configuration& config) const;

    /// Same, using caller-provided scratch of length inputs().
    double predict(const Configuration& config, std::span<double> scratch) const;

    std::size_t inputs() const noexcept { return spec_.size(); }
    const Eigen::RowVectorXd& gain() const noexcept { return gain_; }

private:
    features::RegressorSpec spec_;
    Eigen::RowVectorXd gain_;
    double offset_;
};

double predict_steady(const sysid::StateSpaceModel& model, const Configuration& config);

struct ExplorationResult {
    Configuration config;
    double predicted_c = 0.0;
    double perf_proxy_ghz = 0.0;
    bool feasible = false;
    double margin_c = 0.0; ///< threshold - predicted
};

/// Feasible when predicted <= threshold (inclusive).
ExplorationResult evaluate(const SteadyStatePredictor& predictor, const Configuration& config,
                           double threshold);

ExplorationResult validate_config(const sysid::StateSpaceModel& model,
                                  const Configuration& config, double threshold = 90.0);

/// Incremental two-objective front over feasible results: maximize the
/// performance proxy, minimize predicted temperature. Results equal on both
/// axes keep the lexicographically smallest configuration.
class ParetoFront {
public:
    void add(const ExplorationResult& r);
    /// Front members by ascending performance proxy.
    std::vector<ExplorationResult> members() const;
    std::size_t size() const noexcept { return front_.size(); }

private:
    std::map<double, ExplorationResult> front_; ///< keyed by perf_proxy_ghz
};

std::vector<ExplorationResult> pareto_front(const std::vector<ExplorationResult>& results);

struct ExploreOptions {
    double threshold = 90.0;
    unsigned threads = 1;          ///< workers per batch; output is identical for any value
    std::uint64_t batch = 1 << 16; ///< configurations formatted per worker hand-off
};

struct ExploreSummary {
    std::uint64_t total = 0;
    std::uint64_t feasible = 0;
    std::uint64_t infeasible = 0;
    double wall_s = 0.0;
    double mean_prediction_s = 0.0; ///< wall time of the prediction work divided by total
    std::vector<ExplorationResult> pareto;
};

/// CSV header written by explore().
extern const char* const kExploreCsvHeader;

/// One CSV row (with trailing newline) for `r`, appended to `out`.
void append_csv_row(std::string& out, const ExplorationResult& r);

/// Evaluates every configuration of `grid`, streaming CSV rows to `csv` in
/// enumeration order. Nothing but the Pareto front is kept in memory.
/// Throws DataError if the stream fails (for example, disk full).
ExploreSummary explore(const sysid::StateSpaceModel& model, const ConfigGrid& grid,
                       const ExploreOptions& options, std::ostream& csv);

struct TransientPeak {
    double peak_c = 0.0;
    double time_s = 0.0;
};

/// Free-run prediction over the schedule sampled at the model's rate,
/// starting settled on the first segment's configuration. Returns the peak.
TransientPeak transient_check(const sysid::StateSpaceModel& model, const plant::Schedule& schedule);

} // namespace thermid::explorer
