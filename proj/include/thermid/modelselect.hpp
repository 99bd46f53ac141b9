#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "thermid/features.hpp"
#include "thermid/sysid.hpp"
#include "thermid/trace.hpp"

namespace thermid::modelselect {

/// Time-window mean decimation. Output sample k averages every input sample
/// whose timestamp index n satisfies floor(n * target / rate) == k, which for
/// integer ratios is plain block averaging. A partial trailing window is kept.
Trace resample(const Trace& trace, double target_hz);

struct DevTestSplit {
    DevTrace dev;
    TestTrace test;
    std::size_t gap = 0; ///< samples discarded between the two
};

/// dev = [0, floor(0.79 N)), gap = floor(0.01 N) samples, test = the rest.
DevTestSplit split_dev_test(const Trace& trace);

enum class Orientation { normal, reversed };

/// Index ranges are end-exclusive and refer to the development trace.
struct FoldSpec {
    std::size_t train_start = 0;
    std::size_t train_end = 0;
    std::size_t val_start = 0;
    std::size_t val_end = 0;
    Orientation orientation = Orientation::normal;

    std::size_t train_size() const noexcept { return train_end - train_start; }
    std::size_t val_size() const noexcept { return val_end - val_start; }
    std::size_t block_start() const noexcept { return std::min(train_start, val_start); }
};

enum class Scheme { one_hour, six_hour };

/// "1h" or "6h"; anything else is a UsageError.
Scheme parse_scheme(const std::string& s);
std::string scheme_name(Scheme s);

/// Ten one-hour blocks, stride floor((dev_len - L) / 9), 80/20 train/validation.
std::vector<FoldSpec> blocked_folds_1h(std::size_t dev_len, double sample_rate);

/// Six-hour blocks at offsets 0 and dev_len - L, each in normal and reversed order.
std::vector<FoldSpec> blocked_folds_6h(std::size_t dev_len, double sample_rate);

std::vector<FoldSpec> folds_for(Scheme scheme, std::size_t dev_len, double sample_rate);

/// Identification and scoring settings shared by every search.
struct EvalOptions {
    sysid::N4sidOptions n4sid;
    /// Seconds of input history run through the model before a scored range.
    /// The state starts at the steady state of the first warm-up input; only
    /// inputs are read, never measured outputs. 0 starts at that steady state
    /// exactly at the range boundary.
    double warmup_s = 600.0;
};

/// Features of `trace` under `spec` (which must carry a normalization).
Eigen::MatrixXd feature_matrix(const features::RegressorSpec& spec, const Trace& trace);

/// Free-run prediction for rows [begin, end) of `v`, warmed up over the
/// preceding inputs as configured.
Eigen::VectorXd free_run(const sysid::StateSpaceModel& model, const Eigen::MatrixXd& v,
                         std::size_t begin, std::size_t end, double warmup_s);

/// Normalization fitted on the training rows, identification, and the
/// trained model. Identification errors pass through unchanged.
sysid::Identification train_on(const Trace& trace, std::size_t begin, std::size_t end,
                               const features::RegressorSpec& spec, int order,
                               const EvalOptions& options);

struct FoldResult {
    std::size_t fold = 0;
    double mse = 0.0;
    bool stable = false;
    std::vector<std::string> warnings;
};

struct CrossValidation {
    std::vector<FoldResult> folds;
    double average = 0.0;
};

/// Per fold: normalization from the training rows only, identification,
/// free-run over the validation rows, MSE. Errors are rethrown as the same
/// type with "fold k: " prepended.
CrossValidation cross_validate(const DevTrace& dev, const std::vector<FoldSpec>& folds,
                               const features::RegressorSpec& spec, int order,
                               const EvalOptions& options = {});

struct OrderPoint {
    int order = 0;
    double average_mse = 0.0;
};

struct OrderSearch {
    int best_order = 0;
    std::vector<OrderPoint> curve;
};

/// Cross-validates each order; the best is the smallest order attaining the
/// minimum average MSE.
OrderSearch grid_search_order(const DevTrace& dev, const std::vector<FoldSpec>& folds,
                              const features::RegressorSpec& spec, const std::vector<int>& orders,
                              const EvalOptions& options = {});

/// Parses "a..b" (inclusive), "a,b,c" or a single integer.
std::vector<int> parse_orders(const std::string& s);

/// One exponent pair of the search family. q = 1 expands to the eight
/// per-core terms u * f^p, q = 0 to the two cluster terms f^p.
struct Combo {
    double p = 1.0;
    int q = 1;

    std::string name() const; ///< e.g. "f^2.5*u" or "f^1.5"
    bool operator==(const Combo&) const = default;
};

/// Pairs drawable by the random search, in a fixed order: q = 1 for
/// p in {1, 1.5, 2, 2.5, 3}, then q = 0 for p in {1.5, 2, 2.5, 3}. (1, 0) is
/// left out because the raw regressors already contain f^1 per cluster.
std::vector<Combo> combo_pool();

/// The terms for `combos` followed by the ten raw regressors (no normalization).
features::RegressorSpec spec_from_combos(const std::vector<Combo>& combos);

struct SearchRecord {
    std::size_t iteration = 0;
    std::vector<Combo> combos;
    double mse = 0.0;
    bool failed = false;
    std::string error;
};

struct RegressorSearchOptions {
    std::size_t iterations = 500;
    std::size_t combos_per_iteration = 3;
    int order = 5;
    std::uint64_t seed = 1;
};

/// Each iteration draws distinct combos uniformly from combo_pool(), trains
/// on the fold's training rows and scores its validation rows. Failures are
/// recorded, not thrown.
std::vector<SearchRecord> randomized_regressor_search(const DevTrace& dev, const FoldSpec& fold,
                                                      const RegressorSearchOptions& search,
                                                      const EvalOptions& options = {});

struct ComboCorrelation {
    Combo combo;
    double correlation = 0.0; ///< NaN when the inclusion indicator is constant
    bool retained = false;
};

struct PruneResult {
    std::vector<ComboCorrelation> correlations; ///< one per pool entry
    std::vector<Combo> retained;
    features::RegressorSpec spec; ///< retained combos plus raw regressors
    std::vector<std::string> warnings;
};

/// Pearson correlation between each combo's inclusion indicator and the
/// iteration MSE over successful records. A combo is kept when the
/// correlation is negative or zero, or undefined (with a warning). Needs at
/// least 30 successful records.
PruneResult correlation_prune(const std::vector<SearchRecord>& records);

struct SubsetResult {
    std::vector<Combo> combos;
    double average_mse = 0.0;
};

struct SubsetSearch {
    std::vector<SubsetResult> subsets; ///< in bitmask order, empty subset first
    std::size_t best = 0;
};

/// Cross-validates every subset of `combos` (each with the raw regressors).
/// More than 12 combos is a UsageError. Ties go to the earlier subset.
SubsetSearch subset_search(const DevTrace& dev, const std::vector<FoldSpec>& folds,
                           const std::vector<Combo>& combos, int order,
                           const EvalOptions& options = {});

} // namespace thermid::modelselect
