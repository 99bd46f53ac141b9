#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "thermid/configuration.hpp"
#include "thermid/trace.hpp"

namespace thermid::features {

/// Which input a regressor term reads: one core (utilization times that
/// core's cluster frequency) or one cluster (frequency only).
struct Scope {
    enum class Kind { core, cluster };
    Kind kind = Kind::core;
    int index = 0; ///< core 0..7, or cluster (0 = little, 1 = big)

    static Scope core(int i) { return {Kind::core, i}; }
    static Scope cluster(Cluster c) { return {Kind::cluster, c == Cluster::big ? 1 : 0}; }

    Cluster frequency_source() const noexcept {
        return kind == Kind::cluster ? (index == 1 ? Cluster::big : Cluster::little)
                                     : cluster_of(index);
    }

    /// "core3", "big", "little".
    std::string name() const;
    static Scope parse(const std::string& s);

    bool operator==(const Scope&) const = default;
};

/// One polynomial term f_GHz^p * u^q.
struct RegressorTerm {
    Scope scope;
    double p = 0.0; ///< frequency exponent, a multiple of 0.5 in [0, 3]
    int q = 0;      ///< utilization exponent, 0 or 1

    /// Throws DataError if the term breaks the scope/exponent rules.
    void validate() const;

    bool operator==(const RegressorTerm&) const = default;
};

/// Per-term z-score parameters; zero-variance columns keep scale 1 and are flagged.
struct Normalization {
    double mean = 0.0;
    double scale = 1.0;
    bool flagged = false;
};

/// Ordered regressor list, optionally with the normalization fitted on training data.
struct RegressorSpec {
    std::vector<RegressorTerm> terms;
    std::optional<std::vector<Normalization>> normalization;

    std::size_t size() const noexcept { return terms.size(); }

    /// Term rules, no duplicates, normalization length and positive scales.
    void validate() const;
};

/// The 34-term set: per core {f^1.5 u, f^2 u, f^3 u, u}, then f^2 for the
/// little and big cluster.
RegressorSpec eq7_regressors();

/// The 58-term search family: per-core u*f^p for p in {1,1.5,2,2.5,3},
/// per-cluster f^p for p in {1.5,2,2.5,3}, and the ten raw inputs.
RegressorSpec candidate_regressors();

/// The ten raw inputs as terms: f_little, f_big, then u0..u7.
std::vector<RegressorTerm> raw_regressors();

/// Evaluates every term for one input sample into `out` (length spec.size()).
void apply(const RegressorSpec& spec, double f_big_mhz, double f_little_mhz,
           std::span<const double, kCoreCount> util, std::span<double> out);

Eigen::VectorXd apply(const RegressorSpec& spec, const Configuration& config);

/// Row k is apply() on trace row k. Errors name the offending row.
Eigen::MatrixXd apply_trace(const RegressorSpec& spec, const Trace& trace);

/// Per-column mean and population standard deviation of `raw` (the unnormalized
/// feature matrix). Returns a copy of spec carrying the normalization.
RegressorSpec fit_normalization(const RegressorSpec& spec, const Eigen::MatrixXd& raw);

/// Applies the spec's normalization in place to an unnormalized feature matrix.
void normalize(const RegressorSpec& spec, Eigen::MatrixXd& raw);

} // namespace thermid::features
