#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "thermid/configuration.hpp"

namespace thermid {

/// Uniformly sampled multivariate time series: ten inputs and the measured
/// maximum die temperature. Stored column-wise.
struct Trace {
    double sample_rate = 0.0;
    std::vector<double> t;
    std::vector<double> f_big;
    std::vector<double> f_little;
    std::array<std::vector<double>, kCoreCount> util;
    std::vector<double> temp;

    std::size_t size() const noexcept { return t.size(); }
    bool empty() const noexcept { return t.empty(); }

    void reserve(std::size_t n);
    void push_back(double time, const Configuration& c, double temperature);

    /// Inputs of row k as a Configuration.
    Configuration configuration(std::size_t k) const;

    /// Rows [begin, end). Timestamps are kept as-is.
    Trace slice(std::size_t begin, std::size_t end) const;

    /// Throws DataError if columns disagree in length or the rate is not positive.
    void validate() const;
};

/// Development portion of a split trace. Model selection only accepts this
/// type, so the held-out test rows cannot reach it by accident.
struct DevTrace {
    Trace data;
};

/// Held-out portion of a split trace.
struct TestTrace {
    Trace data;
};

} // namespace thermid
