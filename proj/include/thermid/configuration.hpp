#pragma once

#include <array>
#include <compare>
#include <cstddef>

namespace thermid {

inline constexpr int kCoreCount = 8;
inline constexpr int kLittleCores = 4;

enum class Cluster { little, big };

/// Cores 0-3 belong to the little cluster, 4-7 to the big one.
constexpr Cluster cluster_of(int core) noexcept {
    return core < kLittleCores ? Cluster::little : Cluster::big;
}

/// One settable platform state: per-cluster frequency and per-core utilization.
struct Configuration {
    double f_big_mhz = 1000.0;
    double f_little_mhz = 1000.0;
    std::array<double, kCoreCount> util{};

    double frequency_mhz(Cluster c) const noexcept {
        return c == Cluster::big ? f_big_mhz : f_little_mhz;
    }
    double core_frequency_mhz(int core) const noexcept { return frequency_mhz(cluster_of(core)); }

    /// Lexicographic on (f_big, f_little, u0..u7), the enumeration order.
    auto operator<=>(const Configuration&) const = default;
    bool operator==(const Configuration&) const = default;
};

/// Frequency and utilization levels of the platform's legal grid.
namespace levels {
inline constexpr std::array<double, 10> big_mhz{1000, 1100, 1200, 1300, 1400,
                                                1500, 1600, 1700, 1800, 1900};
inline constexpr std::array<double, 6> little_mhz{1000, 1100, 1200, 1300, 1400, 1500};
inline constexpr std::array<double, 5> util{0.0, 0.25, 0.5, 0.75, 1.0};
} // namespace levels

/// True when every field sits exactly on the legal grid.
bool on_grid(const Configuration& c) noexcept;

} // namespace thermid
