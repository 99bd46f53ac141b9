#include "thermid/trace.hpp"

#include <algorithm>
#include <string>

#include "thermid/error.hpp"

namespace thermid {

bool on_grid(const Configuration& c) noexcept {
    auto in = [](const auto& arr, double v) {
        return std::find(arr.begin(), arr.end(), v) != arr.end();
    };
    if (!in(levels::big_mhz, c.f_big_mhz) || !in(levels::little_mhz, c.f_little_mhz)) return false;
    return std::all_of(c.util.begin(), c.util.end(), [&](double u) { return in(levels::util, u); });
}

void Trace::reserve(std::size_t n) {
    t.reserve(n);
    f_big.reserve(n);
    f_little.reserve(n);
    for (auto& u : util) u.reserve(n);
    temp.reserve(n);
}

void Trace::push_back(double time, const Configuration& c, double temperature) {
    t.push_back(time);
    f_big.push_back(c.f_big_mhz);
    f_little.push_back(c.f_little_mhz);
    for (int i = 0; i < kCoreCount; ++i) util[i].push_back(c.util[i]);
    temp.push_back(temperature);
}

Configuration Trace::configuration(std::size_t k) const {
    Configuration c;
    c.f_big_mhz = f_big[k];
    c.f_little_mhz = f_little[k];
    for (int i = 0; i < kCoreCount; ++i) c.util[i] = util[i][k];
    return c;
}

Trace Trace::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > size())
        throw DataError("trace slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                        ") out of range for " + std::to_string(size()) + " rows");
    auto cut = [&](const std::vector<double>& v) {
        return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                                   v.begin() + static_cast<std::ptrdiff_t>(end));
    };
    Trace out;
    out.sample_rate = sample_rate;
    out.t = cut(t);
    out.f_big = cut(f_big);
    out.f_little = cut(f_little);
    for (int i = 0; i < kCoreCount; ++i) out.util[i] = cut(util[i]);
    out.temp = cut(temp);
    return out;
}

void Trace::validate() const {
    if (!(sample_rate > 0.0)) throw DataError("trace sample rate must be positive");
    const std::size_t n = t.size();
    bool ok = f_big.size() == n && f_little.size() == n && temp.size() == n;
    for (const auto& u : util) ok = ok && u.size() == n;
    if (!ok) throw DataError("trace columns have unequal lengths");
}

} // namespace thermid
