#include "thermid/explorer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "thermid/error.hpp"
#include "thermid/features.hpp"

namespace thermid::explorer {

namespace {

std::vector<double> parse_levels(const std::string& key, const std::string& list) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const std::size_t comma = std::min(list.find(',', start), list.size());
        const std::string item = list.substr(start, comma - start);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
            throw UsageError("grid: bad value '" + item + "' for " + key);
        out.push_back(v);
        start = comma + 1;
    }
    return out;
}

void check_levels(const char* name, const std::vector<double>& v, double lo, double hi) {
    if (v.empty()) throw DataError(std::string("grid: no ") + name + " levels");
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (!(v[k] >= lo && v[k] <= hi))
            throw DataError(std::string("grid: ") + name + " level out of range");
        if (k > 0 && !(v[k] > v[k - 1]))
            throw DataError(std::string("grid: ") + name + " levels must be strictly ascending");
    }
}

std::string join(const std::vector<double>& v) {
    std::string s;
    char buf[32];
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) s += ',';
        const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v[k]);
        (void)ec;
        s.append(buf, end);
    }
    return s;
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
        throw DataError("grid: configuration count overflows 64 bits");
    return a * b;
}

void put_shortest(std::string& out, double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    out.append(buf, end);
}

void put_fixed(std::string& out, double v, int digits) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
    (void)ec;
    out.append(buf, end);
}

} // namespace

ConfigGrid ConfigGrid::defaults() {
    ConfigGrid g;
    g.util_levels.assign(levels::util.begin(), levels::util.end());
    g.core_count = kCoreCount;
    g.big_mhz.assign(levels::big_mhz.begin(), levels::big_mhz.end());
    g.little_mhz.assign(levels::little_mhz.begin(), levels::little_mhz.end());
    return g;
}

void ConfigGrid::validate() const {
    if (core_count < 1 || core_count > kCoreCount)
        throw DataError("grid: core count must be between 1 and 8");
    check_levels("utilization", util_levels, 0.0, 1.0);
    check_levels("big frequency", big_mhz, std::numeric_limits<double>::min(),
                 std::numeric_limits<double>::max());
    check_levels("little frequency", little_mhz, std::numeric_limits<double>::min(),
                 std::numeric_limits<double>::max());
}

std::string ConfigGrid::describe() const {
    return "util=" + join(util_levels) + ";cores=" + std::to_string(core_count) +
           ";big=" + join(big_mhz) + ";little=" + join(little_mhz);
}

ConfigGrid ConfigGrid::parse(const std::string& text) {
    ConfigGrid g = defaults();
    if (text.empty() || text == "default") return g;
    std::size_t start = 0;
    while (start < text.size()) {
        const std::size_t semi = std::min(text.find(';', start), text.size());
        const std::string part = text.substr(start, semi - start);
        start = semi + 1;
        if (part.empty()) continue;
        const std::size_t eq = part.find('=');
        if (eq == std::string::npos) throw UsageError("grid: expected key=value, got '" + part + "'");
        const std::string key = part.substr(0, eq);
        const std::string val = part.substr(eq + 1);
        if (key == "util") {
            g.util_levels = parse_levels(key, val);
        } else if (key == "big") {
            g.big_mhz = parse_levels(key, val);
        } else if (key == "little") {
            g.little_mhz = parse_levels(key, val);
        } else if (key == "cores") {
            const auto v = parse_levels(key, val);
            if (v.size() != 1 || v[0] != std::floor(v[0]))
                throw UsageError("grid: cores takes one integer");
            g.core_count = static_cast<int>(v[0]);
        } else {
            throw UsageError("grid: unknown key '" + key + "'");
        }
    }
    g.validate();
    return g;
}

std::uint64_t config_count(const ConfigGrid& grid) {
    grid.validate();
    std::uint64_t n = checked_mul(grid.big_mhz.size(), grid.little_mhz.size());
    for (int c = 0; c < grid.core_count; ++c) n = checked_mul(n, grid.util_levels.size());
    return n;
}

Configuration configuration_at(const ConfigGrid& grid, std::uint64_t index) {
    if (index >= config_count(grid)) throw DataError("configuration index out of range");
    const std::uint64_t U = grid.util_levels.size();
    Configuration c;
    for (int i = kCoreCount - 1; i >= 0; --i) {
        if (i >= grid.core_count) {
            c.util[i] = grid.util_levels.front();
            continue;
        }
        c.util[i] = grid.util_levels[index % U];
        index /= U;
    }
    c.f_little_mhz = grid.little_mhz[index % grid.little_mhz.size()];
    index /= grid.little_mhz.size();
    c.f_big_mhz = grid.big_mhz[index];
    return c;
}

Enumerator::Enumerator(const ConfigGrid& grid, std::uint64_t start)
    : grid_(grid), total_(config_count(grid)), position_(start),
      digits_(2 + static_cast<std::size_t>(grid.core_count), 0) {
    if (start > total_) throw DataError("enumeration offset beyond the grid");
    if (start == total_) return;
    std::uint64_t rest = start;
    const std::uint64_t U = grid.util_levels.size();
    for (std::size_t d = digits_.size(); d-- > 2;) {
        digits_[d] = rest % U;
        rest /= U;
    }
    digits_[1] = rest % grid.little_mhz.size();
    digits_[0] = rest / grid.little_mhz.size();
}

bool Enumerator::next(Configuration& out) {
    if (position_ >= total_) return false;
    out.f_big_mhz = grid_.big_mhz[digits_[0]];
    out.f_little_mhz = grid_.little_mhz[digits_[1]];
    for (int i = 0; i < kCoreCount; ++i)
        out.util[i] = i < grid_.core_count ? grid_.util_levels[digits_[2 + i]]
                                           : grid_.util_levels.front();
    advance();
    return true;
}

void Enumerator::advance() {
    ++position_;
    for (std::size_t d = digits_.size(); d-- > 0;) {
        const std::size_t radix = d == 0   ? grid_.big_mhz.size()
                                  : d == 1 ? grid_.little_mhz.size()
                                           : grid_.util_levels.size();
        if (++digits_[d] < radix) return;
        digits_[d] = 0;
    }
}

double performance_proxy(const Configuration& config) {
    double s = 0.0;
    for (int i = 0; i < kCoreCount; ++i) s += config.util[i] * config.core_frequency_mhz(i);
    return s / 1000.0;
}

SteadyStatePredictor::SteadyStatePredictor(const sysid::StateSpaceModel& model)
    : spec_(model.spec), offset_(model.output_offset) {
    if (!model.stable) throw DataError("model is not stable; steady state is undefined");
    gain_ = sysid::steady_state_gain(model);
}

double SteadyStatePredictor::predict(const Configuration& config, std::span<double> scratch) const {
    features::apply(spec_, config.f_big_mhz, config.f_little_mhz, config.util, scratch);
    double s = offset_;
    for (std::size_t k = 0; k < scratch.size(); ++k)
        s += gain_(static_cast<Eigen::Index>(k)) * scratch[k];
    return s;
}

double SteadyStatePredictor::predict(const Configuration& config) const {
    std::vector<double> scratch(spec_.size());
    return predict(config, scratch);
}

double predict_steady(const sysid::StateSpaceModel& model, const Configuration& config) {
    return SteadyStatePredictor(model).predict(config);
}

ExplorationResult evaluate(const SteadyStatePredictor& predictor, const Configuration& config,
                           double threshold) {
    if (!std::isfinite(threshold)) throw DataError("threshold must be finite");
    ExplorationResult r;
    r.config = config;
    r.predicted_c = predictor.predict(config);
    r.perf_proxy_ghz = performance_proxy(config);
    r.feasible = r.predicted_c <= threshold;
    r.margin_c = threshold - r.predicted_c;
    return r;
}

ExplorationResult validate_config(const sysid::StateSpaceModel& model,
                                  const Configuration& config, double threshold) {
    return evaluate(SteadyStatePredictor(model), config, threshold);
}

void ParetoFront::add(const ExplorationResult& r) {
    if (!r.feasible) return;
    // Members have strictly increasing temperature along increasing perf.
    auto it = front_.lower_bound(r.perf_proxy_ghz);
    if (it != front_.end() && it->second.predicted_c <= r.predicted_c) {
        const bool tie =
            it->first == r.perf_proxy_ghz && it->second.predicted_c == r.predicted_c;
        if (tie && r.config < it->second.config) it->second = r;
        return;
    }
    if (it != front_.end() && it->first == r.perf_proxy_ghz) it = front_.erase(it);
    while (it != front_.begin()) {
        auto prev = std::prev(it);
        if (prev->second.predicted_c < r.predicted_c) break;
        front_.erase(prev);
    }
    front_.emplace_hint(it, r.perf_proxy_ghz, r);
}

std::vector<ExplorationResult> ParetoFront::members() const {
    std::vector<ExplorationResult> out;
    out.reserve(front_.size());
    for (const auto& [perf, r] : front_) out.push_back(r);
    return out;
}

std::vector<ExplorationResult> pareto_front(const std::vector<ExplorationResult>& results) {
    ParetoFront f;
    for (const auto& r : results) f.add(r);
    return f.members();
}

const char* const kExploreCsvHeader =
    "f_big_mhz,f_little_mhz,u0,u1,u2,u3,u4,u5,u6,u7,predicted_c,perf_proxy_ghz,feasible,margin_c\n";

void append_csv_row(std::string& out, const ExplorationResult& r) {
    put_shortest(out, r.config.f_big_mhz);
    out += ',';
    put_shortest(out, r.config.f_little_mhz);
    for (double u : r.config.util) {
        out += ',';
        put_shortest(out, u);
    }
    out += ',';
    put_fixed(out, r.predicted_c, 6);
    out += ',';
    put_shortest(out, r.perf_proxy_ghz);
    out += r.feasible ? ",1," : ",0,";
    put_fixed(out, r.margin_c, 6);
    out += '\n';
}

ExploreSummary explore(const sysid::StateSpaceModel& model, const ConfigGrid& grid,
                       const ExploreOptions& options, std::ostream& csv) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    if (!std::isfinite(options.threshold)) throw DataError("threshold must be finite");
    const SteadyStatePredictor predictor(model);
    const std::uint64_t total = config_count(grid);
    const unsigned workers = std::max(1u, options.threads);
    const std::uint64_t batch = std::max<std::uint64_t>(1, options.batch);

    struct Shard {
        std::string text;
        ParetoFront front;
        std::uint64_t feasible = 0;
        double predict_s = 0.0;
    };
    // Each worker formats one batch; batches are written in index order.
    auto run_shard = [&](std::uint64_t begin, std::uint64_t end, Shard& shard) {
        shard.text.clear();
        shard.feasible = 0;
        shard.predict_s = 0.0;
        Enumerator en(grid, begin);
        std::vector<double> scratch(predictor.inputs());
        ExplorationResult r;
        for (std::uint64_t k = begin; k < end && en.next(r.config); ++k) {
            const auto p0 = clock::now();
            r.predicted_c = predictor.predict(r.config, scratch);
            shard.predict_s += std::chrono::duration<double>(clock::now() - p0).count();
            r.perf_proxy_ghz = performance_proxy(r.config);
            r.feasible = r.predicted_c <= options.threshold;
            r.margin_c = options.threshold - r.predicted_c;
            if (r.feasible) {
                ++shard.feasible;
                shard.front.add(r);
            }
            append_csv_row(shard.text, r);
        }
    };

    ExploreSummary summary;
    summary.total = total;
    ParetoFront front;
    double predict_s = 0.0;
    csv << kExploreCsvHeader;
    std::vector<Shard> shards(workers);
    for (std::uint64_t start = 0; start < total; start += batch * workers) {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            const std::uint64_t b = std::min(total, start + w * batch);
            const std::uint64_t e = std::min(total, b + batch);
            shards[w].front = ParetoFront{};
            if (w == 0 || workers == 1) continue;
            pool.emplace_back(run_shard, b, e, std::ref(shards[w]));
        }
        run_shard(start, std::min(total, start + batch), shards[0]);
        for (auto& t : pool) t.join();
        for (auto& s : shards) {
            csv.write(s.text.data(), static_cast<std::streamsize>(s.text.size()));
            summary.feasible += s.feasible;
            predict_s += s.predict_s;
            for (const auto& m : s.front.members()) front.add(m);
            s.text.clear();
            s.feasible = 0;
            s.predict_s = 0.0;
        }
        if (!csv) throw DataError("failed writing exploration output (disk full?)");
    }
    csv.flush();
    if (!csv) throw DataError("failed writing exploration output (disk full?)");

    summary.infeasible = total - summary.feasible;
    summary.pareto = front.members();
    summary.wall_s = std::chrono::duration<double>(clock::now() - t0).count();
    summary.mean_prediction_s = total ? predict_s / static_cast<double>(total) : 0.0;
    return summary;
}

TransientPeak transient_check(const sysid::StateSpaceModel& model, const plant::Schedule& schedule) {
    if (schedule.empty()) throw DataError("transient_check: empty schedule");
    if (!model.stable) throw DataError("transient_check: model is not stable");
    if (!(model.sample_rate > 0.0)) throw DataError("transient_check: model has no sample rate");
    const double duration = plant::schedule_duration(schedule);
    const auto steps = static_cast<Eigen::Index>(std::ceil(duration * model.sample_rate - 1e-9));
    if (steps < 1) throw DataError("transient_check: schedule shorter than one sample");

    Eigen::MatrixXd v(steps, static_cast<Eigen::Index>(model.spec.size()));
    std::size_t seg = 0;
    double seg_end = schedule[0].duration_s;
    for (Eigen::Index k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) / model.sample_rate;
        while (t >= seg_end && seg + 1 < schedule.size()) seg_end += schedule[++seg].duration_s;
        v.row(k) = features::apply(model.spec, schedule[seg].config).transpose();
    }
    const Eigen::VectorXd x0 = sysid::steady_state_state(model, v.row(0).transpose());
    const Eigen::VectorXd y = sysid::simulate(model, v, x0);
    Eigen::Index arg = 0;
    const double peak = y.maxCoeff(&arg);
    return {peak, static_cast<double>(arg) / model.sample_rate};
}

} // namespace thermid::explorer
