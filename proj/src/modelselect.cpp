#include "thermid/modelselect.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include "thermid/error.hpp"
#include "thermid/rng.hpp"

namespace thermid::modelselect {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kComboExponents[] = {1.0, 1.5, 2.0, 2.5, 3.0};

std::size_t block_length(double hours, double sample_rate) {
    const double exact = hours * 3600.0 * sample_rate;
    const auto n = static_cast<std::size_t>(std::llround(exact));
    if (n == 0 || std::abs(exact - static_cast<double>(n)) > 1e-6)
        throw DataError("block length must be a whole number of samples");
    return n;
}

VectorXd column(const std::vector<double>& v) {
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

features::RegressorSpec without_normalization(features::RegressorSpec spec) {
    spec.normalization.reset();
    return spec;
}

std::size_t warmup_samples(double warmup_s, double rate) {
    if (!(warmup_s >= 0.0)) throw DataError("warm-up must be non-negative");
    return static_cast<std::size_t>(std::llround(warmup_s * rate));
}

// Train on [begin, end) of the unnormalized features; the returned model
// carries the fitted normalization.
sysid::Identification identify_rows(const MatrixXd& raw, const VectorXd& y, double rate,
                                    std::size_t begin, std::size_t end,
                                    const features::RegressorSpec& spec, int order,
                                    const EvalOptions& options) {
    const auto b = static_cast<Index>(begin);
    const auto n = static_cast<Index>(end - begin);
    MatrixXd v = raw.middleRows(b, n);
    features::RegressorSpec fitted = features::fit_normalization(spec, v);
    features::normalize(fitted, v);
    sysid::N4sidOptions n4 = options.n4sid;
    n4.sample_rate = rate;
    sysid::Identification id = sysid::n4sid_identify(v, y.segment(b, n), order, n4);
    id.model.spec = std::move(fitted);
    return id;
}

// Free-run MSE on rows [begin, end) of the unnormalized features.
double score_rows(const sysid::StateSpaceModel& model, const MatrixXd& raw, const VectorXd& y,
                  std::size_t begin, std::size_t end, double warmup_s) {
    const std::size_t ws = begin - std::min(begin, warmup_samples(warmup_s, model.sample_rate));
    MatrixXd v = raw.middleRows(static_cast<Index>(ws), static_cast<Index>(end - ws));
    features::normalize(model.spec, v);
    const VectorXd pred = free_run(model, v, begin - ws, end - ws, warmup_s);
    return sysid::mse(pred, y.segment(static_cast<Index>(begin), static_cast<Index>(end - begin)));
}

template <class F>
auto with_context(const std::string& context, F&& f) {
    try {
        return f();
    } catch (const IdentificationError& e) {
        throw e.with_context(context);
    } catch (const DataError& e) {
        throw DataError(context + e.what());
    } catch (const UsageError& e) {
        throw UsageError(context + e.what());
    }
}

void check_folds(const std::vector<FoldSpec>& folds, std::size_t n) {
    if (folds.empty()) throw UsageError("no folds given");
    for (std::size_t k = 0; k < folds.size(); ++k) {
        const auto& f = folds[k];
        if (f.train_start >= f.train_end || f.val_start >= f.val_end ||
            std::max(f.train_end, f.val_end) > n)
            throw DataError("fold " + std::to_string(k + 1) + " does not fit the development trace");
    }
}

CrossValidation cross_validate_raw(const MatrixXd& raw, const VectorXd& y, double rate,
                                   const std::vector<FoldSpec>& folds,
                                   const features::RegressorSpec& spec, int order,
                                   const EvalOptions& options) {
    check_folds(folds, static_cast<std::size_t>(y.size()));
    CrossValidation cv;
    for (std::size_t k = 0; k < folds.size(); ++k) {
        const FoldSpec& f = folds[k];
        FoldResult r = with_context("fold " + std::to_string(k + 1) + ": ", [&] {
            FoldResult out;
            out.fold = k;
            auto id = identify_rows(raw, y, rate, f.train_start, f.train_end, spec, order, options);
            out.stable = id.model.stable;
            out.warnings = std::move(id.warnings);
            out.mse = score_rows(id.model, raw, y, f.val_start, f.val_end, options.warmup_s);
            return out;
        });
        cv.folds.push_back(std::move(r));
    }
    double sum = 0.0;
    for (const auto& r : cv.folds) sum += r.mse;
    cv.average = sum / static_cast<double>(cv.folds.size());
    return cv;
}

// Candidate-family column for each term of `spec`.
std::vector<Index> candidate_columns(const features::RegressorSpec& spec) {
    static const features::RegressorSpec family = features::candidate_regressors();
    std::vector<Index> cols;
    for (const auto& t : spec.terms) {
        const auto it = std::find(family.terms.begin(), family.terms.end(), t);
        if (it == family.terms.end()) throw UsageError("term outside the candidate family");
        cols.push_back(static_cast<Index>(it - family.terms.begin()));
    }
    return cols;
}

int parse_int(const std::string& s) {
    int v = 0;
    const char* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) throw UsageError("not an integer: '" + s + "'");
    return v;
}

} // namespace

Trace resample(const Trace& trace, double target_hz) {
    trace.validate();
    if (trace.empty()) throw DataError("resample: empty trace");
    if (!(target_hz > 0.0)) throw DataError("resample: target rate must be positive");
    if (target_hz > trace.sample_rate)
        throw DataError("resample: target rate exceeds the source rate");
    if (target_hz == trace.sample_rate) return trace;

    const std::size_t n = trace.size();
    const double ratio = target_hz / trace.sample_rate;
    Trace out;
    out.sample_rate = target_hz;
    out.reserve(static_cast<std::size_t>(static_cast<double>(n) * ratio) + 2);

    std::size_t begin = 0;
    while (begin < n) {
        const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(begin) * ratio));
        std::size_t end = begin + 1;
        while (end < n && static_cast<std::size_t>(std::floor(static_cast<double>(end) * ratio)) == k)
            ++end;
        const double count = static_cast<double>(end - begin);
        auto mean = [&](const std::vector<double>& c) {
            double s = 0.0;
            for (std::size_t i = begin; i < end; ++i) s += c[i];
            return s / count;
        };
        out.t.push_back(trace.t[0] + static_cast<double>(k) / target_hz);
        out.f_big.push_back(mean(trace.f_big));
        out.f_little.push_back(mean(trace.f_little));
        for (int c = 0; c < kCoreCount; ++c) out.util[c].push_back(mean(trace.util[c]));
        out.temp.push_back(mean(trace.temp));
        begin = end;
    }
    return out;
}

DevTestSplit split_dev_test(const Trace& trace) {
    const std::size_t n = trace.size();
    if (n < 100)
        throw DataError("split needs at least 100 samples, got " + std::to_string(n));
    const std::size_t dev = n * 79 / 100;
    const std::size_t gap = n / 100;
    DevTestSplit s;
    s.dev.data = trace.slice(0, dev);
    s.test.data = trace.slice(dev + gap, n);
    s.gap = gap;
    return s;
}

Scheme parse_scheme(const std::string& s) {
    if (s == "1h") return Scheme::one_hour;
    if (s == "6h") return Scheme::six_hour;
    throw UsageError("unknown scheme '" + s + "' (expected 1h or 6h)");
}

std::string scheme_name(Scheme s) { return s == Scheme::one_hour ? "1h" : "6h"; }

std::vector<FoldSpec> blocked_folds_1h(std::size_t dev_len, double sample_rate) {
    const std::size_t L = block_length(1.0, sample_rate);
    if (dev_len < L)
        throw DataError("development trace (" + std::to_string(dev_len) +
                        " samples) is shorter than one 1-hour block (" + std::to_string(L) + ")");
    const std::size_t stride = (dev_len - L) / 9;
    const std::size_t val = L / 5;
    std::vector<FoldSpec> folds;
    for (std::size_t k = 0; k < 10; ++k) {
        const std::size_t s = k * stride;
        folds.push_back({s, s + L - val, s + L - val, s + L, Orientation::normal});
    }
    return folds;
}

std::vector<FoldSpec> blocked_folds_6h(std::size_t dev_len, double sample_rate) {
    const std::size_t L = block_length(6.0, sample_rate);
    if (dev_len < L)
        throw DataError("development trace (" + std::to_string(dev_len) +
                        " samples) is shorter than one 6-hour block (" + std::to_string(L) + ")");
    const std::size_t val = L / 5;
    std::vector<FoldSpec> folds;
    for (std::size_t s : {std::size_t{0}, dev_len - L}) {
        folds.push_back({s, s + L - val, s + L - val, s + L, Orientation::normal});
        folds.push_back({s + val, s + L, s, s + val, Orientation::reversed});
    }
    return folds;
}

std::vector<FoldSpec> folds_for(Scheme scheme, std::size_t dev_len, double sample_rate) {
    return scheme == Scheme::one_hour ? blocked_folds_1h(dev_len, sample_rate)
                                      : blocked_folds_6h(dev_len, sample_rate);
}

MatrixXd feature_matrix(const features::RegressorSpec& spec, const Trace& trace) {
    if (!spec.normalization) throw DataError("regressor spec carries no normalization");
    return features::apply_trace(spec, trace);
}

VectorXd free_run(const sysid::StateSpaceModel& model, const MatrixXd& v, std::size_t begin,
                  std::size_t end, double warmup_s) {
    if (begin >= end || end > static_cast<std::size_t>(v.rows()))
        throw DataError("free_run: empty or out-of-range interval");
    const std::size_t ws = begin - std::min(begin, warmup_samples(warmup_s, model.sample_rate));
    const auto len = static_cast<Index>(end - ws);
    const MatrixXd window = v.middleRows(static_cast<Index>(ws), len);
    const VectorXd x0 = sysid::steady_state_state(model, window.row(0).transpose());
    const VectorXd y = sysid::simulate(model, window, x0);
    return y.tail(static_cast<Index>(end - begin));
}

sysid::Identification train_on(const Trace& trace, std::size_t begin, std::size_t end,
                               const features::RegressorSpec& spec, int order,
                               const EvalOptions& options) {
    if (begin >= end || end > trace.size()) throw DataError("train_on: bad row range");
    const Trace part = trace.slice(begin, end);
    const MatrixXd raw = features::apply_trace(without_normalization(spec), part);
    return identify_rows(raw, column(part.temp), trace.sample_rate, 0, part.size(),
                         without_normalization(spec), order, options);
}

CrossValidation cross_validate(const DevTrace& dev, const std::vector<FoldSpec>& folds,
                               const features::RegressorSpec& spec, int order,
                               const EvalOptions& options) {
    const auto bare = without_normalization(spec);
    const MatrixXd raw = features::apply_trace(bare, dev.data);
    return cross_validate_raw(raw, column(dev.data.temp), dev.data.sample_rate, folds, bare, order,
                              options);
}

OrderSearch grid_search_order(const DevTrace& dev, const std::vector<FoldSpec>& folds,
                              const features::RegressorSpec& spec, const std::vector<int>& orders,
                              const EvalOptions& options) {
    if (orders.empty()) throw UsageError("order list is empty");
    const auto bare = without_normalization(spec);
    const MatrixXd raw = features::apply_trace(bare, dev.data);
    const VectorXd y = column(dev.data.temp);
    OrderSearch search;
    double best = std::numeric_limits<double>::infinity();
    for (int order : orders) {
        const CrossValidation cv = with_context("order " + std::to_string(order) + ": ", [&] {
            return cross_validate_raw(raw, y, dev.data.sample_rate, folds, bare, order, options);
        });
        search.curve.push_back({order, cv.average});
        if (cv.average < best || (cv.average == best && order < search.best_order)) {
            best = cv.average;
            search.best_order = order;
        }
    }
    if (search.best_order == 0) search.best_order = *std::min_element(orders.begin(), orders.end());
    return search;
}

std::vector<int> parse_orders(const std::string& s) {
    std::vector<int> out;
    if (const auto dots = s.find(".."); dots != std::string::npos) {
        const int a = parse_int(s.substr(0, dots));
        const int b = parse_int(s.substr(dots + 2));
        if (a < 1 || b < a) throw UsageError("bad order range '" + s + "'");
        for (int k = a; k <= b; ++k) out.push_back(k);
        return out;
    }
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t comma = std::min(s.find(',', start), s.size());
        const int k = parse_int(s.substr(start, comma - start));
        if (k < 1) throw UsageError("orders must be positive");
        out.push_back(k);
        start = comma + 1;
    }
    return out;
}

std::string Combo::name() const {
    char buf[16];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, p);
    (void)ec;
    std::string s = "f^" + std::string(buf, end);
    if (q == 1) s += "*u";
    return s;
}

std::vector<Combo> combo_pool() {
    std::vector<Combo> pool;
    for (double p : kComboExponents) pool.push_back({p, 1});
    for (double p : kComboExponents)
        if (p != 1.0) pool.push_back({p, 0});
    return pool;
}

features::RegressorSpec spec_from_combos(const std::vector<Combo>& combos) {
    features::RegressorSpec spec;
    for (const Combo& c : combos) {
        if (c.q == 1) {
            for (int i = 0; i < kCoreCount; ++i)
                spec.terms.push_back({features::Scope::core(i), c.p, 1});
        } else {
            spec.terms.push_back({features::Scope::cluster(Cluster::little), c.p, 0});
            spec.terms.push_back({features::Scope::cluster(Cluster::big), c.p, 0});
        }
    }
    for (const auto& t : features::raw_regressors()) spec.terms.push_back(t);
    spec.validate();
    return spec;
}

std::vector<SearchRecord> randomized_regressor_search(const DevTrace& dev, const FoldSpec& fold,
                                                      const RegressorSearchOptions& search,
                                                      const EvalOptions& options) {
    if (search.iterations == 0) throw UsageError("iterations must be at least 1");
    const std::vector<Combo> pool = combo_pool();
    if (search.combos_per_iteration == 0 || search.combos_per_iteration > pool.size())
        throw UsageError("combos per iteration must be between 1 and " +
                         std::to_string(pool.size()));
    check_folds({fold}, dev.data.size());

    const MatrixXd family = features::apply_trace(features::candidate_regressors(), dev.data);
    const VectorXd y = column(dev.data.temp);
    Rng rng(derive_seed(search.seed, "regressor-search"));

    std::vector<SearchRecord> records;
    records.reserve(search.iterations);
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t it = 0; it < search.iterations; ++it) {
        // Partial Fisher-Yates: the first k slots become a uniform k-subset.
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t s = 0; s < search.combos_per_iteration; ++s) {
            const std::size_t pick = s + rng.index(pool.size() - s);
            std::swap(idx[s], idx[pick]);
        }
        std::vector<std::size_t> chosen(idx.begin(),
                                        idx.begin() + static_cast<std::ptrdiff_t>(search.combos_per_iteration));
        std::sort(chosen.begin(), chosen.end());

        SearchRecord rec;
        rec.iteration = it;
        for (std::size_t c : chosen) rec.combos.push_back(pool[c]);
        try {
            const auto spec = spec_from_combos(rec.combos);
            const MatrixXd raw = family(Eigen::all, candidate_columns(spec));
            const auto id = identify_rows(raw, y, dev.data.sample_rate, fold.train_start,
                                          fold.train_end, spec, search.order, options);
            rec.mse = score_rows(id.model, raw, y, fold.val_start, fold.val_end, options.warmup_s);
            if (!std::isfinite(rec.mse)) {
                rec.failed = true;
                rec.error = "validation MSE is not finite";
            }
        } catch (const Error& e) {
            rec.failed = true;
            rec.error = e.what();
        }
        records.push_back(std::move(rec));
    }
    return records;
}

PruneResult correlation_prune(const std::vector<SearchRecord>& records) {
    std::vector<const SearchRecord*> ok;
    for (const auto& r : records)
        if (!r.failed) ok.push_back(&r);
    if (ok.size() < 30)
        throw DataError("correlation pruning needs at least 30 successful records, got " +
                        std::to_string(ok.size()));

    const double n = static_cast<double>(ok.size());
    double mean_y = 0.0;
    for (const auto* r : ok) mean_y += r->mse;
    mean_y /= n;

    PruneResult out;
    for (const Combo& c : combo_pool()) {
        double sx = 0.0;
        for (const auto* r : ok)
            sx += std::find(r->combos.begin(), r->combos.end(), c) != r->combos.end() ? 1.0 : 0.0;
        const double mean_x = sx / n;
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (const auto* r : ok) {
            const double x =
                (std::find(r->combos.begin(), r->combos.end(), c) != r->combos.end() ? 1.0 : 0.0) -
                mean_x;
            const double y = r->mse - mean_y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        ComboCorrelation cc;
        cc.combo = c;
        if (sxx == 0.0 || syy == 0.0) {
            cc.correlation = std::numeric_limits<double>::quiet_NaN();
            cc.retained = true;
            out.warnings.push_back("correlation undefined for " + c.name() + "; retained");
        } else {
            cc.correlation = sxy / std::sqrt(sxx * syy);
            cc.retained = cc.correlation <= 0.0;
        }
        if (cc.retained) out.retained.push_back(c);
        out.correlations.push_back(cc);
    }
    out.spec = spec_from_combos(out.retained);
    return out;
}

SubsetSearch subset_search(const DevTrace& dev, const std::vector<FoldSpec>& folds,
                           const std::vector<Combo>& combos, int order,
                           const EvalOptions& options) {
    if (combos.size() > 12)
        throw UsageError("subset search over " + std::to_string(combos.size()) +
                         " combos exceeds the 2^12 subset cap");
    const MatrixXd family = features::apply_trace(features::candidate_regressors(), dev.data);
    const VectorXd y = column(dev.data.temp);

    SubsetSearch out;
    const std::size_t total = std::size_t{1} << combos.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t mask = 0; mask < total; ++mask) {
        SubsetResult r;
        for (std::size_t b = 0; b < combos.size(); ++b)
            if (mask & (std::size_t{1} << b)) r.combos.push_back(combos[b]);
        const auto spec = spec_from_combos(r.combos);
        const MatrixXd raw = family(Eigen::all, candidate_columns(spec));
        r.average_mse = with_context("subset " + std::to_string(mask) + ": ", [&] {
            return cross_validate_raw(raw, y, dev.data.sample_rate, folds, spec, order, options)
                .average;
        });
        if (r.average_mse < best) {
            best = r.average_mse;
            out.best = mask;
        }
        out.subsets.push_back(std::move(r));
    }
    return out;
}

} // namespace thermid::modelselect
