#include "thermid/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "thermid/error.hpp"

namespace thermid::features {

namespace {

constexpr double kExponents[] = {1.0, 1.5, 2.0, 2.5, 3.0};

bool half_integer(double p) { return std::floor(2.0 * p) == 2.0 * p; }

// f^p for the exponents used here; pow() only for exotic ones.
double fpow(double f, double p) {
    if (p == 0.0) return 1.0;
    if (p == 1.0) return f;
    if (p == 2.0) return f * f;
    if (p == 3.0) return f * f * f;
    if (p == 1.5) return f * std::sqrt(f);
    if (p == 2.5) return f * f * std::sqrt(f);
    if (p == 0.5) return std::sqrt(f);
    return std::pow(f, p);
}

std::string row_error(std::size_t row, const std::string& what) {
    return "row " + std::to_string(row) + ": " + what;
}

} // namespace

std::string Scope::name() const {
    if (kind == Kind::core) return "core" + std::to_string(index);
    return index == 1 ? "big" : "little";
}

Scope Scope::parse(const std::string& s) {
    if (s == "big") return cluster(Cluster::big);
    if (s == "little") return cluster(Cluster::little);
    if (s.size() == 5 && s.rfind("core", 0) == 0 && s[4] >= '0' && s[4] < '0' + kCoreCount)
        return core(s[4] - '0');
    throw DataError("unknown regressor scope '" + s + "'");
}

void RegressorTerm::validate() const {
    const std::string id = scope.name() + " f^" + std::to_string(p) + " u^" + std::to_string(q);
    if (scope.kind == Scope::Kind::core && (scope.index < 0 || scope.index >= kCoreCount))
        throw DataError("regressor " + id + ": core index out of range");
    if (scope.kind == Scope::Kind::cluster && scope.index != 0 && scope.index != 1)
        throw DataError("regressor " + id + ": cluster index out of range");
    if (q != 0 && q != 1) throw DataError("regressor " + id + ": q must be 0 or 1");
    if (!(p >= 0.0 && p <= 3.0) || !half_integer(p))
        throw DataError("regressor " + id + ": p must be a multiple of 0.5 in [0, 3]");
    if (p == 0.0 && q == 0) throw DataError("regressor " + id + ": constant term");
    if (scope.kind == Scope::Kind::cluster && q != 0)
        throw DataError("regressor " + id + ": cluster terms carry no utilization factor");
    if (scope.kind == Scope::Kind::core && q == 0)
        throw DataError("regressor " + id + ": per-core pure-frequency terms duplicate cluster terms");
}

void RegressorSpec::validate() const {
    for (std::size_t i = 0; i < terms.size(); ++i) {
        terms[i].validate();
        for (std::size_t j = 0; j < i; ++j)
            if (terms[i] == terms[j])
                throw DataError("duplicate regressor " + terms[i].scope.name());
    }
    if (normalization) {
        if (normalization->size() != terms.size())
            throw DataError("normalization length does not match term count");
        for (const auto& n : *normalization)
            if (!(n.scale > 0.0) || !std::isfinite(n.mean))
                throw DataError("normalization scales must be positive and finite");
    }
}

std::vector<RegressorTerm> raw_regressors() {
    std::vector<RegressorTerm> out;
    out.push_back({Scope::cluster(Cluster::little), 1.0, 0});
    out.push_back({Scope::cluster(Cluster::big), 1.0, 0});
    for (int i = 0; i < kCoreCount; ++i) out.push_back({Scope::core(i), 0.0, 1});
    return out;
}

RegressorSpec eq7_regressors() {
    RegressorSpec spec;
    for (int i = 0; i < kCoreCount; ++i) {
        spec.terms.push_back({Scope::core(i), 1.5, 1});
        spec.terms.push_back({Scope::core(i), 2.0, 1});
        spec.terms.push_back({Scope::core(i), 3.0, 1});
        spec.terms.push_back({Scope::core(i), 0.0, 1});
    }
    spec.terms.push_back({Scope::cluster(Cluster::little), 2.0, 0});
    spec.terms.push_back({Scope::cluster(Cluster::big), 2.0, 0});
    return spec;
}

RegressorSpec candidate_regressors() {
    RegressorSpec spec;
    for (int i = 0; i < kCoreCount; ++i)
        for (double p : kExponents) spec.terms.push_back({Scope::core(i), p, 1});
    for (Cluster c : {Cluster::little, Cluster::big})
        for (double p : kExponents)
            if (p != 1.0) spec.terms.push_back({Scope::cluster(c), p, 0});
    for (const auto& t : raw_regressors()) spec.terms.push_back(t);
    return spec;
}

void apply(const RegressorSpec& spec, double f_big_mhz, double f_little_mhz,
           std::span<const double, kCoreCount> util, std::span<double> out) {
    if (out.size() != spec.size()) throw DataError("apply: output length mismatch");
    if (!(f_big_mhz > 0.0) || !(f_little_mhz > 0.0))
        throw DataError("apply: frequencies must be positive");
    for (double u : util)
        if (!(u >= 0.0) || u > 1.0) throw DataError("apply: utilization outside [0, 1]");

    const double f_ghz[2] = {f_little_mhz / 1000.0, f_big_mhz / 1000.0};
    const auto& norm = spec.normalization;
    for (std::size_t k = 0; k < spec.size(); ++k) {
        const RegressorTerm& term = spec.terms[k];
        const double f = f_ghz[term.scope.frequency_source() == Cluster::big ? 1 : 0];
        double v = fpow(f, term.p);
        if (term.q == 1) v *= util[static_cast<std::size_t>(term.scope.index)];
        if (norm) v = (v - (*norm)[k].mean) / (*norm)[k].scale;
        out[k] = v;
    }
}

Eigen::VectorXd apply(const RegressorSpec& spec, const Configuration& config) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(spec.size()));
    apply(spec, config.f_big_mhz, config.f_little_mhz, config.util,
          std::span<double>(v.data(), spec.size()));
    return v;
}

Eigen::MatrixXd apply_trace(const RegressorSpec& spec, const Trace& trace) {
    const auto n = trace.size();
    const auto m = spec.size();
    // Row-major scratch so each sample writes a contiguous span.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(
        static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    std::array<double, kCoreCount> u{};
    for (std::size_t k = 0; k < n; ++k) {
        for (int i = 0; i < kCoreCount; ++i) u[i] = trace.util[i][k];
        try {
            apply(spec, trace.f_big[k], trace.f_little[k], u,
                  std::span<double>(rows.data() + k * m, m));
        } catch (const DataError& e) {
            throw DataError(row_error(k, e.what()));
        }
    }
    return rows;
}

RegressorSpec fit_normalization(const RegressorSpec& spec, const Eigen::MatrixXd& raw) {
    if (raw.rows() < 2) throw DataError("fit_normalization: need at least 2 rows");
    if (static_cast<std::size_t>(raw.cols()) != spec.size())
        throw DataError("fit_normalization: column count does not match spec");
    RegressorSpec out = spec;
    std::vector<Normalization> norm(spec.size());
    const double n = static_cast<double>(raw.rows());
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        const double mean = raw.col(j).sum() / n;
        const double var = (raw.col(j).array() - mean).square().sum() / n;
        const double sd = std::sqrt(var);
        auto& nj = norm[static_cast<std::size_t>(j)];
        nj.mean = mean;
        // Treat round-off level spread as zero variance.
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
            nj.scale = 1.0;
            nj.flagged = true;
        } else {
            nj.scale = sd;
        }
    }
    out.normalization = std::move(norm);
    return out;
}

void normalize(const RegressorSpec& spec, Eigen::MatrixXd& raw) {
    if (!spec.normalization) return;
    const auto& norm = *spec.normalization;
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        const auto& nj = norm[static_cast<std::size_t>(j)];
        raw.col(j) = (raw.col(j).array() - nj.mean) / nj.scale;
    }
}

} // namespace thermid::features
