#include "thermid/cli.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "thermid/error.hpp"
#include "thermid/explorer.hpp"
#include "thermid/io.hpp"
#include "thermid/manifest.hpp"
#include "thermid/pipeline.hpp"
#include "thermid/rng.hpp"

namespace thermid::cli {

namespace {

using json = nlohmann::ordered_json;
using clock_type = std::chrono::steady_clock;

std::string num(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, end);
}

/// Accumulates per-stage wall times for the manifest.
class Stages {
public:
    template <class F>
    auto time(const std::string& name, F&& f) {
        const auto t0 = clock_type::now();
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            record(name, t0);
        } else {
            auto r = f();
            record(name, t0);
            return r;
        }
    }
    std::vector<std::pair<std::string, double>> take() { return std::move(list_); }

private:
    void record(const std::string& name, clock_type::time_point t0) {
        list_.emplace_back(name, std::chrono::duration<double>(clock_type::now() - t0).count());
    }
    std::vector<std::pair<std::string, double>> list_;
};

/// Options shared by every subcommand; per-command flags override the config file.
struct Common {
    std::string config_path;
    std::uint64_t seed = 1;
    std::string out;
    std::vector<std::string> argv;

    io::ExperimentConfig load() const {
        return config_path.empty() ? io::ExperimentConfig{} : io::read_config(config_path);
    }

    RunManifest manifest(const std::string& command, const io::ExperimentConfig& cfg) const {
        RunManifest m;
        m.command = command;
        m.argv = argv;
        m.config_snapshot = cfg.source_text;
        if (!config_path.empty()) m.add_input(config_path);
        return m;
    }
};

std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

Configuration parse_configuration(const std::string& text) {
    if (text == "min" || text == "max") {
        Configuration c;
        const bool hi = text == "max";
        c.f_big_mhz = hi ? levels::big_mhz.back() : levels::big_mhz.front();
        c.f_little_mhz = hi ? levels::little_mhz.back() : levels::little_mhz.front();
        c.util.fill(hi ? 1.0 : 0.0);
        return c;
    }
    std::vector<double> vals;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = std::min(text.find(',', start), text.size());
        const std::string item = text.substr(start, comma - start);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
            throw UsageError("configuration: bad number '" + item + "'");
        vals.push_back(v);
        start = comma + 1;
    }
    if (vals.size() != 2 + kCoreCount)
        throw UsageError("configuration needs 10 values: f_big,f_little,u0..u7 (or min/max)");
    Configuration c;
    c.f_big_mhz = vals[0];
    c.f_little_mhz = vals[1];
    for (int i = 0; i < kCoreCount; ++i) c.util[i] = vals[2 + i];
    return c;
}

Trace at_rate(const Trace& trace, double rate) {
    if (trace.sample_rate == rate) return trace;
    if (trace.sample_rate < rate)
        throw DataError("trace rate " + num(trace.sample_rate) + " Hz is below the model rate " +
                        num(rate) + " Hz");
    return modelselect::resample(trace, rate);
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
    std::optional<double> duration;
};

void cmd_simulate(const Common& c, const SimulateArgs& a, std::ostream& out) {
    Stages st;
    io::ExperimentConfig cfg = c.load();
    if (a.duration) cfg.duration_s = *a.duration;
    if (!(cfg.duration_s > 0.0)) throw UsageError("duration must be positive");
    RunManifest m = c.manifest("simulate", cfg);
    const Trace trace = st.time("simulate", [&] { return pipeline::simulate_trace(cfg, c.seed); });
    st.time("write", [&] { io::write_trace(trace, c.out); });
    m.seeds = {{"seed", c.seed},
               {"schedule", derive_seed(c.seed, "schedule")},
               {"noise", derive_seed(c.seed, "noise")}};
    m.parameters["duration_s"] = num(cfg.duration_s);
    m.add_output(c.out);
    m.timings_s = st.take();
    m.write(manifest_path(c.out));
    out << "wrote " << trace.size() << " samples at " << num(trace.sample_rate) << " Hz to "
        << c.out << "\n";
}

// --- train -------------------------------------------------------------------

struct ModelArgs {
    std::string trace;
    std::string spec = "eq7";
    std::optional<int> order;
    std::optional<int> horizon;
    std::optional<double> warmup;
};

void apply_model_args(io::ExperimentConfig& cfg, const ModelArgs& a) {
    if (a.order) cfg.order = *a.order;
    if (a.horizon) cfg.horizon = *a.horizon;
    if (a.warmup) cfg.warmup_s = *a.warmup;
    if (cfg.order < 1) throw UsageError("--order must be >= 1");
    if (!(cfg.warmup_s >= 0.0)) throw UsageError("--warmup must be >= 0");
}

void cmd_train(const Common& c, const ModelArgs& a, std::ostream& out) {
    Stages st;
    io::ExperimentConfig cfg = c.load();
    apply_model_args(cfg, a);
    RunManifest m = c.manifest("train", cfg);
    const auto spec = io::load_spec(a.spec);
    const Trace trace = st.time("read", [&] { return io::read_trace(a.trace); });
    m.add_input(a.trace);
    const auto data = st.time("prepare", [&] { return pipeline::prepare(trace, cfg.resample_hz); });
    const auto trained = st.time("identify", [&] {
        return pipeline::train(data, spec, cfg.order, pipeline::eval_options(cfg));
    });
    const auto& model = trained.identification.model;

    json metrics;
    metrics["order"] = model.order();
    metrics["inputs"] = model.inputs();
    metrics["parameter_count"] = model.parameter_count();
    metrics["horizon"] = cfg.horizon > 0 ? cfg.horizon : sysid::default_horizon(cfg.order);
    metrics["sample_rate_hz"] = model.sample_rate;
    metrics["dev_samples"] = data.split.dev.data.size();
    metrics["gap_samples"] = data.split.gap;
    metrics["test_samples"] = data.split.test.data.size();
    metrics["warmup_s"] = cfg.warmup_s;
    metrics["test_mse"] = trained.test_mse;
    metrics["spectral_radius"] = model.spectral_radius();
    metrics["stable"] = model.stable;
    metrics["warnings"] = trained.identification.warnings;

    const std::string metrics_path = c.out + ".metrics.json";
    st.time("write", [&] {
        io::write_model(model, c.out);
        io::write_file(metrics_path, metrics.dump(2) + "\n");
    });
    m.parameters = {{"order", std::to_string(cfg.order)},
                    {"spec", a.spec},
                    {"resample_hz", num(cfg.resample_hz)},
                    {"warmup_s", num(cfg.warmup_s)}};
    m.add_output(c.out);
    m.add_output(metrics_path);
    m.timings_s = st.take();
    m.write(manifest_path(c.out));

    out << "order " << model.order() << ", " << model.inputs() << " regressors, "
        << model.parameter_count() << " parameters\n";
    out << "test MSE " << num(trained.test_mse) << " degC^2\n";
    for (const auto& w : trained.identification.warnings) out << "warning: " << w << "\n";
}

// --- crossval / order-search --------------------------------------------------

struct CvArgs {
    ModelArgs model;
    std::string scheme = "1h";
    std::string orders = "2..60";
};

struct CvSetup {
    io::ExperimentConfig cfg;
    pipeline::Prepared data;
    std::vector<modelselect::FoldSpec> folds;
    features::RegressorSpec spec;
};

CvSetup cv_setup(const Common& c, const CvArgs& a, RunManifest& m, Stages& st) {
    CvSetup s;
    s.cfg = c.load();
    apply_model_args(s.cfg, a.model);
    const auto scheme = modelselect::parse_scheme(a.scheme);
    s.spec = io::load_spec(a.model.spec);
    const Trace trace = st.time("read", [&] { return io::read_trace(a.model.trace); });
    m.add_input(a.model.trace);
    m.config_snapshot = s.cfg.source_text;
    s.data = st.time("prepare", [&] { return pipeline::prepare(trace, s.cfg.resample_hz); });
    s.folds = modelselect::folds_for(scheme, s.data.split.dev.data.size(), s.data.resampled.sample_rate);
    m.parameters = {{"scheme", a.scheme},
                    {"spec", a.model.spec},
                    {"resample_hz", num(s.cfg.resample_hz)},
                    {"warmup_s", num(s.cfg.warmup_s)}};
    return s;
}

void cmd_crossval(const Common& c, const CvArgs& a, std::ostream& out) {
    Stages st;
    RunManifest m = c.manifest("crossval", {});
    CvSetup s = cv_setup(c, a, m, st);
    const auto cv = st.time("crossval", [&] {
        return modelselect::cross_validate(s.data.split.dev, s.folds, s.spec, s.cfg.order,
                                           pipeline::eval_options(s.cfg));
    });
    std::ostringstream csv;
    csv << "fold,orientation,train_start,train_end,val_start,val_end,mse\n";
    for (const auto& r : cv.folds) {
        const auto& f = s.folds[r.fold];
        csv << r.fold + 1 << ','
            << (f.orientation == modelselect::Orientation::normal ? "normal" : "reversed") << ','
            << f.train_start << ',' << f.train_end << ',' << f.val_start << ',' << f.val_end << ','
            << num(r.mse) << "\n";
    }
    csv << "average,,,,,," << num(cv.average) << "\n";
    io::write_file(c.out, csv.str());
    m.parameters["order"] = std::to_string(s.cfg.order);
    m.add_output(c.out);
    m.timings_s = st.take();
    m.write(manifest_path(c.out));
    for (const auto& r : cv.folds) out << "fold " << r.fold + 1 << ": MSE " << num(r.mse) << "\n";
    out << "average MSE " << num(cv.average) << " degC^2\n";
}

void cmd_order_search(const Common& c, const CvArgs& a, std::ostream& out) {
    Stages st;
    const auto orders = modelselect::parse_orders(a.orders);
    RunManifest m = c.manifest("order-search", {});
    CvSetup s = cv_setup(c, a, m, st);
    const auto search = st.time("search", [&] {
        return modelselect::grid_search_order(s.data.split.dev, s.folds, s.spec, orders,
                                              pipeline::eval_options(s.cfg));
    });
    std::ostringstream csv;
    csv << "order,average_mse\n";
    for (const auto& p : search.curve) csv << p.order << ',' << num(p.average_mse) << "\n";
    io::write_file(c.out, csv.str());
    m.parameters["orders"] = a.orders;
    m.add_output(c.out);
    m.timings_s = st.take();
    m.write(manifest_path(c.out));
    out << "best order " << search.best_order << "\n";
}

// --- regressor-search ----------------------------------------------------------

struct SearchArgs {
    std::string trace;
    std::optional<std::size_t> iterations;
    std::optional<int> order;
    std::optional<std::size_t> fold;
    std::optional<double> warmup;
    bool subsets = false;
};

void cmd_regressor_search(const Common& c, const SearchArgs& a, std::ostream& out) {
    Stages st;
    io::ExperimentConfig cfg = c.load();
    if (a.iterations) cfg.iterations = *a.iterations;
    if (a.order) cfg.search_order = *a.order;
    if (a.fold) cfg.search_fold = *a.fold;
    if (a.warmup) cfg.warmup_s = *a.warmup;
    if (cfg.iterations == 0) throw UsageError("--iterations must be at least 1");
    RunManifest m = c.manifest("regressor-search", cfg);

    const Trace trace = st.time("read", [&] { return io::read_trace(a.trace); });
    m.add_input(a.trace);
    const auto data = st.time("prepare", [&] { return pipeline::prepare(trace, cfg.resample_hz); });
    const auto folds = modelselect::blocked_folds_1h(data.split.dev.data.size(),
                                                     data.resampled.sample_rate);
    if (cfg.search_fold >= folds.size()) throw UsageError("--fold must be below 10");

    modelselect::RegressorSearchOptions so;
    so.iterations = cfg.iterations;
    so.combos_per_iteration = cfg.combos_per_iteration;
    so.order = cfg.search_order;
    so.seed = c.seed;
    const auto eval = pipeline::eval_options(cfg);
    const auto records = st.time("search", [&] {
        return modelselect::randomized_regressor_search(data.split.dev, folds[cfg.search_fold], so, eval);
    });

    const auto pool = modelselect::combo_pool();
    std::ostringstream csv;
    csv << "iteration";
    for (const auto& p : pool) csv << ',' << p.name();
    csv << ",mse,failed\n";
    for (const auto& r : records) {
        csv << r.iteration;
        for (const auto& p : pool)
            csv << ',' << (std::find(r.combos.begin(), r.combos.end(), p) != r.combos.end() ? 1 : 0);
        csv << ',' << (r.failed ? "" : num(r.mse)) << ',' << (r.failed ? 1 : 0) << "\n";
    }
    io::write_file(c.out, csv.str());
    m.add_output(c.out);

    const auto pruned = modelselect::correlation_prune(records);
    std::ostringstream corr;
    corr << "combo,correlation,retained\n";
    for (const auto& cc : pruned.correlations)
        corr << cc.combo.name() << ',' << (std::isnan(cc.correlation) ? "" : num(cc.correlation))
             << ',' << (cc.retained ? 1 : 0) << "\n";
    const std::string corr_path = c.out + ".correlations.csv";
    const std::string spec_path = c.out + ".spec.json";
    io::write_file(corr_path, corr.str());
    io::write_file(spec_path, io::spec_to_json(pruned.spec));
    m.add_output(corr_path);
    m.add_output(spec_path);

    std::size_t failed = 0;
    for (const auto& r : records) failed += r.failed ? 1 : 0;
    out << records.size() << " iterations, " << failed << " failed\n";
    out << "retained:";
    for (const auto& cmb : pruned.retained) out << ' ' << cmb.name();
    out << "\n";
    for (const auto& w : pruned.warnings) out << "warning: " << w << "\n";

    if (a.subsets) {
        const auto one_hour = modelselect::blocked_folds_1h(data.split.dev.data.size(),
                                                            data.resampled.sample_rate);
        const auto ss = st.time("subsets", [&] {
            return modelselect::subset_search(data.split.dev, one_hour, pruned.retained,
                                              cfg.search_order, eval);
        });
        std::ostringstream sc;
        sc << "subset,combos,average_mse\n";
        for (std::size_t k = 0; k < ss.subsets.size(); ++k) {
            sc << k << ',';
            for (std::size_t q = 0; q < ss.subsets[k].combos.size(); ++q)
                sc << (q ? ";" : "") << ss.subsets[k].combos[q].name();
            sc << ',' << num(ss.subsets[k].average_mse) << "\n";
        }
        const std::string subsets_path = c.out + ".subsets.csv";
        const std::string best_path = c.out + ".best.spec.json";
        io::write_file(subsets_path, sc.str());
        io::write_file(best_path,
                       io::spec_to_json(modelselect::spec_from_combos(ss.subsets[ss.best].combos)));
        m.add_output(subsets_path);
        m.add_output(best_path);
        out << "best subset average MSE " << num(ss.subsets[ss.best].average_mse) << "\n";
    }

    m.seeds = {{"seed", c.seed}, {"regressor-search", derive_seed(c.seed, "regressor-search")}};
    m.parameters = {{"iterations", std::to_string(cfg.iterations)},
                    {"order", std::to_string(cfg.search_order)},
                    {"fold", std::to_string(cfg.search_fold)}};
    m.timings_s = st.take();
    m.write(manifest_path(c.out));
}

// --- explore / validate / predict ----------------------------------------------

struct ExploreArgs {
    std::string model;
    std::string grid = "default";
    std::optional<double> threshold;
    std::optional<unsigned> threads;
};

json result_json(const explorer::ExplorationResult& r) {
    json j;
    j["f_big_mhz"] = r.config.f_big_mhz;
    j["f_little_mhz"] = r.config.f_little_mhz;
    j["util"] = r.config.util;
    j["predicted_c"] = r.predicted_c;
    j["perf_proxy_ghz"] = r.perf_proxy_ghz;
    j["feasible"] = r.feasible;
    j["margin_c"] = r.margin_c;
    return j;
}

void cmd_explore(const Common& c, const ExploreArgs& a, std::ostream& out) {
    Stages st;
    io::ExperimentConfig cfg = c.load();
    if (a.threshold) cfg.threshold_c = *a.threshold;
    if (a.threads) cfg.threads = *a.threads;
    RunManifest m = c.manifest("explore", cfg);
    const auto model = io::read_model(a.model);
    m.add_input(a.model);
    const auto grid = explorer::ConfigGrid::parse(a.grid);

    explorer::ExploreOptions eo;
    eo.threshold = cfg.threshold_c;
    eo.threads = cfg.threads;
    std::ofstream csv(c.out, std::ios::binary);
    if (!csv) throw DataError("cannot open '" + c.out + "' for writing");
    explorer::ExploreSummary summary;
    try {
        summary = st.time("sweep", [&] { return explorer::explore(model, grid, eo, csv); });
    } catch (const DataError&) {
        // Leave a manifest describing the partial output before reporting.
        csv.close();
        m.parameters["status"] = "failed";
        std::error_code ec;
        if (std::filesystem::exists(c.out, ec)) m.add_output(c.out);
        m.timings_s = st.take();
        m.write(manifest_path(c.out));
        throw;
    }
    csv.close();
    if (!csv) throw DataError("failed writing '" + c.out + "'");

    json s;
    s["model"] = a.model;
    s["model_sha256"] = sha256_file(a.model);
    s["grid"] = grid.describe();
    s["threshold_c"] = cfg.threshold_c;
    s["configurations"] = summary.total;
    s["feasible"] = summary.feasible;
    s["infeasible"] = summary.infeasible;
    json front = json::array();
    for (const auto& r : summary.pareto) front.push_back(result_json(r));
    s["pareto_front"] = std::move(front);
    const std::string summary_path = c.out + ".summary.json";
    io::write_file(summary_path, s.dump(2) + "\n");

    m.parameters = {{"grid", grid.describe()},
                    {"threshold_c", num(cfg.threshold_c)},
                    {"threads", std::to_string(cfg.threads)},
                    {"mean_prediction_s", num(summary.mean_prediction_s)}};
    m.add_output(c.out);
    m.add_output(summary_path);
    m.timings_s = st.take();
    m.write(manifest_path(c.out));

    out << summary.total << " configurations, " << summary.feasible << " feasible, "
        << summary.infeasible << " infeasible at " << num(cfg.threshold_c) << " degC\n";
    out << "wall time " << num(summary.wall_s) << " s, mean prediction "
        << num(summary.mean_prediction_s) << " s per configuration\n";
    out << "Pareto front: " << summary.pareto.size() << " configurations\n";
}

struct ValidateArgs {
    std::string model;
    std::string configuration;
    std::optional<double> threshold;
};

void cmd_validate(const Common& c, const ValidateArgs& a, std::ostream& out) {
    io::ExperimentConfig cfg = c.load();
    if (a.threshold) cfg.threshold_c = *a.threshold;
    const auto model = io::read_model(a.model);
    const auto r = explorer::validate_config(model, parse_configuration(a.configuration), cfg.threshold_c);
    out << "predicted " << num(r.predicted_c) << " degC, margin " << num(r.margin_c) << " degC, "
        << (r.feasible ? "feasible" : "infeasible") << "\n";
    if (!c.out.empty()) {
        io::write_file(c.out, result_json(r).dump(2) + "\n");
        RunManifest m = c.manifest("validate", cfg);
        m.add_input(a.model);
        m.parameters = {{"configuration", a.configuration}, {"threshold_c", num(cfg.threshold_c)}};
        m.add_output(c.out);
        m.write(manifest_path(c.out));
    }
}

struct PredictArgs {
    std::string model;
    std::string trace;
    std::string split = "all";
    std::string mode = "free-run";
    std::optional<double> warmup;
};

void cmd_predict(const Common& c, const PredictArgs& a, std::ostream& out) {
    Stages st;
    io::ExperimentConfig cfg = c.load();
    if (a.warmup) cfg.warmup_s = *a.warmup;
    if (a.split != "all" && a.split != "test") throw UsageError("--split must be all or test");
    if (a.mode != "free-run" && a.mode != "one-step")
        throw UsageError("--mode must be free-run or one-step");
    RunManifest m = c.manifest("predict", cfg);
    const auto model = io::read_model(a.model);
    m.add_input(a.model);
    const Trace trace = st.time("read", [&] { return io::read_trace(a.trace); });
    m.add_input(a.trace);

    const Trace series = at_rate(trace, model.sample_rate);
    const std::size_t begin =
        a.split == "test" ? pipeline::prepare(trace, model.sample_rate).test_begin : 0;
    const std::size_t end = series.size();
    const Eigen::MatrixXd v = modelselect::feature_matrix(model.spec, series);
    const Eigen::Map<const Eigen::VectorXd> y(series.temp.data(), static_cast<Eigen::Index>(end));

    Eigen::VectorXd pred = st.time("predict", [&]() -> Eigen::VectorXd {
        if (a.mode == "free-run") return modelselect::free_run(model, v, begin, end, cfg.warmup_s);
        const auto n = static_cast<Eigen::Index>(end);
        return sysid::predict_one_step(model, v.topRows(n), y).tail(static_cast<Eigen::Index>(end - begin));
    });
    const auto measured = y.segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
    const double err = sysid::mse(pred, measured);

    std::string csv = "t_s,measured_c,predicted_c\n";
    for (std::size_t k = begin; k < end; ++k) {
        csv += num(series.t[k]) + ',' + num(series.temp[k]) + ',' +
               num(pred(static_cast<Eigen::Index>(k - begin))) + '\n';
    }
    io::write_file(c.out, csv);
    m.parameters = {{"split", a.split}, {"mode", a.mode}, {"warmup_s", num(cfg.warmup_s)},
                    {"mse", num(err)}};
    m.add_output(c.out);
    m.timings_s = st.take();
    m.write(manifest_path(c.out));
    out << (end - begin) << " samples, " << a.mode << " MSE " << num(err) << " degC^2\n";
}

void add_common(CLI::App* sub, Common& c, bool out_required) {
    sub->add_option("--config", c.config_path, "INI experiment configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "Run seed");
    auto* o = sub->add_option("--out", c.out, "Output file");
    if (out_required) o->required();
}

void add_model_args(CLI::App* sub, ModelArgs& a) {
    sub->add_option("--trace", a.trace, "Trace CSV")->required()->check(CLI::ExistingFile);
    sub->add_option("--spec", a.spec, "Regressors: eq7, candidates or a JSON file");
    sub->add_option("--order", a.order, "Model order");
    sub->add_option("--horizon", a.horizon, "Hankel block rows (0 = default)");
    sub->add_option("--warmup", a.warmup, "Input-only warm-up before scored ranges, seconds");
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Thermal model identification and configuration exploration", "thermid"};
    app.require_subcommand(1);
    app.set_version_flag("--version", toolkit_version());

    Common common;
    for (int k = 0; k < argc; ++k) common.argv.emplace_back(argv[k]);

    SimulateArgs sim;
    auto* s_sim = app.add_subcommand("simulate", "Generate a synthetic 32 Hz trace");
    add_common(s_sim, common, true);
    s_sim->add_option("--duration", sim.duration, "Trace length in seconds");

    ModelArgs train;
    auto* s_train = app.add_subcommand("train", "Identify a model and score the test split");
    add_common(s_train, common, true);
    add_model_args(s_train, train);

    CvArgs cv;
    auto* s_cv = app.add_subcommand("crossval", "Blocked cross-validation (1h or 6h scheme)");
    add_common(s_cv, common, true);
    add_model_args(s_cv, cv.model);
    s_cv->add_option("--scheme", cv.scheme, "1h or 6h");

    CvArgs os;
    auto* s_os = app.add_subcommand("order-search", "Cross-validated model order grid search");
    add_common(s_os, common, true);
    add_model_args(s_os, os.model);
    s_os->add_option("--scheme", os.scheme, "1h or 6h");
    s_os->add_option("--orders", os.orders, "Orders: a..b, a,b,c or a single value");

    SearchArgs rs;
    auto* s_rs = app.add_subcommand("regressor-search", "Randomized regressor search and pruning");
    add_common(s_rs, common, true);
    s_rs->add_option("--trace", rs.trace, "Trace CSV")->required()->check(CLI::ExistingFile);
    s_rs->add_option("--iterations", rs.iterations, "Search iterations");
    s_rs->add_option("--order", rs.order, "Model order used during the search");
    s_rs->add_option("--fold", rs.fold, "1-hour fold used for scoring (0-9)");
    s_rs->add_option("--warmup", rs.warmup, "Input-only warm-up, seconds");
    s_rs->add_flag("--subsets", rs.subsets, "Also cross-validate every subset of retained combos");

    ExploreArgs ex;
    auto* s_ex = app.add_subcommand("explore", "Sweep the configuration space");
    add_common(s_ex, common, true);
    s_ex->add_option("--model", ex.model, "Model JSON")->required()->check(CLI::ExistingFile);
    s_ex->add_option("--grid", ex.grid, "default, or overrides like util=0,1;cores=2");
    s_ex->add_option("--threshold", ex.threshold, "Thermal limit in degC");
    s_ex->add_option("--threads", ex.threads, "Worker threads");

    ValidateArgs va;
    auto* s_va = app.add_subcommand("validate", "Check one configuration against the limit");
    add_common(s_va, common, false);
    s_va->add_option("--model", va.model, "Model JSON")->required()->check(CLI::ExistingFile);
    s_va->add_option("configuration", va.configuration, "f_big,f_little,u0..u7 or min/max")->required();
    s_va->add_option("--threshold", va.threshold, "Thermal limit in degC");

    PredictArgs pr;
    auto* s_pr = app.add_subcommand("predict", "Predict temperature over a trace");
    add_common(s_pr, common, true);
    s_pr->add_option("--model", pr.model, "Model JSON")->required()->check(CLI::ExistingFile);
    s_pr->add_option("--trace", pr.trace, "Trace CSV")->required()->check(CLI::ExistingFile);
    s_pr->add_option("--split", pr.split, "all or test");
    s_pr->add_option("--mode", pr.mode, "free-run or one-step");
    s_pr->add_option("--warmup", pr.warmup, "Input-only warm-up, seconds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*s_sim) cmd_simulate(common, sim, out);
        else if (*s_train) cmd_train(common, train, out);
        else if (*s_cv) cmd_crossval(common, cv, out);
        else if (*s_os) cmd_order_search(common, os, out);
        else if (*s_rs) cmd_regressor_search(common, rs, out);
        else if (*s_ex) cmd_explore(common, ex, out);
        else if (*s_va) cmd_validate(common, va, out);
        else if (*s_pr) cmd_predict(common, pr, out);
        return 0;
    } catch (const UsageError& e) {
        err << "thermid: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "thermid: " << e.what() << "\n";
        return 2;
    }
}

} // namespace thermid::cli
