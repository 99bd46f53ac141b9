// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: thermid_acceptance [work_dir]   (default: a fresh directory under /tmp)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "json.hpp"
#include "support.hpp"
#include "thermid/cli.hpp"
#include "thermid/explorer.hpp"
#include "thermid/io.hpp"
#include "thermid/manifest.hpp"
#include "thermid/modelselect.hpp"

using namespace thermid;
using namespace thermid::testing;
namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& measured) {
    if (!ok) ++failures;
    std::cout << (ok ? "PASS" : "FAIL") << "  AC" << id << "  " << what << "  [" << measured << "]"
              << std::endl;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

class Workdir {
public:
    explicit Workdir(fs::path p) : path_(std::move(p)) { fs::create_directories(path_); }
    std::string operator()(const std::string& name) const { return (path_ / name).string(); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

/// Runs the command line in-process; throws when it does not exit 0.
void thermid_cmd(std::vector<std::string> args) {
    args.insert(args.begin(), "thermid");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) {
        std::string line;
        for (const auto& a : args) line += a + " ";
        throw std::runtime_error("command failed (" + std::to_string(code) + "): " + line + "\n" + err.str());
    }
}

double csv_average(const std::string& path) {
    std::istringstream in(io::read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("average,", 0) == 0) return std::stod(line.substr(line.rfind(',') + 1));
    }
    throw std::runtime_error("no average row in " + path);
}

/// Runs one criterion, turning an exception into a FAIL line.
void guarded(int id, const std::string& what, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, false, what, std::string("error: ") + e.what());
    }
}

} // namespace

int main(int argc, char** argv) {
    const Workdir w(argc > 1 ? fs::path(argv[1])
                             : fs::temp_directory_path() / ("thermid_acceptance_" + std::to_string(::getpid())));
    std::cout << "work directory: " << w.path().string() << std::endl;

    // ---- 1: configuration count
    guarded(1, "configuration count", [&] {
        const auto n = explorer::config_count(explorer::ConfigGrid::defaults());
        report(1, n == 23437500, "configuration count of the default grid is 23437500", std::to_string(n));
    });

    // ---- 2: parameter counts
    guarded(2, "parameter counts", [&] {
        const auto a = sysid::StateSpaceModel::parameter_count(32, 34);
        const auto b = sysid::StateSpaceModel::parameter_count(43, 34);
        report(2, a == 2144 && b == 3354, "n^2 + n*m + n for (32, 34) and (43, 34) is 2144 and 3354",
               std::to_string(a) + ", " + std::to_string(b));
    });

    // ---- 3: LTI oracle recovery
    guarded(3, "LTI recovery", [&] {
        const auto t0 = Clock::now();
        const LtiSystem s = random_stable_system(3, 2, 101);
        const Eigen::MatrixXd u = white_inputs(25000, 2, 202);
        const Eigen::VectorXd y = run_system(s, u);
        const Eigen::VectorXd truth = y.tail(5000);
        const auto clean = sysid::n4sid_identify(u.topRows(20000), y.head(20000), 3);
        const double fit_clean = sysid::nrmse_fit(sysid::simulate(clean.model, u).tail(5000), truth);
        const Eigen::VectorXd noisy = add_noise_db(y, 20.0, 303);
        const auto rough = sysid::n4sid_identify(u.topRows(20000), noisy.head(20000), 3);
        const double fit_noisy = sysid::nrmse_fit(sysid::simulate(rough.model, u).tail(5000), truth);
        const double secs = seconds_since(t0);
        report(3, fit_clean >= 98.0 && fit_noisy >= 90.0 && secs <= 60.0,
               "order-3 oracle: noise-free fit >= 98 %, 20 dB fit >= 90 %, <= 60 s",
               fmt("%.3f %%", fit_clean) + ", " + fmt("%.3f %%", fit_noisy) + ", " + fmt("%.2f s", secs));
    });

    // ---- 4: end-to-end pipeline on 10 h of synthetic data
    const std::string trace = w("trace.csv");
    const std::string model = w("m32.json");
    bool have_model = false;
    guarded(4, "end-to-end pipeline", [&] {
        const auto t0 = Clock::now();
        thermid_cmd({"simulate", "--duration", "36000", "--seed", "1", "--out", trace});
        thermid_cmd({"train", "--trace", trace, "--order", "32", "--out", model});
        have_model = true;
        thermid_cmd({"crossval", "--trace", trace, "--order", "32", "--scheme", "1h", "--out", w("cv1h.csv")});
        thermid_cmd({"crossval", "--trace", trace, "--order", "43", "--scheme", "6h", "--out", w("cv6h.csv")});
        const double secs = seconds_since(t0);
        const double cv1 = csv_average(w("cv1h.csv"));
        const double cv6 = csv_average(w("cv6h.csv"));
        const double test = json::parse(io::read_file(model + ".metrics.json"))["test_mse"].get<double>();
        report(4, cv1 <= 0.25 && test <= 0.25 && cv6 <= cv1 && secs <= 1800.0,
               "1h CV MSE <= 0.25, test MSE <= 0.25, 6h CV MSE <= 1h CV MSE, <= 30 min",
               "1h " + fmt("%.4f", cv1) + ", test " + fmt("%.4f", test) + ", 6h " + fmt("%.4f", cv6) + ", " +
                   fmt("%.0f s", secs));
    });

    // ---- 5: fold geometry
    guarded(5, "fold geometry", [&] {
        const auto f1 = modelselect::blocked_folds_1h(142200, 5.0);
        bool ok = f1.size() == 10;
        for (std::size_t k = 0; ok && k < f1.size(); ++k) {
            ok = f1[k].block_start() == 13800 * k && f1[k].train_size() == 14400 && f1[k].val_size() == 3600 &&
                 f1[k].orientation == modelselect::Orientation::normal;
        }
        const auto f6 = modelselect::blocked_folds_6h(142200, 5.0);
        ok = ok && f6.size() == 4;
        using modelselect::Orientation;
        const std::size_t starts[] = {0, 0, 34200, 34200};
        const Orientation orient[] = {Orientation::normal, Orientation::reversed, Orientation::normal,
                                      Orientation::reversed};
        for (std::size_t k = 0; ok && k < 4; ++k) {
            ok = f6[k].block_start() == starts[k] && f6[k].orientation == orient[k] &&
                 f6[k].train_size() == 86400 && f6[k].val_size() == 21600;
        }
        // Reversed folds validate on the first fifth and train on the rest.
        ok = ok && f6[1].val_start == 0 && f6[1].train_start == 21600 && f6[3].val_end == 34200 + 21600;
        std::string dev = "n/a";
        if (have_model) {
            const auto d = json::parse(io::read_file(model + ".metrics.json"))["dev_samples"].get<std::size_t>();
            dev = std::to_string(d);
            ok = ok && d == 142200;
        }
        report(5, ok, "1h stride 13800 with 14400/3600 blocks; 6h blocks at 0 and 34200, normal and reversed",
               "pipeline dev samples " + dev);
    });

    // ---- 6: explorer against the plant oracle
    guarded(6, "oracle agreement", [&] {
        const auto m = io::read_model(model);
        const plant::PlantParams p;
        Rng rng(derive_seed(1, "acceptance-oracle"));
        // The default plant peaks below 90 degC, so the boundary is also
        // checked at 60 degC where it cuts through the sample.
        int within = 0, bad_disagreements = 0, disagreements = 0, bad60 = 0, disagreements60 = 0;
        double worst = 0.0;
        for (int k = 0; k < 1000; ++k) {
            const Configuration c = random_grid_config(rng);
            const double pred = explorer::predict_steady(m, c);
            const double truth = plant::steady_state_temperature(c, p);
            worst = std::max(worst, std::abs(pred - truth));
            within += std::abs(pred - truth) <= 1.0 ? 1 : 0;
            if ((pred <= 90.0) != (truth <= 90.0)) {
                ++disagreements;
                if (std::abs(truth - 90.0) > 1.0) ++bad_disagreements;
            }
            if ((pred <= 60.0) != (truth <= 60.0)) {
                ++disagreements60;
                if (std::abs(truth - 60.0) > 1.0) ++bad60;
            }
        }
        report(6, within >= 950 && bad_disagreements == 0 && bad60 == 0,
               ">= 95 % of 1000 random configs within 1 degC; feasibility disagreements only within 1 degC of 90",
               std::to_string(within) + "/1000 within, worst " + fmt("%.3f degC", worst) + ", " +
                   std::to_string(disagreements) + " disagreements at 90, " + std::to_string(disagreements60) +
                   " at 60 (" + std::to_string(bad60) + " outside 1 degC)");
    });

    // ---- 7: full sweep speed
    guarded(7, "sweep speed", [&] {
        thermid_cmd({"explore", "--model", model, "--threads", "1", "--out", w("sweep.csv")});
        const auto man = json::parse(io::read_file(w("sweep.csv.manifest.json")));
        const double sweep = man["timings_s"]["sweep"].get<double>();
        const double mean = std::stod(man["parameters"]["mean_prediction_s"].get<std::string>());
        const auto summary = json::parse(io::read_file(w("sweep.csv.summary.json")));
        const auto total = summary["configurations"].get<std::uint64_t>();
        const double speedup = 100.0 / mean;
        report(7, total == 23437500 && sweep <= 120.0 && mean <= 0.25e-3 && speedup >= 400.0,
               "23437500 configs single-threaded <= 120 s, mean prediction <= 2.5e-4 s, speedup vs 100 s >= 400x",
               fmt("%.1f s", sweep) + ", " + fmt("%.3g s", mean) + ", " + fmt("%.3gx", speedup));
    });

    // ---- 8: plant invariants
    guarded(8, "plant invariants", [&] {
        plant::PlantParams quiet;
        quiet.noise_sigma = 0.0;
        Rng rng(derive_seed(1, "acceptance-plant"));
        double worst = 0.0, worst_cold = 0.0;
        for (int k = 0; k < 100; ++k) {
            const Configuration c = random_grid_config(rng);
            const double ss = quiet.t_amb + quiet.r_th * plant::power(c, quiet);
            const double span = 10.0 * quiet.time_constant();
            const Trace tr = plant::simulate_schedule({{c, span}}, quiet, 1);
            worst = std::max(worst, std::abs(tr.temp.back() - ss));
            plant::SimulationOptions cold;
            cold.initial_temp = quiet.t_amb;
            const Trace tc = plant::simulate_schedule({{c, span}}, quiet, 1, cold);
            worst_cold = std::max(worst_cold, std::abs(tc.temp.back() - ss));
        }
        int monotone = 0;
        const plant::PlantParams p;
        for (int k = 0; k < 100; ++k) {
            const Configuration c = random_grid_config(rng);
            Configuration d = c;
            const auto core = static_cast<int>(rng.index(kCoreCount));
            d.util[core] = std::min(1.0, c.util[core] + 0.25);
            monotone += plant::steady_state_temperature(d, p) >= plant::steady_state_temperature(c, p) ? 1 : 0;
        }
        plant::PlantParams hot = quiet;
        hot.c_dyn_big = 4.0;
        const Trace th = plant::simulate_schedule(plant::random_schedule(3600.0, 7), hot, 7);
        const double peak = *std::max_element(th.temp.begin(), th.temp.end());
        report(8, worst < 1e-3 && monotone == 100 && peak <= hot.throttle_on + 0.5,
               "|T_final - (T_amb + R*P)| < 1e-3 after 10 tau; monotone in utilization; throttle overshoot <= 0.5",
               "worst " + fmt("%.2e degC", worst) + " (from ambient: " + fmt("%.2e", worst_cold) + "), " +
                   std::to_string(monotone) + "/100 monotone, hot peak " + fmt("%.3f degC", peak));
    });

    // ---- 9: Pareto front against brute force
    guarded(9, "Pareto oracle", [&] {
        const auto m = io::read_model(model);
        const explorer::SteadyStatePredictor pred(m);
        Rng rng(derive_seed(1, "acceptance-pareto"));
        std::vector<explorer::ExplorationResult> rows;
        for (int k = 0; k < 10000; ++k) rows.push_back(explorer::evaluate(pred, random_grid_config(rng), 60.0));
        const auto fast = explorer::pareto_front(rows);
        const auto slow = brute_force_front(rows);
        bool same = fast.size() == slow.size();
        for (std::size_t k = 0; same && k < fast.size(); ++k)
            same = fast[k].config == slow[k].config && fast[k].predicted_c == slow[k].predicted_c;
        report(9, same, "pareto_front on 10000 rows equals O(n^2) dominance filtering",
               std::to_string(fast.size()) + " vs " + std::to_string(slow.size()) + " members");
    });

    // ---- 10: reproducibility of every command
    guarded(10, "reproducibility", [&] {
        struct Pair {
            std::string name, a, b;
        };
        std::vector<Pair> pairs;
        auto twice = [&](const std::string& name, std::vector<std::string> args,
                         const std::vector<std::string>& extra_suffixes) {
            for (const char* tag : {"a", "b"}) {
                auto full = args;
                full.push_back("--out");
                full.push_back(w("r10_" + name + "_" + tag));
                thermid_cmd(full);
            }
            for (const auto& suffix : extra_suffixes)
                pairs.push_back({name + suffix, w("r10_" + name + "_a") + suffix, w("r10_" + name + "_b") + suffix});
        };
        twice("simulate.csv", {"simulate", "--duration", "36000", "--seed", "1"}, {""});
        twice("train.json", {"train", "--trace", trace, "--order", "32"}, {"", ".metrics.json"});
        twice("crossval.csv", {"crossval", "--trace", trace, "--order", "32", "--scheme", "1h"}, {""});
        twice("orders.csv", {"order-search", "--trace", trace, "--orders", "1..4", "--scheme", "1h"}, {""});
        twice("search.csv", {"regressor-search", "--trace", trace, "--iterations", "30", "--order", "5"},
              {"", ".correlations.csv", ".spec.json"});
        twice("validate.json", {"validate", "--model", model, "max"}, {""});
        twice("predict.csv", {"predict", "--model", model, "--trace", trace, "--split", "test"}, {""});
        twice("explore.csv", {"explore", "--model", model}, {"", ".summary.json"});
        pairs.push_back({"simulate vs pipeline trace", w("r10_simulate.csv_a"), trace});
        pairs.push_back({"train vs pipeline model", w("r10_train.json_a"), model});

        std::string mismatched;
        for (const auto& p : pairs)
            if (sha256_file(p.a) != sha256_file(p.b)) mismatched += " " + p.name;
        report(10, mismatched.empty(), "reruns with identical inputs and seed give identical output files",
               std::to_string(pairs.size()) + " file pairs compared" +
                   (mismatched.empty() ? std::string() : ", differing:" + mismatched));
        fs::remove(w("r10_explore.csv_a"));
        fs::remove(w("r10_explore.csv_b"));
    });

    fs::remove(w("sweep.csv"));
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
