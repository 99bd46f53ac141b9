#include <set>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "thermid/error.hpp"
#include "thermid/explorer.hpp"

using namespace thermid;
using namespace thermid::testing;
using explorer::ConfigGrid;
using explorer::ExplorationResult;

namespace {

/// One-state model whose steady state reproduces the default plant exactly:
/// regressors f^2*u per core and f^1.5 per cluster, gains r_th * coefficient.
sysid::StateSpaceModel plant_equivalent_model() {
    const plant::PlantParams p;
    features::RegressorSpec spec;
    std::vector<double> w;
    for (int i = 0; i < kCoreCount; ++i) {
        spec.terms.push_back({features::Scope::core(i), 2.0, 1});
        w.push_back(p.r_th * (cluster_of(i) == Cluster::big ? p.c_dyn_big : p.c_dyn_little));
    }
    spec.terms.push_back({features::Scope::cluster(Cluster::little), 1.5, 0});
    w.push_back(p.r_th * 4 * p.c_sta_little);
    spec.terms.push_back({features::Scope::cluster(Cluster::big), 1.5, 0});
    w.push_back(p.r_th * 4 * p.c_sta_big);

    const double a = std::exp(-1.0 / (5.0 * p.time_constant()));
    sysid::StateSpaceModel m;
    m.A = Eigen::MatrixXd::Constant(1, 1, a);
    m.B = Eigen::MatrixXd(1, static_cast<Eigen::Index>(w.size()));
    for (std::size_t k = 0; k < w.size(); ++k) m.B(0, static_cast<Eigen::Index>(k)) = (1.0 - a) * w[k];
    m.C = Eigen::MatrixXd::Constant(1, 1, 1.0);
    m.K = Eigen::MatrixXd::Zero(1, 1);
    m.spec = spec;
    m.output_offset = p.t_amb;
    m.sample_rate = 5.0;
    m.stable = true;
    return m;
}

ExplorationResult result(double perf, double temp, double f_big = 1000.0) {
    ExplorationResult r;
    r.config.f_big_mhz = f_big;
    r.perf_proxy_ghz = perf;
    r.predicted_c = temp;
    r.feasible = true;
    return r;
}

ConfigGrid tiny_grid() { return ConfigGrid::parse("util=0,1;cores=2;big=1000,1900;little=1000,1500"); }

} // namespace

TEST_SUITE("explorer") {

TEST_CASE("configuration count") {
    CHECK(explorer::config_count(ConfigGrid::defaults()) == 23437500);
    CHECK(explorer::config_count(ConfigGrid::parse("util=0;cores=8;big=1000;little=1000")) == 1);
    CHECK(explorer::config_count(ConfigGrid::parse("util=0,1;cores=2;big=1000,1500,1900;little=1000,1500")) == 24);
    CHECK_THROWS_AS(ConfigGrid::parse("util=0,1;cores=9"), DataError);
    CHECK_THROWS_AS(ConfigGrid::parse("volts=1"), UsageError);
    CHECK_THROWS_AS(ConfigGrid::parse("util=1,0"), DataError);
    CHECK(ConfigGrid::parse(ConfigGrid::defaults().describe()).describe() == ConfigGrid::defaults().describe());
}

TEST_CASE("enumeration") {
    SUBCASE("first item is all minimum levels") {
        explorer::Enumerator en(ConfigGrid::defaults());
        Configuration c;
        REQUIRE(en.next(c));
        CHECK(c == uniform_config(1000, 1000, 0.0));
    }
    SUBCASE("small grid is complete and distinct") {
        const ConfigGrid g = ConfigGrid::parse("util=0,1;cores=2;big=1000;little=1000");
        explorer::Enumerator en(g);
        std::set<Configuration> seen;
        Configuration c;
        while (en.next(c)) seen.insert(c);
        CHECK(seen.size() == 4);
        CHECK(explorer::config_count(g) == 4);

        const ConfigGrid h = ConfigGrid::parse("util=0,0.5,1;cores=4;big=1000,1900;little=1000,1200,1500");
        explorer::Enumerator eh(h);
        std::set<Configuration> all;
        std::size_t n = 0;
        while (eh.next(c)) {
            all.insert(c);
            CHECK(c == explorer::configuration_at(h, n));
            ++n;
        }
        CHECK(n == explorer::config_count(h));
        CHECK(all.size() == n);
    }
    SUBCASE("restart at an offset matches the tail") {
        const ConfigGrid g = ConfigGrid::parse("util=0,0.5,1;cores=3;big=1000,1900;little=1000,1500");
        std::vector<Configuration> full;
        explorer::Enumerator en(g);
        Configuration c;
        while (en.next(c)) full.push_back(c);
        for (std::uint64_t k : {0u, 1u, 17u, 100u, 107u}) {
            explorer::Enumerator tail(g, k);
            for (std::size_t j = k; j < full.size(); ++j) {
                REQUIRE(tail.next(c));
                CHECK(c == full[j]);
            }
            CHECK_FALSE(tail.next(c));
        }
    }
}

TEST_CASE("performance proxy") {
    Configuration c = uniform_config(1800, 1200, 0.0);
    c.util[0] = 0.5;
    c.util[7] = 1.0;
    CHECK(explorer::performance_proxy(c) == doctest::Approx(0.6 + 1.8));
}

TEST_CASE("steady-state prediction") {
    SUBCASE("scalar model by hand") {
        sysid::StateSpaceModel m = scalar_model(0.5, 1.0, 20.0);
        m.spec.terms.push_back({features::Scope::cluster(Cluster::big), 2.0, 0});
        // g = 2, v = 1.5^2, so 20 + 2 * 2.25.
        CHECK(explorer::predict_steady(m, uniform_config(1500, 1000, 0.0)) == doctest::Approx(24.5));
    }
    SUBCASE("matches the plant for the equivalent model") {
        const auto m = plant_equivalent_model();
        Rng rng(8);
        for (int k = 0; k < 200; ++k) {
            const Configuration c = random_grid_config(rng);
            CHECK(explorer::predict_steady(m, c) ==
                  doctest::Approx(plant::steady_state_temperature(c, plant::PlantParams{})).epsilon(1e-12));
        }
    }
    SUBCASE("agrees with long simulation") {
        const auto m = plant_equivalent_model();
        const Configuration c = uniform_config(1700, 1300, 0.75);
        const Eigen::VectorXd v = features::apply(m.spec, c);
        const Eigen::MatrixXd held = v.transpose().replicate(10000, 1);
        CHECK(std::abs(sysid::simulate(m, held)(9999) - explorer::predict_steady(m, c)) < 1e-6);
    }
    SUBCASE("one gain solve for many predictions") {
        const auto m = plant_equivalent_model();
        const auto before = sysid::gain_solve_count();
        const explorer::SteadyStatePredictor p(m);
        std::vector<double> scratch(p.inputs());
        explorer::Enumerator en(ConfigGrid::parse("util=0,0.5,1;cores=4"));
        Configuration c;
        while (en.next(c)) (void)p.predict(c, scratch);
        CHECK(sysid::gain_solve_count() - before == 1);
    }
    SUBCASE("unstable model is rejected") {
        auto m = scalar_model(1.2, 1.0);
        m.spec.terms.push_back({features::Scope::cluster(Cluster::big), 2.0, 0});
        CHECK_THROWS_AS(explorer::SteadyStatePredictor{m}, DataError);
    }
}

TEST_CASE("validation") {
    const auto m = plant_equivalent_model();
    const Configuration c = uniform_config(1900, 1500, 1.0);
    const double t = explorer::predict_steady(m, c);
    const auto at = explorer::validate_config(m, c, t);
    CHECK(at.feasible);
    CHECK(at.margin_c == 0.0);
    const auto r90 = explorer::validate_config(m, c, 90.0);
    const auto r91 = explorer::validate_config(m, c, 91.0);
    CHECK(r91.margin_c == doctest::Approx(r90.margin_c + 1.0));
    CHECK(r90.feasible);
    CHECK_FALSE(explorer::validate_config(m, c, 80.0).feasible);
    CHECK(explorer::validate_config(m, uniform_config(1000, 1000, 0.0)).feasible);
}

TEST_CASE("Pareto front") {
    SUBCASE("single member") {
        CHECK(explorer::pareto_front({result(1.0, 50.0)}).size() == 1);
    }
    SUBCASE("dominated point is dropped") {
        const auto f = explorer::pareto_front({result(1.0, 60.0), result(2.0, 50.0)});
        REQUIRE(f.size() == 1);
        CHECK(f[0].perf_proxy_ghz == 2.0);
    }
    SUBCASE("infeasible points never enter") {
        auto r = result(5.0, 95.0);
        r.feasible = false;
        CHECK(explorer::pareto_front({r, result(1.0, 40.0)}).size() == 1);
    }
    SUBCASE("exact ties keep the smaller configuration") {
        const auto f = explorer::pareto_front({result(1.0, 50.0, 1900.0), result(1.0, 50.0, 1100.0)});
        REQUIRE(f.size() == 1);
        CHECK(f[0].config.f_big_mhz == 1100.0);
    }
    SUBCASE("random sample against brute force") {
        const auto m = plant_equivalent_model();
        const explorer::SteadyStatePredictor p(m);
        Rng rng(12345);
        std::vector<ExplorationResult> sample;
        for (int k = 0; k < 10000; ++k) sample.push_back(explorer::evaluate(p, random_grid_config(rng), 70.0));
        const auto fast = explorer::pareto_front(sample);
        const auto slow = brute_force_front(sample);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t k = 0; k < fast.size(); ++k) {
            CHECK(fast[k].config == slow[k].config);
            CHECK(fast[k].predicted_c == slow[k].predicted_c);
        }
    }
}

TEST_CASE("explore sweep") {
    const auto m = plant_equivalent_model();
    const ConfigGrid g = tiny_grid();
    explorer::ExploreOptions o;
    std::ostringstream csv;
    const auto s = explorer::explore(m, g, o, csv);
    CHECK(s.total == 16);
    CHECK(s.feasible + s.infeasible == 16);
    const std::string text = csv.str();
    CHECK(text.rfind(explorer::kExploreCsvHeader, 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 17);

    SUBCASE("thresholds at the extremes") {
        o.threshold = 1e6;
        std::ostringstream sink;
        CHECK(explorer::explore(m, g, o, sink).feasible == 16);
        o.threshold = explorer::predict_steady(m, uniform_config(1000, 1000, 0.0)) - 0.5;
        std::ostringstream sink2;
        const auto none = explorer::explore(m, g, o, sink2);
        CHECK(none.feasible == 0);
        CHECK(none.pareto.empty());
    }
    SUBCASE("thread count and batch size do not change the output") {
        const ConfigGrid h = ConfigGrid::parse("util=0,0.5,1;cores=5");
        std::ostringstream a, b;
        explorer::ExploreOptions one;
        explorer::ExploreOptions many;
        many.threads = 3;
        many.batch = 97;
        const auto sa = explorer::explore(m, h, one, a);
        const auto sb = explorer::explore(m, h, many, b);
        CHECK(a.str() == b.str());
        REQUIRE(sa.pareto.size() == sb.pareto.size());
        for (std::size_t k = 0; k < sa.pareto.size(); ++k) CHECK(sa.pareto[k].config == sb.pareto[k].config);
    }
    SUBCASE("row format") {
        std::string row;
        ExplorationResult r = result(1.25, 61.5);
        r.margin_c = 28.5;
        explorer::append_csv_row(row, r);
        CHECK(row == "1000,1000,0,0,0,0,0,0,0,0,61.500000,1.25,1,28.500000\n");
    }
}

TEST_CASE("transient check") {
    const auto m = plant_equivalent_model();
    const Configuration hot = uniform_config(1900, 1500, 1.0);
    const Configuration idle = uniform_config(1000, 1000, 0.0);
    const auto steady = explorer::transient_check(m, {{hot, 600.0}});
    CHECK(std::abs(steady.peak_c - explorer::predict_steady(m, hot)) < 0.1);

    const auto rise = explorer::transient_check(m, {{idle, 60.0}, {hot, 600.0}});
    CHECK(rise.time_s >= 60.0);
    CHECK(rise.peak_c <= explorer::predict_steady(m, hot) + 1e-9);

    const auto calm = explorer::transient_check(m, {{idle, 300.0}});
    CHECK(calm.peak_c == doctest::Approx(explorer::predict_steady(m, idle)));
    CHECK(calm.peak_c < steady.peak_c);
    CHECK(std::abs(calm.peak_c - m.output_offset) < 5.0);

    CHECK_THROWS_AS(explorer::transient_check(m, {}), DataError);
}

}
