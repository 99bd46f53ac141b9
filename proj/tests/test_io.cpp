#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "support.hpp"
#include "thermid/error.hpp"
#include "thermid/io.hpp"
#include "thermid/manifest.hpp"

using namespace thermid;
using namespace thermid::testing;
namespace fs = std::filesystem;

namespace {

Trace small_trace() {
    Trace tr;
    tr.sample_rate = 5.0;
    Rng rng(77);
    for (int k = 0; k < 25; ++k) tr.push_back(k / 5.0, random_grid_config(rng), 30.0 + 0.1 * k + 1.0 / 3.0);
    return tr;
}

std::string expect_data_error(const std::function<void()>& f) {
    try {
        f();
    } catch (const DataError& e) {
        return e.what();
    }
    FAIL("expected a DataError");
    return {};
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("thermid_io_" + std::to_string(::getpid()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_SUITE("io") {

TEST_CASE("trace round trip is exact") {
    const Trace tr = small_trace();
    std::stringstream ss;
    io::write_trace(tr, ss);
    const std::string text = ss.str();
    CHECK(text.rfind("# format=thermid-trace version=1 sample_rate_hz=5", 0) == 0);
    const Trace back = io::read_trace(ss);
    CHECK(back.sample_rate == tr.sample_rate);
    CHECK(back.t == tr.t);
    CHECK(back.temp == tr.temp);
    CHECK(back.f_big == tr.f_big);
    CHECK(back.util == tr.util);
}

TEST_CASE("malformed trace rows name their line") {
    std::stringstream ss;
    io::write_trace(small_trace(), ss);
    std::string text = ss.str();
    // Damage the fourth line (second data row).
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k) pos = text.find('\n', pos) + 1;
    text.insert(pos, "abc");
    std::istringstream bad(text);
    CHECK(expect_data_error([&] { io::read_trace(bad); }).find("line 4") != std::string::npos);

    std::istringstream wrong_version("# format=thermid-trace version=7 sample_rate_hz=5\n");
    CHECK(expect_data_error([&] { io::read_trace(wrong_version); }).find("version") != std::string::npos);
}

TEST_CASE("model JSON round trip") {
    const LtiSystem s = random_stable_system(4, 3, 19);
    sysid::StateSpaceModel m;
    m.A = s.A;
    m.B = s.B;
    m.C = s.C;
    m.K = Eigen::MatrixXd::Constant(4, 1, 0.125);
    m.output_offset = 21.5;
    m.sample_rate = 5.0;
    m.stable = true;
    m.spec.terms.push_back({features::Scope::core(0), 2.0, 1});
    m.spec.terms.push_back({features::Scope::cluster(Cluster::big), 1.5, 0});
    m.spec.terms.push_back({features::Scope::core(7), 1.0, 1});
    Eigen::MatrixXd raw(3, 3);
    raw << 1, 2, 3, 4, 5, 6, 7, 8, 10;
    m.spec = features::fit_normalization(m.spec, raw);

    const auto back = io::model_from_json(io::model_to_json(m));
    CHECK(back.A == m.A);
    CHECK(back.B == m.B);
    CHECK(back.C == m.C);
    CHECK(back.K == m.K);
    CHECK(back.output_offset == m.output_offset);
    CHECK(back.spec.size() == 3);
    REQUIRE(back.spec.normalization);
    CHECK((*back.spec.normalization)[2].scale == (*m.spec.normalization)[2].scale);
    CHECK(io::model_to_json(back) == io::model_to_json(m));

    std::string text = io::model_to_json(m);
    const auto v = text.find("\"version\": 1");
    REQUIRE(v != std::string::npos);
    text.replace(v, 12, "\"version\": 2");
    CHECK_THROWS_AS(io::model_from_json(text), DataError);
    CHECK_THROWS_AS(io::model_from_json("{not json"), DataError);
}

TEST_CASE("regressor spec JSON") {
    const auto base = features::eq7_regressors();
    const auto back = io::spec_from_json(io::spec_to_json(base));
    CHECK(io::spec_to_json(back) == io::spec_to_json(base));
    CHECK(io::load_spec("eq7").size() == 34);
    CHECK(io::load_spec("candidates").size() == 58);
    CHECK_THROWS_AS(io::load_spec("/nonexistent/spec.json"), DataError);
}

TEST_CASE("experiment config") {
    SUBCASE("defaults and overrides") {
        const auto cfg = io::parse_config("[plant]\nnoise_sigma = 0.1\n[train]\norder = 12\n");
        CHECK(cfg.plant.noise_sigma == 0.1);
        CHECK(cfg.order == 12);
        CHECK(cfg.plant.r_th == 2.0);
        CHECK(cfg.threshold_c == 90.0);
    }
    SUBCASE("unknown key is named") {
        CHECK(expect_data_error([] { io::parse_config("[plant]\nr_tht = 2\n"); }).find("plant.r_tht") !=
              std::string::npos);
    }
    SUBCASE("bad value is rejected") {
        CHECK_THROWS_AS(io::parse_config("[train]\norder = many\n"), DataError);
        CHECK_THROWS_AS(io::parse_config("[plant]\nr_th = -1\n"), DataError);
    }
}

TEST_CASE("file hashing and manifests") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");

    TempDir dir;
    const fs::path f = dir.path / "data.txt";
    io::write_file(f, "abc");
    CHECK(sha256_file(f) == sha256_hex("abc"));

    RunManifest m;
    m.command = "test";
    m.add_output(f);
    m.write(dir.path / "m.json");
    CHECK(verify_manifest(dir.path / "m.json").empty());
    io::write_file(f, "abd");
    CHECK(verify_manifest(dir.path / "m.json").size() == 1);
}

}
