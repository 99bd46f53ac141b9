#include "thermid/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include "json.hpp"

#include "thermid/error.hpp"

namespace thermid::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kTraceHeader = "t_s,f_big_mhz,f_little_mhz,u0,u1,u2,u3,u4,u5,u6,u7,temp_c";

void put(std::string& out, double v) {
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

std::string line_error(std::size_t line, const std::string& what) {
    return "line " + std::to_string(line) + ": " + what;
}

// "key=value" tokens of the trace preamble.
std::map<std::string, std::string> preamble_fields(const std::string& line) {
    std::map<std::string, std::string> out;
    std::istringstream ss(line.substr(1));
    std::string tok;
    while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq != std::string::npos) out[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return out;
}

double parse_double(std::string_view s, bool& ok) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    ok = ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
    return v;
}

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
        throw DataError(std::string("model: matrix ") + name + " has the wrong row count");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw DataError(std::string("model: matrix ") + name + " has the wrong column count");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

json term_json(const features::RegressorTerm& t) {
    json j;
    j["scope"] = t.scope.name();
    j["p"] = t.p;
    j["q"] = t.q;
    return j;
}

features::RegressorTerm term_from(const json& j) {
    features::RegressorTerm t;
    t.scope = features::Scope::parse(j.at("scope").get<std::string>());
    t.p = j.at("p").get<double>();
    t.q = j.at("q").get<int>();
    t.validate();
    return t;
}

void check_format(const json& j, const char* format, int version) {
    if (!j.is_object() || !j.contains("format") || j["format"] != format)
        throw DataError(std::string("not a ") + format + " document");
    if (!j.contains("version") || !j["version"].is_number_integer() ||
        j["version"].get<int>() != version)
        throw DataError(std::string(format) + ": unsupported version (expected " +
                        std::to_string(version) + ")");
}

template <class T>
T parse_value(const std::string& key, const std::string& text) {
    T v{};
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end)
        throw DataError("config: bad value '" + text + "' for key '" + key + "'");
    return v;
}

} // namespace

void write_trace(const Trace& trace, std::ostream& out) {
    trace.validate();
    std::string buf;
    buf.reserve(1 << 20);
    buf += "# format=thermid-trace version=" + std::to_string(kTraceVersion) + " sample_rate_hz=";
    put(buf, trace.sample_rate);
    buf += '\n';
    buf += kTraceHeader;
    buf += '\n';
    for (std::size_t k = 0; k < trace.size(); ++k) {
        put(buf, trace.t[k]);
        buf += ',';
        put(buf, trace.f_big[k]);
        buf += ',';
        put(buf, trace.f_little[k]);
        for (int c = 0; c < kCoreCount; ++c) {
            buf += ',';
            put_fixed(buf, trace.util[c][k], 4);
        }
        buf += ',';
        put(buf, trace.temp[k]);
        buf += '\n';
        if (buf.size() > (1 << 20) - 512) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("failed writing trace");
}

void write_trace(const Trace& trace, const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
    write_trace(trace, f);
    f.close();
    if (!f) throw DataError("failed writing '" + path.string() + "'");
}

Trace read_trace(std::istream& in) {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line) || line.empty() || line[0] != '#')
        throw DataError(line_error(1, "missing '# format=thermid-trace' preamble"));
    const auto fields = preamble_fields(line);
    const auto fmt = fields.find("format");
    if (fmt == fields.end() || fmt->second != "thermid-trace")
        throw DataError(line_error(1, "not a thermid trace"));
    const auto ver = fields.find("version");
    if (ver == fields.end() || ver->second != std::to_string(kTraceVersion))
        throw DataError(line_error(1, "unsupported trace version (expected " +
                                          std::to_string(kTraceVersion) + ")"));
    const auto rate = fields.find("sample_rate_hz");
    bool ok = false;
    Trace trace;
    if (rate != fields.end()) trace.sample_rate = parse_double(rate->second, ok);
    if (!ok || !(trace.sample_rate > 0.0))
        throw DataError(line_error(1, "missing or invalid sample_rate_hz"));

    ++lineno;
    if (!std::getline(in, line)) throw DataError(line_error(lineno, "missing header"));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTraceHeader) throw DataError(line_error(lineno, "unexpected header"));

    constexpr int kColumns = 12;
    double vals[kColumns];
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t start = 0;
        int col = 0;
        for (; col < kColumns; ++col) {
            const std::size_t comma = line.find(',', start);
            const bool last = col == kColumns - 1;
            if (last != (comma == std::string::npos))
                throw DataError(line_error(lineno, "expected " + std::to_string(kColumns) + " fields"));
            const std::size_t end = last ? line.size() : comma;
            vals[col] = parse_double(std::string_view(line).substr(start, end - start), ok);
            if (!ok || !std::isfinite(vals[col]))
                throw DataError(line_error(lineno, "field " + std::to_string(col + 1) + " is not a number"));
            start = end + 1;
        }
        Configuration c;
        c.f_big_mhz = vals[1];
        c.f_little_mhz = vals[2];
        for (int i = 0; i < kCoreCount; ++i) c.util[i] = vals[3 + i];
        if (!(c.f_big_mhz > 0.0) || !(c.f_little_mhz > 0.0))
            throw DataError(line_error(lineno, "frequencies must be positive"));
        for (double u : c.util)
            if (u < 0.0 || u > 1.0) throw DataError(line_error(lineno, "utilization outside [0, 1]"));
        if (!trace.t.empty() && !(vals[0] > trace.t.back()))
            throw DataError(line_error(lineno, "timestamps must increase"));
        trace.push_back(vals[0], c, vals[11]);
    }
    if (trace.empty()) throw DataError("trace has no data rows");
    return trace;
}

Trace read_trace(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open trace '" + path.string() + "'");
    try {
        return read_trace(f);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string model_to_json(const sysid::StateSpaceModel& model) {
    model.validate();
    json j;
    j["format"] = "thermid-model";
    j["version"] = kModelVersion;
    j["order"] = model.order();
    j["inputs"] = model.inputs();
    j["parameter_count"] = model.parameter_count();
    j["sample_rate_hz"] = model.sample_rate;
    j["output_offset"] = model.output_offset;
    j["stable"] = model.stable;
    json regs = json::array();
    for (std::size_t k = 0; k < model.spec.size(); ++k) {
        json t = term_json(model.spec.terms[k]);
        if (model.spec.normalization) {
            const auto& n = (*model.spec.normalization)[k];
            t["mean"] = n.mean;
            t["scale"] = n.scale;
            t["flagged"] = n.flagged;
        }
        regs.push_back(std::move(t));
    }
    j["regressors"] = std::move(regs);
    j["A"] = matrix_json(model.A);
    j["B"] = matrix_json(model.B);
    j["C"] = matrix_json(model.C);
    j["K"] = matrix_json(model.K);
    return j.dump(1) + "\n";
}

sysid::StateSpaceModel model_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        check_format(j, "thermid-model", kModelVersion);
        sysid::StateSpaceModel m;
        const int n = j.at("order").get<int>();
        const int inputs = j.at("inputs").get<int>();
        if (n < 1 || inputs < 1) throw DataError("model: order and inputs must be positive");
        m.sample_rate = j.at("sample_rate_hz").get<double>();
        m.output_offset = j.at("output_offset").get<double>();
        m.stable = j.at("stable").get<bool>();
        std::vector<features::Normalization> norm;
        bool has_norm = true;
        for (const json& t : j.at("regressors")) {
            m.spec.terms.push_back(term_from(t));
            if (t.contains("mean") && t.contains("scale")) {
                norm.push_back({t["mean"].get<double>(), t["scale"].get<double>(),
                                t.value("flagged", false)});
            } else {
                has_norm = false;
            }
        }
        if (has_norm) m.spec.normalization = std::move(norm);
        m.A = matrix_from(j.at("A"), n, n, "A");
        m.B = matrix_from(j.at("B"), n, inputs, "B");
        m.C = matrix_from(j.at("C"), 1, n, "C");
        m.K = matrix_from(j.at("K"), n, 1, "K");
        m.spec.validate();
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw DataError(std::string("model: ") + e.what());
    }
}

void write_model(const sysid::StateSpaceModel& model, const fs::path& path) {
    write_file(path, model_to_json(model));
}

sysid::StateSpaceModel read_model(const fs::path& path) {
    try {
        return model_from_json(read_file(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string spec_to_json(const features::RegressorSpec& spec) {
    json j;
    j["format"] = "thermid-regressors";
    j["version"] = kSpecVersion;
    json terms = json::array();
    for (const auto& t : spec.terms) terms.push_back(term_json(t));
    j["terms"] = std::move(terms);
    return j.dump(1) + "\n";
}

features::RegressorSpec spec_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        check_format(j, "thermid-regressors", kSpecVersion);
        features::RegressorSpec spec;
        for (const json& t : j.at("terms")) spec.terms.push_back(term_from(t));
        if (spec.terms.empty()) throw DataError("regressor list is empty");
        spec.validate();
        return spec;
    } catch (const json::exception& e) {
        throw DataError(std::string("regressors: ") + e.what());
    }
}

features::RegressorSpec load_spec(const std::string& name_or_path) {
    if (name_or_path == "eq7") return features::eq7_regressors();
    if (name_or_path == "candidates") return features::candidate_regressors();
    try {
        return spec_from_json(read_file(name_or_path));
    } catch (const DataError& e) {
        throw DataError(name_or_path + ": " + e.what());
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.close();
    if (!f) throw DataError("failed writing '" + path.string() + "'");
}

ExperimentConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw DataError("config: line " + std::to_string(e.line()) + ": " + e.message());
    }

    ExperimentConfig cfg;
    cfg.source_text = text;
    using Setter = std::function<void(const std::string& key, const std::string& value)>;
    auto d = [](double& target) -> Setter {
        return [&target](const std::string& k, const std::string& v) { target = parse_value<double>(k, v); };
    };
    auto i = [](int& target) -> Setter {
        return [&target](const std::string& k, const std::string& v) { target = parse_value<int>(k, v); };
    };
    auto z = [](std::size_t& target) -> Setter {
        return [&target](const std::string& k, const std::string& v) {
            target = parse_value<std::size_t>(k, v);
        };
    };
    auto& p = cfg.plant;
    const std::map<std::string, Setter> setters = {
        {"plant.t_amb", d(p.t_amb)},
        {"plant.r_th", d(p.r_th)},
        {"plant.c_th", d(p.c_th)},
        {"plant.c_dyn_big", d(p.c_dyn_big)},
        {"plant.c_dyn_little", d(p.c_dyn_little)},
        {"plant.c_sta_big", d(p.c_sta_big)},
        {"plant.c_sta_little", d(p.c_sta_little)},
        {"plant.noise_sigma", d(p.noise_sigma)},
        {"plant.throttle_on", d(p.throttle_on)},
        {"plant.throttle_off", d(p.throttle_off)},
        {"plant.throttle_freq", d(p.throttle_freq)},
        {"simulate.duration_s", d(cfg.duration_s)},
        {"simulate.output_rate_hz", d(cfg.output_rate_hz)},
        {"simulate.substeps", i(cfg.substeps)},
        {"train.resample_hz", d(cfg.resample_hz)},
        {"train.order", i(cfg.order)},
        {"train.horizon", i(cfg.horizon)},
        {"train.warmup_s", d(cfg.warmup_s)},
        {"explore.threshold", d(cfg.threshold_c)},
        {"explore.threads",
         [&cfg](const std::string& k, const std::string& v) { cfg.threads = parse_value<unsigned>(k, v); }},
        {"search.iterations", z(cfg.iterations)},
        {"search.combos_per_iteration", z(cfg.combos_per_iteration)},
        {"search.order", i(cfg.search_order)},
        {"search.fold", z(cfg.search_fold)},
    };

    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw DataError("config: key '" + section + "' must be inside a section");
        for (const auto& [key, node] : body) {
            const std::string full = section + "." + key;
            const auto it = setters.find(full);
            if (it == setters.end()) throw DataError("config: unknown key '" + full + "'");
            it->second(full, node.data());
        }
    }
    cfg.plant.validate();
    if (!(cfg.duration_s >= 10.0)) throw DataError("config: simulate.duration_s must be >= 10");
    if (cfg.substeps < 1) throw DataError("config: simulate.substeps must be >= 1");
    if (cfg.order < 1) throw DataError("config: train.order must be >= 1");
    if (!(cfg.warmup_s >= 0.0)) throw DataError("config: train.warmup_s must be >= 0");
    return cfg;
}

ExperimentConfig read_config(const fs::path& path) {
    try {
        return parse_config(read_file(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

} // namespace thermid::io
