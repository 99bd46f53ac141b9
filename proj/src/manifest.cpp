#include "thermid/manifest.hpp"

#include <array>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "json.hpp"
#include "thermid/error.hpp"
#include "thermid/io.hpp"

namespace thermid {

namespace {

using json = nlohmann::ordered_json;

struct DigestDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
            throw Error("SHA-256 initialisation failed");
    }
    void update(const void* data, std::size_t n) {
        if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw Error("SHA-256 update failed");
    }
    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1) throw Error("SHA-256 final failed");
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        for (unsigned k = 0; k < len; ++k) {
            out += digits[md[k] >> 4];
            out += digits[md[k] & 15];
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, DigestDeleter> ctx_;
};

} // namespace

const char* toolkit_version() noexcept { return THERMID_VERSION; }

std::string sha256_hex(const std::string& data) {
    Sha256 h;
    h.update(data.data(), data.size());
    return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path.string() + "' for hashing");
    Sha256 h;
    std::vector<char> buf(1 << 20);
    while (f) {
        f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h.update(buf.data(), static_cast<std::size_t>(f.gcount()));
    }
    return h.hex();
}

void RunManifest::add_input(const std::filesystem::path& p) {
    inputs.emplace_back(p.string(), sha256_file(p));
}

void RunManifest::add_output(const std::filesystem::path& p) {
    outputs.emplace_back(p.string(), sha256_file(p));
}

std::string RunManifest::to_json() const {
    json j;
    j["format"] = "thermid-manifest";
    j["version"] = 1;
    j["toolkit_version"] = toolkit_version();
    j["command"] = command;
    j["argv"] = argv;
    j["seeds"] = json::object();
    for (const auto& [k, v] : seeds) j["seeds"][k] = v;
    j["parameters"] = json::object();
    for (const auto& [k, v] : parameters) j["parameters"][k] = v;
    j["config"] = config_snapshot.empty() ? json(nullptr) : json(config_snapshot);
    auto files = [](const std::vector<std::pair<std::string, std::string>>& list) {
        json arr = json::array();
        for (const auto& [path, hash] : list) arr.push_back({{"path", path}, {"sha256", hash}});
        return arr;
    };
    j["inputs"] = files(inputs);
    j["outputs"] = files(outputs);
    j["timings_s"] = json::object();
    for (const auto& [stage, s] : timings_s) j["timings_s"][stage] = s;
    return j.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& path) const { io::write_file(path, to_json()); }

std::vector<std::string> verify_manifest(const std::filesystem::path& manifest) {
    std::vector<std::string> bad;
    try {
        const json j = json::parse(io::read_file(manifest));
        if (j.value("format", "") != "thermid-manifest") throw DataError("not a manifest");
        for (const char* key : {"inputs", "outputs"}) {
            for (const auto& f : j.at(key)) {
                const std::string path = f.at("path").get<std::string>();
                std::error_code ec;
                if (!std::filesystem::exists(path, ec) || sha256_file(path) != f.at("sha256").get<std::string>())
                    bad.push_back(path);
            }
        }
    } catch (const json::exception& e) {
        throw DataError(manifest.string() + ": " + e.what());
    }
    return bad;
}

} // namespace thermid
