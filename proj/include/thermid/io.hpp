#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "thermid/features.hpp"
#include "thermid/plant.hpp"
#include "thermid/sysid.hpp"
#include "thermid/trace.hpp"

namespace thermid::io {

inline constexpr int kTraceVersion = 1;
inline constexpr int kModelVersion = 1;
inline constexpr int kSpecVersion = 1;

/// Trace CSV: a "# format=thermid-trace version=1 sample_rate_hz=R" line, the
/// header t_s,f_big_mhz,f_little_mhz,u0..u7,temp_c, then one row per sample.
/// Utilizations carry 4 decimals; other values use the shortest exact form.
void write_trace(const Trace& trace, std::ostream& out);
void write_trace(const Trace& trace, const std::filesystem::path& path);

/// Parses the format above. Errors name the offending line (1-based).
Trace read_trace(std::istream& in);
Trace read_trace(const std::filesystem::path& path);

/// Model JSON with row-major matrices, regressors and normalization.
std::string model_to_json(const sysid::StateSpaceModel& model);
sysid::StateSpaceModel model_from_json(const std::string& text);
void write_model(const sysid::StateSpaceModel& model, const std::filesystem::path& path);
sysid::StateSpaceModel read_model(const std::filesystem::path& path);

/// Regressor list without normalization.
std::string spec_to_json(const features::RegressorSpec& spec);
features::RegressorSpec spec_from_json(const std::string& text);

/// "eq7", "candidates", or a path to a regressor JSON file.
features::RegressorSpec load_spec(const std::string& name_or_path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

/// Settings read from the INI-style experiment file. Every key is optional.
struct ExperimentConfig {
    plant::PlantParams plant;
    double duration_s = 36000.0; ///< [simulate]
    double output_rate_hz = 32.0;
    int substeps = 1;
    double resample_hz = 5.0; ///< [train]
    int order = 32;
    int horizon = 0;
    double warmup_s = 600.0;
    double threshold_c = 90.0; ///< [explore]
    unsigned threads = 1;
    std::size_t iterations = 500; ///< [search]
    std::size_t combos_per_iteration = 3;
    int search_order = 5;
    std::size_t search_fold = 0;

    std::string source_text; ///< file contents, kept for run manifests
};

/// Reads an INI file with sections [plant], [simulate], [train], [explore]
/// and [search]. Unknown sections or keys and unparsable values are
/// DataErrors that name the key.
ExperimentConfig read_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);

} // namespace thermid::io
