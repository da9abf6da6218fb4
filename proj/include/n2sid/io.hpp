#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "n2sid/model.hpp"
#include "n2sid/pipeline.hpp"

namespace n2sid {

/// Raised when a file cannot be opened or parsed.
class FileError : public std::runtime_error {
public:
    explicit FileError(const std::string& what) : std::runtime_error(what) {}
};

/// Column layout of a data file: u1..um then y1..yp.
struct CsvLayout {
    Index inputs = 0;
    Index outputs = 0;
};

/**
 * Reads a CSV with a header row. Without an explicit layout, columns named u* count as inputs
 * and y* as outputs (inputs first). Throws FileError on I/O or parse problems and
 * DimensionError when the layout does not match the file.
 */
IoRecord read_csv(const std::filesystem::path& path, const CsvLayout* layout = nullptr);

/// Header u1..um,y1..yp, values in %.16e.
std::string format_csv(const IoRecord& rec);
void write_csv(const std::filesystem::path& path, const IoRecord& rec);

/// Writes through a temporary file in the same directory and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string format_double(double v);

nlohmann::json matrix_to_json(const Matrix& M);
Matrix matrix_from_json(const nlohmann::json& j, Index rows, Index cols);

nlohmann::json model_to_json(const StateSpaceModel& model);
/// Accepts either a bare model object or a report containing a "model" key.
StateSpaceModel model_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const PipelineConfig& cfg);

/// Model and per-lambda diagnostics of one identification run.
nlohmann::json report_to_json(const PipelineReport& report);

nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace n2sid
