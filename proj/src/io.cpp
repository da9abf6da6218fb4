#include "n2sid/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace n2sid {

using nlohmann::json;

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& text, const std::filesystem::path& path, std::size_t line) {
    if (text.empty()) throw FileError(path.string() + ":" + std::to_string(line) + ": missing value");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || errno == ERANGE || !std::isfinite(v)) {
        throw FileError(path.string() + ":" + std::to_string(line) + ": bad number '" + text + "'");
    }
    return v;
}

json double_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Index k = 0; k < v.size(); ++k) out.push_back(double_or_null(v(k)));
    return out;
}

}  // namespace

IoRecord read_csv(const std::filesystem::path& path, const CsvLayout* layout) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open data file " + path.string());

    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        header = split_fields(line);
        break;
    }
    if (header.empty()) throw FileError(path.string() + ": file is empty");

    CsvLayout cols;
    if (layout != nullptr) {
        cols = *layout;
        if (cols.inputs + cols.outputs != static_cast<Index>(header.size())) {
            throw DimensionError(path.string() + ": header has " + std::to_string(header.size()) +
                                 " columns, expected " + std::to_string(cols.inputs + cols.outputs));
        }
    } else {
        for (const auto& name : header) {
            if (!name.empty() && (name[0] == 'u' || name[0] == 'U')) {
                if (cols.outputs > 0) throw FileError(path.string() + ": input columns must precede outputs");
                ++cols.inputs;
            } else if (!name.empty() && (name[0] == 'y' || name[0] == 'Y')) {
                ++cols.outputs;
            } else {
                throw FileError(path.string() + ": cannot classify column '" + name +
                                "'; name columns u1..um, y1..yp or pass --inputs/--outputs");
            }
        }
    }
    require(cols.outputs >= 1, path.string() + ": data file needs at least one output column");

    const Index width = cols.inputs + cols.outputs;
    std::vector<double> values;
    Index rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto fields = split_fields(line);
        if (static_cast<Index>(fields.size()) != width) {
            throw FileError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                            " fields, found " + std::to_string(fields.size()));
        }
        for (const auto& f : fields) values.push_back(parse_number(f, path, line_no));
        ++rows;
    }
    if (rows == 0) throw FileError(path.string() + ": no data rows");

    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> all(
        values.data(), rows, width);
    return {all.leftCols(cols.inputs), all.rightCols(cols.outputs)};
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

std::string format_csv(const IoRecord& rec) {
    std::string out;
    for (Index j = 0; j < rec.inputs(); ++j) out += "u" + std::to_string(j + 1) + ",";
    for (Index i = 0; i < rec.outputs(); ++i) out += "y" + std::to_string(i + 1) + (i + 1 < rec.outputs() ? "," : "\n");
    for (Index k = 0; k < rec.samples(); ++k) {
        for (Index j = 0; j < rec.inputs(); ++j) out += format_double(rec.u(k, j)) + ",";
        for (Index i = 0; i < rec.outputs(); ++i) {
            out += format_double(rec.y(k, i));
            out += i + 1 < rec.outputs() ? "," : "\n";
        }
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const IoRecord& rec) { write_file_atomic(path, format_csv(rec)); }

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FileError("cannot write " + path.string());
        out << content;
        out.flush();
        if (!out) throw FileError("write failed for " + path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw FileError("cannot move output into place at " + path.string());
    }
}

json matrix_to_json(const Matrix& M) {
    json rows = json::array();
    for (Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j, Index rows, Index cols) {
    if (!j.is_array() || static_cast<Index>(j.size()) != rows) throw FileError("matrix has wrong number of rows");
    Matrix M(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Index>(row.size()) != cols) throw FileError("matrix has wrong number of columns");
        for (Index c = 0; c < cols; ++c) M(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return M;
}

json model_to_json(const StateSpaceModel& model) {
    return {{"n", model.n()},
            {"m", model.m()},
            {"p", model.p()},
            {"A", matrix_to_json(model.A)},
            {"B", matrix_to_json(model.B)},
            {"C", matrix_to_json(model.C)},
            {"D", matrix_to_json(model.D)},
            {"K", matrix_to_json(model.K)}};
}

StateSpaceModel model_from_json(const json& j) {
    try {
        const json& mj = j.contains("model") ? j.at("model") : j;
        const Index n = mj.at("n").get<Index>(), m = mj.at("m").get<Index>(), p = mj.at("p").get<Index>();
        if (n < 1 || m < 0 || p < 1) throw FileError("model dimensions are invalid");
        StateSpaceModel model{matrix_from_json(mj.at("A"), n, n), matrix_from_json(mj.at("B"), n, m),
                              matrix_from_json(mj.at("C"), p, n), matrix_from_json(mj.at("D"), p, m),
                              mj.contains("K") ? matrix_from_json(mj.at("K"), n, p) : Matrix::Zero(n, p)};
        model.validate();
        return model;
    } catch (const json::exception& e) {
        throw FileError(std::string("malformed model: ") + e.what());
    }
}

json config_to_json(const PipelineConfig& cfg) {
    return {{"s", cfg.s},
            {"lambda_min", cfg.lambda_min},
            {"lambda_max", cfg.lambda_max},
            {"grid", cfg.grid},
            {"lambda_scale", "lambda/N_ide"},
            {"variant", to_string(cfg.variant)},
            {"order", cfg.order > 0 ? json(cfg.order) : json("auto")},
            {"max_order", cfg.max_order},
            {"split", to_string(cfg.split)},
            {"del", cfg.del},
            {"detrend", cfg.detrend},
            {"scale_outputs", cfg.scale_outputs},
            {"x0", to_string(cfg.x0_policy)},
            {"warm_start", cfg.warm_start},
            {"admm",
             {{"max_iter", cfg.admm.max_iter},
              {"eps_abs", cfg.admm.eps_abs},
              {"eps_rel", cfg.admm.eps_rel},
              {"tau", cfg.admm.tau},
              {"mu", cfg.admm.mu},
              {"rho0", cfg.admm.rho0}}}};
}

json report_to_json(const PipelineReport& report) {
    json grid = json::array();
    for (const auto& pt : report.points) {
        grid.push_back({{"lambda", pt.lambda},
                        {"lambda_normalized", pt.lambda_normalized},
                        {"failed", pt.failed},
                        {"error", pt.error},
                        {"J", pt.failed ? json(nullptr) : double_or_null(pt.J)},
                        {"order", pt.order},
                        {"sigma", vector_to_json(pt.sigma)},
                        {"iterations", pt.iterations},
                        {"converged", pt.converged},
                        {"objective", pt.failed ? json(nullptr) : double_or_null(pt.objective)}});
    }
    return {{"model", model_to_json(report.best.model)},
            {"x0_ide", vector_to_json(report.best.x0)},
            {"order", report.best.order},
            {"variant", to_string(report.best.variant)},
            {"rank_deficient", report.best.rank_deficient},
            {"lambda_opt", report.lambda_opt},
            {"lambda_opt_normalized", report.lambda_opt_normalized},
            {"ide1_samples", report.ide1_samples},
            {"ide2_samples", report.ide2_samples},
            {"lambda_grid", grid},
            {"timings",
             {{"factorization_s", report.timings.factorization},
              {"sweep_s", report.timings.sweep},
              {"extraction_s", report.timings.extraction},
              {"total_s", report.timings.total}}}};
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FileError(path.string() + ": " + e.what());
    }
}

}  // namespace n2sid
