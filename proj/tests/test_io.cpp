#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "n2sid/io.hpp"
#include "oracles.hpp"

using namespace n2sid;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "n2sid_test_io";
    fs::create_directories(dir);
    return dir / name;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream(path) << text;
}

}  // namespace

TEST_CASE("CSV round trip is exact to 1e-15") {
    std::mt19937_64 rng(1);
    const IoRecord rec{oracle::random_matrix(rng, 30, 2), 1e3 * oracle::random_matrix(rng, 30, 3)};
    const auto path = scratch("round.csv");
    write_csv(path, rec);
    const auto back = read_csv(path);
    REQUIRE(back.inputs() == 2);
    REQUIRE(back.outputs() == 3);
    CHECK(((back.u - rec.u).cwiseAbs().array() <= 1e-15 * (1.0 + rec.u.cwiseAbs().array())).all());
    CHECK(((back.y - rec.y).cwiseAbs().array() <= 1e-15 * (1.0 + rec.y.cwiseAbs().array())).all());
    CHECK_FALSE(fs::exists(path.string() + ".tmp"));
}

TEST_CASE("CSV layout from headers or explicit counts") {
    const auto path = scratch("layout.csv");
    write_text(path, "a,b,c\n1,2,3\n4,5,6\n\n");
    CHECK_THROWS_AS(read_csv(path), FileError);
    const CsvLayout layout{1, 2};
    const auto rec = read_csv(path, &layout);
    CHECK(rec.inputs() == 1);
    CHECK(rec.y(1, 1) == 6.0);
    const CsvLayout wrong{2, 2};
    CHECK_THROWS_AS(read_csv(path, &wrong), DimensionError);

    write_text(path, "y1\n1\n2\n");
    CHECK(read_csv(path).inputs() == 0);

    write_text(path, "y1,u1\n1,2\n");
    CHECK_THROWS_AS(read_csv(path), FileError);
}

TEST_CASE("CSV errors name the file") {
    const auto missing = scratch("does_not_exist.csv");
    fs::remove(missing);
    try {
        (void)read_csv(missing);
        FAIL("expected FileError");
    } catch (const FileError& e) {
        CHECK(std::string(e.what()).find(missing.string()) != std::string::npos);
    }
    const auto path = scratch("bad.csv");
    write_text(path, "u1,y1\n1,2\n3,oops\n");
    CHECK_THROWS_AS(read_csv(path), FileError);
    write_text(path, "u1,y1\n1,2\n3\n");
    CHECK_THROWS_AS(read_csv(path), FileError);
    write_text(path, "u1,y1\n");
    CHECK_THROWS_AS(read_csv(path), FileError);
    write_text(path, "u1,y1\n1,nan\n");
    CHECK_THROWS_AS(read_csv(path), FileError);
}

TEST_CASE("model JSON round trip") {
    std::mt19937_64 rng(2);
    const auto model = oracle::random_stable_model(rng, 3, 2, 1);
    const auto back = model_from_json(model_to_json(model));
    CHECK(back.A == model.A);
    CHECK(back.B == model.B);
    CHECK(back.K == model.K);
    const nlohmann::json wrapped = {{"model", model_to_json(model)}};
    CHECK(model_from_json(wrapped).D == model.D);

    auto broken = model_to_json(model);
    broken["A"] = nlohmann::json::array({{1.0}});
    CHECK_THROWS_AS(model_from_json(broken), FileError);
    CHECK_THROWS_AS(model_from_json(nlohmann::json::object()), FileError);
}

TEST_CASE("report schema") {
    Matrix A(2, 2), B(2, 1), C(1, 2), D(1, 1), K(2, 1);
    A << 1.2, -0.5, 1.0, 0.0;
    B << 1.0, 0.0;
    C << 0.5, 0.3;
    D << 0.2;
    K.setZero();
    const auto rec = generate_data({A, B, C, D, K}, prbs_input(60, 1, 4), Vector::Zero(2), 0.0, 4);
    PipelineConfig cfg;
    cfg.s = 5;
    cfg.grid = 3;
    const auto report = identify(rec, cfg);
    const auto j = report_to_json(report);
    for (const char* key : {"model", "x0_ide", "order", "variant", "rank_deficient", "lambda_opt",
                            "lambda_opt_normalized", "ide1_samples", "ide2_samples", "lambda_grid", "timings"}) {
        CAPTURE(key);
        CHECK(j.contains(key));
    }
    REQUIRE(j["lambda_grid"].size() == 3);
    for (const char* key : {"lambda", "lambda_normalized", "failed", "error", "J", "order", "sigma", "iterations",
                            "converged", "objective"}) {
        CAPTURE(key);
        CHECK(j["lambda_grid"][0].contains(key));
    }
    CHECK(j["timings"].contains("total_s"));
    CHECK(model_from_json(j).A == report.best.model.A);

    const auto c = config_to_json(cfg);
    CHECK(c["s"] == 5);
    CHECK(c["order"] == "auto");
    CHECK(c["admm"]["max_iter"] == cfg.admm.max_iter);
}

TEST_CASE("format_double keeps full precision") {
    const double v = 0.1 + 0.2;
    CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("atomic write replaces existing content") {
    const auto path = scratch("atomic.txt");
    write_file_atomic(path, "first");
    write_file_atomic(path, "second");
    std::ifstream in(path);
    std::string text;
    std::getline(in, text);
    CHECK(text == "second");
    CHECK_THROWS_AS(write_file_atomic(scratch("no_such_dir") / "x" / "y.txt", "z"), FileError);
}
