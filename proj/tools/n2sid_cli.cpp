// Command-line front end of the n2sid library.

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "n2sid/io.hpp"
#include "n2sid/pipeline.hpp"

using namespace n2sid;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumeric = 1;
constexpr int kExitUsage = 2;

struct IdentifyArgs {
    std::string data;
    std::optional<Index> inputs, outputs;
    Index s = 15;
    double lambda_min = 0.031622776601683794;
    double lambda_max = 1000.0;
    int grid = 20;
    std::string variant = "m1";
    std::string order = "auto";
    int max_order = 10;
    std::string split = "none";
    Index del = 0;
    bool detrend = true;
    bool scale_outputs = false;
    std::optional<Index> n_ide;
    std::vector<Index> n_ide_list;
    std::optional<Index> n_val;
    std::string x0 = "ls";
    std::string report, sv_csv, vaf_csv;
    std::uint64_t seed = 0;
    bool output_only = false;
    bool cold_start = false;
    bool m2_scaled = false;
};

struct SimulateArgs {
    std::string model, example, out;
    Index samples = 500;
    std::uint64_t seed = 1;
    double noise_std = 0.0;
    std::string input = "prbs";
};

struct ValidateArgs {
    std::string report, data;
    std::string x0 = "ls";
    Index del = 0;
    bool detrend = false;
};

unsigned thread_cap() {
    if (const char* env = std::getenv("N2SID_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    return 1;
}

PipelineConfig make_config(const IdentifyArgs& a) {
    PipelineConfig cfg;
    cfg.s = a.s;
    cfg.lambda_min = a.lambda_min;
    cfg.lambda_max = a.lambda_max;
    cfg.grid = a.grid;
    cfg.variant = parse_variant(a.variant);
    if (a.order == "auto") {
        cfg.order = 0;
    } else {
        try {
            std::size_t used = 0;
            cfg.order = std::stoi(a.order, &used);
            if (used != a.order.size() || cfg.order < 1) throw std::invalid_argument("order");
        } catch (const std::exception&) {
            throw DimensionError("--order expects 'auto' or a positive integer, got '" + a.order + "'");
        }
    }
    cfg.max_order = a.max_order;
    cfg.split = parse_split(a.split);
    cfg.del = a.del;
    cfg.detrend = a.detrend;
    cfg.scale_outputs = a.scale_outputs;
    cfg.x0_policy = parse_x0_policy(a.x0);
    cfg.warm_start = !a.cold_start;
    cfg.threads = thread_cap();
    cfg.m2_scaled = a.m2_scaled;
    cfg.validate();
    return cfg;
}

/// Offset removal and optional scaling of one slice (deletion has already happened).
IoRecord condition(const IoRecord& rec, const PipelineConfig& cfg) {
    PipelineConfig c = cfg;
    c.del = 0;
    return preprocess(rec, c);
}

double validation_vaf(const IdentifiedModel& model, const IoRecord& val, X0Policy policy, Vector* per_output) {
    Matrix yhat;
    if (model.model.m() == 0) {
        const Vector x0 = policy == X0Policy::zero ? Vector::Zero(model.observer.n()) : estimate_x0(model.observer, val);
        yhat = predict_observer(model.observer, val, x0);
    } else {
        yhat = simulate_with_policy(model.model, val, policy);
    }
    if (per_output != nullptr) *per_output = vaf_per_output(val.y, yhat);
    return vaf(val.y, yhat);
}

int run_identify(const IdentifyArgs& a) {
    const PipelineConfig cfg = make_config(a);

    std::optional<CsvLayout> layout;
    if (a.inputs || a.outputs) {
        if (!a.inputs || !a.outputs) throw DimensionError("--inputs and --outputs must be given together");
        layout = CsvLayout{*a.inputs, *a.outputs};
    }
    IoRecord raw = read_csv(a.data, layout ? &*layout : nullptr);
    if (a.output_only) raw.u = Matrix::Zero(raw.samples(), 0);
    require(raw.samples() > a.del, "--del removes every sample");
    const IoRecord body = raw.slice(a.del, raw.samples() - a.del);

    std::vector<Index> lengths = a.n_ide_list;
    if (a.n_ide) lengths.push_back(*a.n_ide);
    std::sort(lengths.begin(), lengths.end());
    lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());
    const Index n_val = a.n_val.value_or(0);
    if (lengths.empty()) lengths.push_back(body.samples() - n_val);
    const Index max_ide = lengths.back();
    require(lengths.front() > cfg.s, "identification length must exceed s");
    require(max_ide + n_val <= body.samples(),
            "data has " + std::to_string(body.samples()) + " samples after --del, need " +
                std::to_string(max_ide + n_val));
    if (!a.vaf_csv.empty() && n_val == 0) throw DimensionError("--vaf-csv needs a validation set (--n-val)");

    std::optional<IoRecord> val;
    if (n_val > 0) val = condition(body.slice(max_ide, n_val), cfg);

    const auto run = [&](Index n_ide) {
        const IoRecord ide = condition(body.slice(0, n_ide), cfg);
        return a.output_only ? identify_output_only(ide.y, cfg) : identify(ide, cfg);
    };

    json sweep = json::array();
    std::string vaf_rows = "n_ide,vaf,order,lambda_normalized\n";
    PipelineReport main_report;
    for (Index n_ide : lengths) {
        PipelineReport rep = run(n_ide);
        if (val) {
            rep.vaf_validation = validation_vaf(rep.best, *val, cfg.x0_policy, nullptr);
            vaf_rows += std::to_string(n_ide) + "," + format_double(*rep.vaf_validation) + "," +
                        std::to_string(rep.best.order) + "," + format_double(rep.lambda_opt_normalized) + "\n";
        }
        sweep.push_back({{"n_ide", n_ide},
                         {"order", rep.best.order},
                         {"lambda_opt_normalized", rep.lambda_opt_normalized},
                         {"vaf", rep.vaf_validation ? json(*rep.vaf_validation) : json(nullptr)}});
        if (n_ide == (a.n_ide ? *a.n_ide : max_ide)) main_report = std::move(rep);
    }

    json out = report_to_json(main_report);
    out["tool"] = {{"name", "n2sid"}, {"version", N2SID_VERSION}};
    out["config"] = config_to_json(cfg);
    out["config"]["output_only"] = a.output_only;
    out["config"]["seed"] = a.seed;
    out["data"] = {{"path", a.data},
                   {"samples", raw.samples()},
                   {"inputs", raw.inputs()},
                   {"outputs", raw.outputs()},
                   {"n_ide", main_report.ide1_samples + (cfg.split == Split::half ? main_report.ide2_samples : 0)},
                   {"n_val", n_val}};
    if (val) {
        Vector per;
        const double total = validation_vaf(main_report.best, *val, cfg.x0_policy, &per);
        json per_j = json::array();
        for (Index i = 0; i < per.size(); ++i) per_j.push_back(per(i));
        out["validation"] = {{"vaf", total},
                             {"vaf_per_output", per_j},
                             {"x0", to_string(cfg.x0_policy)},
                             {"samples", val->samples()},
                             {"method", main_report.best.model.m() == 0 ? "prediction" : "simulation"}};
    } else {
        out["validation"] = nullptr;
    }
    out["n_ide_sweep"] = lengths.size() > 1 ? sweep : json::array();

    if (!a.sv_csv.empty()) {
        Index width = 0;
        for (const auto& pt : main_report.points) width = std::max(width, pt.sigma.size());
        std::string text = "lambda_normalized,lambda";
        for (Index k = 0; k < width; ++k) text += ",sigma" + std::to_string(k + 1);
        text += "\n";
        for (const auto& pt : main_report.points) {
            text += format_double(pt.lambda_normalized) + "," + format_double(pt.lambda);
            for (Index k = 0; k < width; ++k) text += "," + (k < pt.sigma.size() ? format_double(pt.sigma(k)) : "nan");
            text += "\n";
        }
        write_file_atomic(a.sv_csv, text);
    }
    if (!a.vaf_csv.empty()) write_file_atomic(a.vaf_csv, vaf_rows);

    const std::string dumped = out.dump(2) + "\n";
    if (a.report.empty()) {
        std::cout << dumped;
    } else {
        write_file_atomic(a.report, dumped);
        std::cout << "order " << main_report.best.order << ", lambda/N " << main_report.lambda_opt_normalized;
        if (main_report.vaf_validation) std::cout << ", validation VAF " << *main_report.vaf_validation;
        std::cout << "\n";
    }
    return kExitOk;
}

StateSpaceModel example_model(const std::string& id) {
    if (id == "siso2") {
        Matrix A(2, 2), B(2, 1), C(1, 2), D(1, 1), K(2, 1);
        A << 1.2, -0.5, 1.0, 0.0;
        B << 1.0, 0.0;
        C << 0.5, 0.3;
        D << 0.2;
        K << 0.3, 0.1;
        return {A, B, C, D, K};
    }
    if (id == "mimo2") {
        Matrix A(3, 3), B(3, 2), C(2, 3), D(2, 2), K(3, 2);
        A << 0.7, 0.2, 0.0, -0.2, 0.7, 0.0, 0.0, 0.0, -0.5;
        B << 1.0, 0.0, 0.0, 1.0, 0.5, -0.5;
        C << 1.0, 0.0, 1.0, 0.0, 1.0, -0.5;
        D << 0.1, 0.0, 0.0, 0.0;
        K << 0.2, 0.0, 0.0, 0.2, 0.1, 0.1;
        return {A, B, C, D, K};
    }
    if (id == "ar1") {
        return {Matrix::Constant(1, 1, 0.8), Matrix::Zero(1, 0), Matrix::Constant(1, 1, 1.0), Matrix::Zero(1, 0),
                Matrix::Constant(1, 1, 0.5)};
    }
    throw DimensionError("unknown example '" + id + "' (expected siso2, mimo2 or ar1)");
}

int run_simulate(const SimulateArgs& a) {
    if (a.model.empty() == a.example.empty()) throw DimensionError("give exactly one of --model or --example");
    const StateSpaceModel model = a.model.empty() ? example_model(a.example) : model_from_json(read_json(a.model));
    require(a.samples >= 1, "--samples must be positive");
    require(a.noise_std >= 0.0, "--noise-std must be nonnegative");

    Matrix u;
    if (a.input == "prbs") {
        u = prbs_input(a.samples, model.m(), a.seed);
    } else if (a.input == "gaussian") {
        u = gaussian_input(a.samples, model.m(), a.seed);
    } else {
        throw DimensionError("--input must be prbs or gaussian");
    }
    // Separate streams for input and noise so changing one does not shift the other.
    const IoRecord rec = generate_data(model, u, Vector::Zero(model.n()), a.noise_std, a.seed + 0x9e3779b97f4a7c15ULL);
    if (a.out.empty()) {
        std::cout << format_csv(rec);
    } else {
        write_csv(a.out, rec);
    }
    return kExitOk;
}

int run_validate(const ValidateArgs& a) {
    const json report = read_json(a.report);
    const StateSpaceModel model = model_from_json(report);
    const CsvLayout layout{model.m(), model.p()};
    IoRecord raw;
    try {
        raw = read_csv(a.data, nullptr);
    } catch (const FileError&) {
        raw = read_csv(a.data, &layout);
    }
    if (raw.inputs() != model.m() || raw.outputs() != model.p()) {
        throw DimensionError("data has " + std::to_string(raw.inputs()) + " inputs and " +
                             std::to_string(raw.outputs()) + " outputs, model expects " +
                             std::to_string(model.m()) + " and " + std::to_string(model.p()));
    }
    PipelineConfig cfg;
    cfg.s = 1;
    cfg.del = a.del;
    cfg.detrend = a.detrend;
    require(raw.samples() > a.del, "--del removes every sample");
    IoRecord val = raw.slice(a.del, raw.samples() - a.del);
    if (a.detrend) val = condition(val, cfg);

    IdentifiedModel im;
    im.model = model;
    im.observer = to_observer(model);
    Vector per;
    const double total = validation_vaf(im, val, parse_x0_policy(a.x0), &per);
    for (Index i = 0; i < per.size(); ++i) std::cout << "vaf y" << (i + 1) << " " << format_double(per(i)) << "\n";
    std::cout << "vaf total " << format_double(total) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nuclear norm subspace identification"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("n2sid ") + N2SID_VERSION);

    IdentifyArgs ia;
    auto* identify_cmd = app.add_subcommand("identify", "Identify a state-space model from a CSV record");
    identify_cmd->add_option("--data", ia.data, "CSV with columns u1..um,y1..yp")->required();
    identify_cmd->add_option("--inputs", ia.inputs, "Number of input columns");
    identify_cmd->add_option("--outputs", ia.outputs, "Number of output columns");
    identify_cmd->add_option("--s", ia.s, "Block rows of the Hankel matrices")->capture_default_str();
    identify_cmd->add_option("--lambda-min", ia.lambda_min, "Smallest lambda / N_ide")->capture_default_str();
    identify_cmd->add_option("--lambda-max", ia.lambda_max, "Largest lambda / N_ide")->capture_default_str();
    identify_cmd->add_option("--grid", ia.grid, "Number of lambda grid points")->capture_default_str();
    identify_cmd->add_option("--variant", ia.variant, "m1, m2 or m3")->capture_default_str();
    identify_cmd->add_option("--order", ia.order, "auto or a fixed order")->capture_default_str();
    identify_cmd->add_option("--max-order", ia.max_order, "Cap on the selected order")->capture_default_str();
    identify_cmd->add_option("--split", ia.split, "none or half")->capture_default_str();
    identify_cmd->add_option("--del", ia.del, "Samples discarded at the start")->capture_default_str();
    identify_cmd->add_flag("--detrend,!--no-detrend", ia.detrend, "Remove channel means (default on)");
    identify_cmd->add_flag("--scale-outputs", ia.scale_outputs, "Scale each output to unit max-abs");
    identify_cmd->add_option("--n-ide", ia.n_ide, "Identification length after --del");
    identify_cmd->add_option("--n-ide-list", ia.n_ide_list, "Several identification lengths")->delimiter(',');
    identify_cmd->add_option("--n-val", ia.n_val, "Validation length, taken after the longest identification set");
    identify_cmd->add_option("--x0", ia.x0, "Initial state for evaluation: zero or ls")->capture_default_str();
    identify_cmd->add_option("--report", ia.report, "JSON report path (stdout if omitted)");
    identify_cmd->add_option("--sv-csv", ia.sv_csv, "Per-lambda singular values");
    identify_cmd->add_option("--vaf-csv", ia.vaf_csv, "Validation VAF per identification length");
    identify_cmd->add_option("--seed", ia.seed, "Recorded in the report; identification is deterministic");
    identify_cmd->add_flag("--output-only", ia.output_only, "Ignore inputs and identify from outputs alone");
    identify_cmd->add_flag("--cold-start", ia.cold_start, "Solve lambda points independently (N2SID_THREADS workers)");
    identify_cmd->add_flag("--m2-scaled", ia.m2_scaled, "Scale the M2 state sequence by sqrt(sigma)");

    SimulateArgs sa;
    auto* simulate_cmd = app.add_subcommand("simulate", "Generate synthetic innovation-form data");
    simulate_cmd->add_option("--model", sa.model, "Model JSON (a report or a bare model)");
    simulate_cmd->add_option("--example", sa.example, "Built-in model: siso2, mimo2 or ar1");
    simulate_cmd->add_option("--samples", sa.samples, "Number of samples")->capture_default_str();
    simulate_cmd->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
    simulate_cmd->add_option("--noise-std", sa.noise_std, "Innovation standard deviation")->capture_default_str();
    simulate_cmd->add_option("--input", sa.input, "prbs or gaussian")->capture_default_str();
    simulate_cmd->add_option("--out", sa.out, "Output CSV (stdout if omitted)");

    ValidateArgs va;
    auto* validate_cmd = app.add_subcommand("validate", "VAF of a reported model on a held-out record");
    validate_cmd->add_option("--report", va.report, "Report written by identify")->required();
    validate_cmd->add_option("--data", va.data, "Validation CSV")->required();
    validate_cmd->add_option("--x0", va.x0, "zero or ls")->capture_default_str();
    validate_cmd->add_option("--del", va.del, "Samples discarded at the start")->capture_default_str();
    validate_cmd->add_flag("--detrend,!--no-detrend", va.detrend, "Remove channel means (default off)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*identify_cmd) return run_identify(ia);
        if (*simulate_cmd) return run_simulate(sa);
        if (*validate_cmd) return run_validate(va);
    } catch (const NumericalError& e) {
        std::cerr << "n2sid: numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DimensionError& e) {
        std::cerr << "n2sid: " << e.what() << "\n";
        return kExitUsage;
    } catch (const FileError& e) {
        std::cerr << "n2sid: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "n2sid: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}
