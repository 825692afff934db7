// rootcma: command-line experiment runner.
//
//   rootcma simulate     --config cfg.txt   synthesize snapshots only
//   rootcma precondition --config cfg.txt   LMS preprocessor + learning curve
//   rootcma roots        --config cfg.txt   preprocessor, roots, model order, DOA
//   rootcma cma          --config cfg.txt   CMA stages (equalizer / ascent)
//   rootcma sweep        --config cfg.txt   full configured pipeline, all figures
//
// Exit codes: 0 success, 2 config error, 3 numeric failure, 4 partial-trial
// failures.

#include <rootcma/harness/config.hpp>
#include <rootcma/harness/pipeline.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace rootcma;
using namespace rootcma::harness;

namespace {

constexpr int exit_config = 2;
constexpr int exit_numeric = 3;

struct Overrides {
    std::string config_path;
    std::optional<long> seed;
    std::optional<int> trials;
    std::optional<std::string> out;
    std::optional<std::string> format;
    std::optional<int> workers;
};

ExperimentConfig resolve(const Overrides& o)
{
    auto cfg = load_config(o.config_path);
    if (o.seed) {
        if (*o.seed < 0)
            throw Error(ErrorCode::config, "--seed must be non-negative");
        cfg.scenario.seed = static_cast<std::uint64_t>(*o.seed);
    }
    if (o.trials)
        cfg.trials = *o.trials;
    if (o.out)
        cfg.output_dir = *o.out;
    if (o.workers)
        cfg.workers = *o.workers;
    if (o.format) {
        if (*o.format == "csv")
            cfg.format = OutputFormat::csv;
        else if (*o.format == "json")
            cfg.format = OutputFormat::json;
        else
            throw Error(ErrorCode::config, "--format must be csv or json");
    }
    cfg.validate();
    return cfg;
}

// Timestamps live only here so every other output is reproducible.
void write_metadata(const fs::path& dir, const std::string& verb, const Overrides& o)
{
    fs::create_directories(dir);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[64];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    nlohmann::ordered_json j;
    j["verb"] = verb;
    j["config"] = o.config_path;
    j["created_utc"] = stamp;
    std::ofstream(dir / "meta.json") << j.dump(2) << '\n';
}

void write_snapshots(const ExperimentConfig& cfg, const fs::path& dir)
{
    fs::create_directories(dir);
    const auto x = synthesize(cfg.scenario, 0);
    std::ofstream f(dir / "snapshots.csv", std::ios::binary);
    f << "snapshot,element,re,im\n";
    char buf[128];
    for (std::size_t n = 0; n < x.num_snapshots(); ++n)
        for (std::size_t m = 0; m < x.num_elements(); ++m) {
            const auto z = x.entries(m, n);
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", n, m, z.real(), z.imag());
            f << buf;
        }
}

void emit_all_available(const RunReport& report, const fs::path& dir,
                        std::initializer_list<FigureKind> kinds)
{
    for (auto kind : kinds) {
        try {
            emit_figure_data(report, kind, dir);
        } catch (const Error& err) {
            if (err.code() != ErrorCode::stage_not_run)
                throw;
        }
    }
}

void print_summary(const RunReport& report)
{
    const auto& a = report.aggregate;
    std::cout << "trials: " << a.trials << "  failed: " << a.failed << '\n';
    auto show = [](const char* name, const std::optional<real>& v) {
        if (v)
            std::printf("%-26s %.6g\n", name, *v);
    };
    show("model_order_accuracy", a.model_order_accuracy);
    show("mean_abs_doa_error_deg", a.mean_abs_doa_error_deg);
    show("mean_avg_output_modulus", a.mean_avg_output_modulus);
    show("mean_final_mse", a.mean_final_mse);
    if (!report.trials.empty() && !report.trials.front().angles_deg.empty()) {
        std::cout << "trial 0 angles_deg:";
        for (real v : report.trials.front().angles_deg)
            std::printf(" %.4f", v);
        std::cout << '\n';
    }
    for (const auto& t : report.trials)
        if (!t.ok())
            std::cerr << "trial " << t.trial << " failed: " << t.message << '\n';
}

int run_verb(const std::string& verb, const Overrides& o)
{
    ExperimentConfig cfg = resolve(o);
    const fs::path dir = cfg.output_dir;

    if (verb == "simulate") {
        write_snapshots(cfg, dir);
        write_metadata(dir, verb, o);
        std::cout << "wrote " << (dir / "snapshots.csv").string() << '\n';
        return 0;
    }
    if (verb == "precondition" || verb == "roots") {
        cfg.flags = PipelineFlags{};
        cfg.flags.run_preprocessor = true;
    } else if (verb == "cma") {
        cfg.flags.run_cma_equalizer = true;
        cfg.flags.run_preprocessor = cfg.cma_init == CmaInit::pseudoinverse;
    }
    cfg.validate();

    const auto report = run_pipeline(cfg);
    write_report(report, dir, cfg.format);
    if (verb == "precondition") {
        emit_all_available(report, dir, {FigureKind::learning});
        if (report.figures && report.figures->precond_weights)
            harness::detail::write_text(dir, "weights_precond.csv",
                               [&](std::ostream& os) { write_weights_csv(os, *report.figures->precond_weights); });
    } else if (verb == "roots") {
        emit_all_available(report, dir, {FigureKind::roots, FigureKind::deviation, FigureKind::beam});
    } else if (verb == "cma") {
        emit_all_available(report, dir, {FigureKind::learning, FigureKind::beam, FigureKind::roots});
    } else {
        emit_all_available(report, dir,
                           {FigureKind::beam, FigureKind::roots, FigureKind::learning, FigureKind::deviation});
    }
    write_metadata(dir, verb, o);
    print_summary(report);
    return exit_code_for(report);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Root constant-modulus array experiments"};
    app.require_subcommand(1);

    Overrides o;
    std::string verb;
    for (const char* name : {"simulate", "precondition", "roots", "cma", "sweep"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", o.config_path, "experiment config file")->required();
        sub->add_option("--seed", o.seed, "override scenario.seed");
        sub->add_option("--trials", o.trials, "override run.trials");
        sub->add_option("--out", o.out, "override output.dir");
        sub->add_option("--format", o.format, "csv or json");
        sub->add_option("--workers", o.workers, "concurrent trials");
        sub->callback([&verb, name]() { verb = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_config;
    }

    try {
        return run_verb(verb, o);
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return err.code() == ErrorCode::config ? exit_config : exit_numeric;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return exit_numeric;
    }
}
