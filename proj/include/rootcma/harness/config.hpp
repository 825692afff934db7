#ifndef ROOTCMA_HARNESS_CONFIG_HPP
#define ROOTCMA_HARNESS_CONFIG_HPP

// Experiment configuration: flat `dotted.key = value` text, one entry per
// line, `#` starts a comment. Unknown or repeated keys are rejected.

#include <rootcma/array_model.hpp>
#include <rootcma/core.hpp>
#include <rootcma/precond.hpp>
#include <rootcma/root_doa.hpp>

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace rootcma::harness {

enum class OutputFormat { csv, json };
enum class CmaInit { all_pass, pseudoinverse };

struct PipelineFlags {
    bool run_preprocessor = true;
    bool run_ascent = false;
    bool run_cma_equalizer = false;
    bool analytic_two_source = false;
};

struct ExperimentConfig {
    Scenario scenario;
    PipelineFlags flags;

    GammaPolicy precond_gamma;
    long precond_iterations = 1000;
    SelectionMode selection = SelectionMode::beam_response;
    real selection_threshold = default_beam_threshold;

    real cma_gamma = 1e-3;
    long cma_iterations = 8000;
    CmaInit cma_init = CmaInit::all_pass;
    int cma_user = 0;

    real ascent_gamma = 1e-4;
    long ascent_iterations = 8000;

    int trials = 1;
    int workers = 1;
    std::string output_dir = "out";
    OutputFormat format = OutputFormat::csv;

    void validate() const
    {
        try {
            scenario.validate();
        } catch (const Error& err) {
            throw Error(ErrorCode::config, std::string("scenario: ") + err.what());
        }
        auto fail = [](const std::string& field, const std::string& why) {
            throw Error(ErrorCode::config, field + ": " + why);
        };
        if (trials < 1)
            fail("run.trials", "must be at least 1");
        if (workers < 1)
            fail("run.workers", "must be at least 1");
        if (precond_iterations < 0)
            fail("precond.iterations", "must be non-negative");
        if (cma_iterations < 0)
            fail("cma.iterations", "must be non-negative");
        if (ascent_iterations < 0)
            fail("ascent.iterations", "must be non-negative");
        if (!(precond_gamma.gamma >= 0.0))
            fail("precond.gamma", "must be non-negative");
        if (!(precond_gamma.epsilon >= 0.0))
            fail("precond.epsilon", "must be non-negative");
        if (!(cma_gamma >= 0.0))
            fail("cma.gamma", "must be non-negative");
        if (!(ascent_gamma >= 0.0))
            fail("ascent.gamma", "must be non-negative");
        if (!(selection_threshold > 0.0))
            fail("precond.threshold", "must be positive");
        if (flags.analytic_two_source && scenario.num_sources() != 2)
            fail("pipeline.analytic_two_source", "requires exactly two sources");
        if (flags.analytic_two_source && !flags.run_ascent)
            fail("pipeline.analytic_two_source", "requires pipeline.run_ascent");
        if (cma_init == CmaInit::pseudoinverse && !flags.run_preprocessor)
            fail("cma.init", "pseudoinverse initialization requires pipeline.run_preprocessor");
        if (cma_user < 0)
            fail("cma.user", "must be non-negative");
    }
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline real parse_real(const std::string& text)
{
    const std::string t = trim(text);
    if (t == "inf" || t == "+inf" || t == "infinity")
        return std::numeric_limits<real>::infinity();
    if (t.empty())
        throw std::invalid_argument("empty number");
    char* end = nullptr;
    errno = 0;
    const real v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
        throw std::invalid_argument("not a finite number: '" + t + "'");
    return v;
}

inline long parse_integer(const std::string& text)
{
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE)
        throw std::invalid_argument("not an integer: '" + t + "'");
    return v;
}

inline bool parse_bool(const std::string& text)
{
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on")
        return true;
    if (t == "false" || t == "0" || t == "no" || t == "off")
        return false;
    throw std::invalid_argument("not a boolean: '" + t + "'");
}

inline std::vector<real> parse_real_list(const std::string& text)
{
    std::vector<real> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_real(item));
    if (out.empty())
        throw std::invalid_argument("empty list");
    return out;
}

} // namespace detail

inline ExperimentConfig parse_config(const std::string& text, const std::string& source_name = "<config>")
{
    ExperimentConfig cfg;
    std::vector<real> angles;
    std::vector<real> amplitudes;
    bool threshold_given = false;

    using Setter = std::function<void(const std::string&)>;
    const std::map<std::string, Setter> setters = {
        {"scenario.geometry.m", [&](const std::string& v) { cfg.scenario.geometry.num_elements = static_cast<int>(detail::parse_integer(v)); }},
        {"scenario.geometry.spacing_ratio", [&](const std::string& v) { cfg.scenario.geometry.spacing_ratio = detail::parse_real(v); }},
        {"scenario.sources.angles_deg", [&](const std::string& v) { angles = detail::parse_real_list(v); }},
        {"scenario.sources.amplitudes", [&](const std::string& v) { amplitudes = detail::parse_real_list(v); }},
        {"scenario.snr_db", [&](const std::string& v) { cfg.scenario.snr_db = detail::parse_real(v); }},
        {"scenario.num_snapshots", [&](const std::string& v) { cfg.scenario.num_snapshots = static_cast<int>(detail::parse_integer(v)); }},
        {"scenario.seed", [&](const std::string& v) {
             const long s = detail::parse_integer(v);
             if (s < 0)
                 throw std::invalid_argument("seed must be non-negative");
             cfg.scenario.seed = static_cast<std::uint64_t>(s);
         }},
        {"pipeline.run_preprocessor", [&](const std::string& v) { cfg.flags.run_preprocessor = detail::parse_bool(v); }},
        {"pipeline.run_ascent", [&](const std::string& v) { cfg.flags.run_ascent = detail::parse_bool(v); }},
        {"pipeline.run_cma_equalizer", [&](const std::string& v) { cfg.flags.run_cma_equalizer = detail::parse_bool(v); }},
        {"pipeline.analytic_two_source", [&](const std::string& v) { cfg.flags.analytic_two_source = detail::parse_bool(v); }},
        {"precond.gamma_mode", [&](const std::string& v) {
             const auto t = detail::trim(v);
             if (t == "adaptive")
                 cfg.precond_gamma.mode = GammaMode::adaptive;
             else if (t == "fixed")
                 cfg.precond_gamma.mode = GammaMode::fixed;
             else
                 throw std::invalid_argument("expected adaptive|fixed");
         }},
        {"precond.gamma", [&](const std::string& v) { cfg.precond_gamma.gamma = detail::parse_real(v); }},
        {"precond.epsilon", [&](const std::string& v) { cfg.precond_gamma.epsilon = detail::parse_real(v); }},
        {"precond.iterations", [&](const std::string& v) { cfg.precond_iterations = detail::parse_integer(v); }},
        {"precond.selection", [&](const std::string& v) {
             const auto t = detail::trim(v);
             if (t == "beam_response")
                 cfg.selection = SelectionMode::beam_response;
             else if (t == "unit_distance")
                 cfg.selection = SelectionMode::unit_distance;
             else
                 throw std::invalid_argument("expected beam_response|unit_distance");
         }},
        {"precond.threshold", [&](const std::string& v) {
             cfg.selection_threshold = detail::parse_real(v);
             threshold_given = true;
         }},
        {"cma.gamma", [&](const std::string& v) { cfg.cma_gamma = detail::parse_real(v); }},
        {"cma.iterations", [&](const std::string& v) { cfg.cma_iterations = detail::parse_integer(v); }},
        {"cma.init", [&](const std::string& v) {
             const auto t = detail::trim(v);
             if (t == "all_pass")
                 cfg.cma_init = CmaInit::all_pass;
             else if (t == "pseudoinverse")
                 cfg.cma_init = CmaInit::pseudoinverse;
             else
                 throw std::invalid_argument("expected all_pass|pseudoinverse");
         }},
        {"cma.user", [&](const std::string& v) { cfg.cma_user = static_cast<int>(detail::parse_integer(v)); }},
        {"ascent.gamma", [&](const std::string& v) { cfg.ascent_gamma = detail::parse_real(v); }},
        {"ascent.iterations", [&](const std::string& v) { cfg.ascent_iterations = detail::parse_integer(v); }},
        {"run.trials", [&](const std::string& v) { cfg.trials = static_cast<int>(detail::parse_integer(v)); }},
        {"run.workers", [&](const std::string& v) { cfg.workers = static_cast<int>(detail::parse_integer(v)); }},
        {"output.dir", [&](const std::string& v) { cfg.output_dir = detail::trim(v); }},
        {"output.format", [&](const std::string& v) {
             const auto t = detail::trim(v);
             if (t == "csv")
                 cfg.format = OutputFormat::csv;
             else if (t == "json")
                 cfg.format = OutputFormat::json;
             else
                 throw std::invalid_argument("expected csv|json");
         }},
    };

    std::map<std::string, int> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const std::string where = source_name + ":" + std::to_string(lineno) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::config, where + "expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end())
            throw Error(ErrorCode::config, where + "unknown key '" + key + "'");
        if (auto prev = seen.find(key); prev != seen.end())
            throw Error(ErrorCode::config, where + "key '" + key + "' already set on line " + std::to_string(prev->second));
        seen[key] = lineno;
        try {
            it->second(value);
        } catch (const std::invalid_argument& err) {
            throw Error(ErrorCode::config, where + key + ": " + err.what());
        }
    }

    if (angles.empty())
        throw Error(ErrorCode::config, source_name + ": scenario.sources.angles_deg is required");
    if (!amplitudes.empty() && amplitudes.size() != angles.size())
        throw Error(ErrorCode::config, source_name + ": scenario.sources.amplitudes must match angles_deg in length");
    cfg.scenario.sources.clear();
    for (std::size_t i = 0; i < angles.size(); ++i)
        cfg.scenario.sources.push_back({angles[i], amplitudes.empty() ? 1.0 : amplitudes[i]});
    if (!threshold_given && cfg.selection == SelectionMode::unit_distance)
        cfg.selection_threshold = default_unit_distance_threshold;

    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw Error(ErrorCode::config, "cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_config(buf.str(), path);
}

} // namespace rootcma::harness

#endif // ROOTCMA_HARNESS_CONFIG_HPP
