#ifndef ROOTCMA_HARNESS_PIPELINE_HPP
#define ROOTCMA_HARNESS_PIPELINE_HPP

// Seeded single runs and Monte Carlo sweeps of the full chain:
// synthesize -> preprocess -> roots -> DOA -> precondition -> optional CMA.

#include <rootcma/array_model.hpp>
#include <rootcma/cma.hpp>
#include <rootcma/dsft.hpp>
#include <rootcma/harness/config.hpp>
#include <rootcma/precond.hpp>
#include <rootcma/root_doa.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace rootcma::harness {

struct TrialRecord {
    int trial = 0;
    std::string status = "ok"; // "ok" or an error code name
    std::string message;

    // preprocessor / root stage
    std::optional<int> model_order;
    std::vector<real> angles_deg; // ascending
    std::optional<real> doa_error_deg;
    std::optional<real> final_mse;
    std::optional<long> converged_iteration;

    // normalized ascent
    std::vector<real> ascent_mode_response; // |V(e^{i mu_d})| at each true mode
    std::vector<real> ascent_angles_deg;
    std::vector<real> analytic_angles_deg;

    // soft-equalizer descent
    std::optional<real> avg_output_modulus;
    std::optional<real> avg_cost;

    bool ok() const noexcept { return status == "ok"; }
};

/// Figure data captured from trial 0.
struct FigureData {
    std::optional<CVector> precond_weights;
    std::vector<real> precond_mse;
    std::optional<RootSet> precond_roots;
    std::optional<CVector> ascent_weights;
    std::optional<RootSet> ascent_roots;
    std::vector<real> cma_modulus;
    std::vector<real> cma_cost;
    real spacing_ratio = 0.5;
};

struct Aggregate {
    int trials = 0;
    int failed = 0;
    std::optional<real> model_order_accuracy;
    std::optional<real> mean_abs_doa_error_deg;
    std::optional<real> median_abs_doa_error_deg;
    std::optional<real> p90_abs_doa_error_deg;
    std::optional<real> mean_avg_output_modulus;
    std::optional<real> mean_final_mse;
};

struct RunReport {
    ExperimentConfig config;
    std::vector<TrialRecord> trials;
    Aggregate aggregate;
    std::optional<FigureData> figures;
};

namespace detail {

inline std::optional<real> percentile(std::vector<real> v, real q)
{
    if (v.empty())
        return std::nullopt;
    std::sort(v.begin(), v.end());
    const real pos = q * static_cast<real>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<real>(lo));
}

inline std::optional<real> mean(const std::vector<real>& v)
{
    if (v.empty())
        return std::nullopt;
    real s = 0.0;
    for (real x : v)
        s += x;
    return s / static_cast<real>(v.size());
}

/// Mean absolute error between sorted estimates and sorted truth; only
/// defined when the counts agree.
inline std::optional<real> doa_error(std::vector<real> est, std::vector<real> truth)
{
    if (est.size() != truth.size() || est.empty())
        return std::nullopt;
    std::sort(est.begin(), est.end());
    std::sort(truth.begin(), truth.end());
    real s = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i)
        s += std::abs(est[i] - truth[i]);
    return s / static_cast<real>(est.size());
}

inline constexpr std::size_t mse_tail = 50;

} // namespace detail

/// Model-order accuracy counts every trial (failed ones as misses) when the
/// order was estimated at all.
inline Aggregate aggregate_trials(const std::vector<TrialRecord>& trials, int true_order, bool order_estimated)
{
    Aggregate agg;
    agg.trials = static_cast<int>(trials.size());
    std::vector<real> errors;
    std::vector<real> moduli;
    std::vector<real> mses;
    int correct = 0;
    for (const auto& t : trials) {
        if (!t.ok())
            ++agg.failed;
        if (t.model_order && *t.model_order == true_order)
            ++correct;
        if (t.doa_error_deg)
            errors.push_back(*t.doa_error_deg);
        if (t.avg_output_modulus)
            moduli.push_back(*t.avg_output_modulus);
        if (t.final_mse)
            mses.push_back(*t.final_mse);
    }
    if (order_estimated && !trials.empty())
        agg.model_order_accuracy = static_cast<real>(correct) / static_cast<real>(trials.size());
    agg.mean_abs_doa_error_deg = detail::mean(errors);
    agg.median_abs_doa_error_deg = detail::percentile(errors, 0.5);
    agg.p90_abs_doa_error_deg = detail::percentile(errors, 0.9);
    agg.mean_avg_output_modulus = detail::mean(moduli);
    agg.mean_final_mse = detail::mean(mses);
    return agg;
}

/// One trial of the configured pipeline. Module errors are recorded in the
/// returned record rather than thrown.
inline TrialRecord run_trial(const ExperimentConfig& cfg, int trial, FigureData* figures = nullptr)
{
    TrialRecord rec;
    rec.trial = trial;
    const auto& geo = cfg.scenario.geometry;
    const int m = geo.num_elements;
    const int d = cfg.scenario.num_sources();
    const auto truth = cfg.scenario.angles_deg();
    const bool preprocessor_on = cfg.flags.run_preprocessor;
    try {
        const auto data = synthesize_with_truth(cfg.scenario, static_cast<std::uint64_t>(trial));
        const auto& x = data.snapshots;
        std::optional<DoaEstimate> estimate;

        if (preprocessor_on) {
            const auto state = run_preprocessor(x, cfg.precond_gamma, cfg.precond_iterations);
            if (!state.mse_history.empty()) {
                const std::size_t tail = std::min(detail::mse_tail, state.mse_history.size());
                real s = 0.0;
                for (std::size_t i = state.mse_history.size() - tail; i < state.mse_history.size(); ++i)
                    s += state.mse_history[i];
                rec.final_mse = s / static_cast<real>(tail);
            }
            rec.converged_iteration = state.converged_iteration();
            if (figures) {
                figures->precond_weights = state.u;
                figures->precond_mse = state.mse_history;
            }
            auto roots = find_roots(build_polynomial(state.u, 1.0));
            roots = select_roots(std::move(roots), state.u, cfg.selection, cfg.selection_threshold);
            if (figures)
                figures->precond_roots = roots;
            rec.model_order = roots.model_order();
            auto doa = doa_from_roots(roots, geo);
            std::sort(doa.angles_deg.begin(), doa.angles_deg.end());
            rec.angles_deg = doa.angles_deg;
            rec.doa_error_deg = detail::doa_error(rec.angles_deg, truth);
            estimate = reconstruct_and_precondition(rec.angles_deg, geo);
        }

        if (cfg.flags.run_ascent) {
            const auto res = run_ascent_normalized(x, d, cfg.ascent_gamma, cfg.ascent_iterations);
            for (real a : truth)
                rec.ascent_mode_response.push_back(std::abs(beam_response(res.v, angular_frequency(geo, a))));
            const real target = static_cast<real>(m + d - 1);
            auto roots = find_roots(build_polynomial(res.v, target));
            // the D roots nearest the unit circle
            std::vector<std::size_t> order(roots.size());
            for (std::size_t i = 0; i < order.size(); ++i)
                order[i] = i;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return std::abs(roots.unit_distance[a]) < std::abs(roots.unit_distance[b]);
            });
            roots.selected.assign(roots.size(), false);
            for (int k = 0; k < d && k < static_cast<int>(order.size()); ++k)
                roots.selected[order[k]] = true;
            roots.beam_score.clear();
            for (const auto& z : roots.roots)
                roots.beam_score.push_back(beam_response(res.v, std::arg(z)).real());
            try {
                auto doa = doa_from_roots(roots, geo);
                std::sort(doa.angles_deg.begin(), doa.angles_deg.end());
                rec.ascent_angles_deg = doa.angles_deg;
            } catch (const Error&) {
                // leave empty; the raw roots still go to the figure data
            }
            if (cfg.flags.analytic_two_source) {
                const auto [z1, z2] = analytic_roots_two_sources(res.v[1]);
                for (const cplx z : {z1, z2}) {
                    const real ratio = std::arg(z) / (two_pi * geo.spacing_ratio);
                    if (ratio >= -1.0 && ratio <= 1.0)
                        rec.analytic_angles_deg.push_back(rad_to_deg(std::asin(ratio)));
                }
                std::sort(rec.analytic_angles_deg.begin(), rec.analytic_angles_deg.end());
            }
            if (figures) {
                figures->ascent_weights = res.v;
                figures->ascent_roots = roots;
            }
        }

        if (cfg.flags.run_cma_equalizer) {
            CVector init = CmaState::all_pass(m, cfg.cma_gamma).weights;
            if (cfg.cma_init == CmaInit::pseudoinverse) {
                if (!estimate || cfg.cma_user >= estimate->model_order)
                    throw Error(ErrorCode::empty_model, "cma.user does not index an estimated source");
                init = estimate->steering_weights.column(static_cast<std::size_t>(cfg.cma_user));
            }
            const auto res = run_descent_equalizer(x, cfg.cma_gamma, cfg.cma_iterations, init);
            rec.avg_output_modulus = res.avg_output_modulus;
            rec.avg_cost = res.avg_cost;
            if (figures) {
                figures->cma_modulus = res.modulus_history;
                figures->cma_cost = res.cost_history;
            }
        }
    } catch (const Error& err) {
        rec.status = to_string(err.code());
        rec.message = err.what();
    }
    return rec;
}

/// Runs every trial, up to `workers` at a time. Records are keyed by trial
/// index, so the result does not depend on scheduling.
inline RunReport run_pipeline(const ExperimentConfig& cfg)
{
    cfg.validate();
    RunReport report;
    report.config = cfg;
    report.trials.resize(static_cast<std::size_t>(cfg.trials));
    FigureData figures;
    figures.spacing_ratio = cfg.scenario.geometry.spacing_ratio;

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int t = next.fetch_add(1); t < cfg.trials; t = next.fetch_add(1))
            report.trials[static_cast<std::size_t>(t)] = run_trial(cfg, t, t == 0 ? &figures : nullptr);
    };
    const int nworkers = std::min(cfg.workers, cfg.trials);
    if (nworkers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < nworkers; ++i)
            pool.emplace_back(worker);
    }
    report.figures = std::move(figures);
    report.aggregate = aggregate_trials(report.trials, cfg.scenario.num_sources(), cfg.flags.run_preprocessor);
    return report;
}

// ---------------------------------------------------------------------------
// Output

enum class FigureKind { beam, roots, learning, deviation };

inline const char* to_string(FigureKind k) noexcept
{
    switch (k) {
    case FigureKind::beam: return "beam";
    case FigureKind::roots: return "roots";
    case FigureKind::learning: return "learning";
    case FigureKind::deviation: return "deviation";
    }
    return "unknown";
}

namespace detail {

inline std::filesystem::path write_text(const std::filesystem::path& dir, const std::string& name,
                                        const std::function<void(std::ostream&)>& body)
{
    std::filesystem::create_directories(dir);
    const auto path = dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::config, "cannot write '" + path.string() + "'");
    body(f);
    return path;
}

} // namespace detail

/// Writes the CSV files for one figure kind from trial 0's data.
inline std::vector<std::filesystem::path> emit_figure_data(const RunReport& report, FigureKind which,
                                                           const std::filesystem::path& dir)
{
    if (report.trials.empty() || !report.figures)
        throw Error(ErrorCode::stage_not_run, "report is empty");
    const auto& fig = *report.figures;
    std::vector<std::filesystem::path> out;
    switch (which) {
    case FigureKind::beam:
        if (fig.precond_weights)
            out.push_back(detail::write_text(dir, "beam_precond.csv", [&](std::ostream& os) {
                BeamResponseGrid::evaluate(*fig.precond_weights, fig.spacing_ratio).write_csv(os);
            }));
        if (fig.ascent_weights)
            out.push_back(detail::write_text(dir, "beam_ascent.csv", [&](std::ostream& os) {
                BeamResponseGrid::evaluate(*fig.ascent_weights, fig.spacing_ratio).write_csv(os);
            }));
        break;
    case FigureKind::roots:
        if (fig.precond_roots)
            out.push_back(detail::write_text(dir, "roots_precond.csv",
                                             [&](std::ostream& os) { fig.precond_roots->write_csv(os); }));
        if (fig.ascent_roots)
            out.push_back(detail::write_text(dir, "roots_ascent.csv",
                                             [&](std::ostream& os) { fig.ascent_roots->write_csv(os); }));
        break;
    case FigureKind::learning:
        if (fig.precond_weights)
            out.push_back(detail::write_text(dir, "learning_precond.csv",
                                             [&](std::ostream& os) { write_mse_csv(os, fig.precond_mse); }));
        if (!fig.cma_modulus.empty())
            out.push_back(detail::write_text(dir, "learning_cma.csv", [&](std::ostream& os) {
                write_cma_learning_csv(os, fig.cma_modulus, fig.cma_cost);
            }));
        break;
    case FigureKind::deviation:
        if (fig.precond_roots)
            out.push_back(detail::write_text(dir, "deviation.csv",
                                             [&](std::ostream& os) { fig.precond_roots->write_deviation_csv(os); }));
        break;
    }
    if (out.empty())
        throw Error(ErrorCode::stage_not_run,
                    std::string("no pipeline stage produced data for '") + to_string(which) + "'");
    return out;
}

namespace detail {

inline std::string fmt_real(real v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_opt(const std::optional<real>& v) { return v ? fmt_real(*v) : std::string{}; }

inline std::string fmt_list(const std::vector<real>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            s += ';';
        s += fmt_real(v[i]);
    }
    return s;
}

inline nlohmann::ordered_json opt_json(const std::optional<real>& v)
{
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

} // namespace detail

inline nlohmann::ordered_json to_json(const TrialRecord& t)
{
    nlohmann::ordered_json j;
    j["trial"] = t.trial;
    j["status"] = t.status;
    j["message"] = t.message;
    j["model_order"] = t.model_order ? nlohmann::ordered_json(*t.model_order) : nlohmann::ordered_json(nullptr);
    j["angles_deg"] = t.angles_deg;
    j["doa_error_deg"] = detail::opt_json(t.doa_error_deg);
    j["final_mse"] = detail::opt_json(t.final_mse);
    j["converged_iteration"] =
        t.converged_iteration ? nlohmann::ordered_json(*t.converged_iteration) : nlohmann::ordered_json(nullptr);
    j["ascent_mode_response"] = t.ascent_mode_response;
    j["ascent_angles_deg"] = t.ascent_angles_deg;
    j["analytic_angles_deg"] = t.analytic_angles_deg;
    j["avg_output_modulus"] = detail::opt_json(t.avg_output_modulus);
    j["avg_cost"] = detail::opt_json(t.avg_cost);
    return j;
}

inline nlohmann::ordered_json to_json(const Aggregate& a)
{
    nlohmann::ordered_json j;
    j["trials"] = a.trials;
    j["failed"] = a.failed;
    j["model_order_accuracy"] = detail::opt_json(a.model_order_accuracy);
    j["mean_abs_doa_error_deg"] = detail::opt_json(a.mean_abs_doa_error_deg);
    j["median_abs_doa_error_deg"] = detail::opt_json(a.median_abs_doa_error_deg);
    j["p90_abs_doa_error_deg"] = detail::opt_json(a.p90_abs_doa_error_deg);
    j["mean_avg_output_modulus"] = detail::opt_json(a.mean_avg_output_modulus);
    j["mean_final_mse"] = detail::opt_json(a.mean_final_mse);
    return j;
}

inline nlohmann::ordered_json to_json(const DoaEstimate& est)
{
    nlohmann::ordered_json j;
    j["model_order"] = est.model_order;
    j["angles_deg"] = est.angles_deg;
    auto matrix = [](const ComplexMatrix& mtx) {
        nlohmann::ordered_json cols = nlohmann::ordered_json::array();
        for (std::size_t c = 0; c < mtx.cols(); ++c) {
            nlohmann::ordered_json col = nlohmann::ordered_json::array();
            for (std::size_t r = 0; r < mtx.rows(); ++r)
                col.push_back({mtx(r, c).real(), mtx(r, c).imag()});
            cols.push_back(col);
        }
        return cols;
    };
    j["response_matrix"] = matrix(est.response_matrix);
    j["steering_weights"] = matrix(est.steering_weights);
    return j;
}

inline const char* trials_csv_header =
    "trial,status,model_order,angles_deg,doa_error_deg,final_mse,converged_iteration,"
    "ascent_mode_response,ascent_angles_deg,analytic_angles_deg,avg_output_modulus,avg_cost,message\n";

/// Writes per-trial records and the aggregate summary. Returns written paths.
inline std::vector<std::filesystem::path> write_report(const RunReport& report, const std::filesystem::path& dir,
                                                       OutputFormat format)
{
    std::vector<std::filesystem::path> out;
    if (format == OutputFormat::json) {
        out.push_back(detail::write_text(dir, "trials.json", [&](std::ostream& os) {
            nlohmann::ordered_json arr = nlohmann::ordered_json::array();
            for (const auto& t : report.trials)
                arr.push_back(to_json(t));
            os << arr.dump(2) << '\n';
        }));
        out.push_back(detail::write_text(dir, "summary.json", [&](std::ostream& os) {
            os << to_json(report.aggregate).dump(2) << '\n';
        }));
        return out;
    }
    out.push_back(detail::write_text(dir, "trials.csv", [&](std::ostream& os) {
        os << trials_csv_header;
        for (const auto& t : report.trials) {
            std::string msg = t.message;
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            os << t.trial << ',' << t.status << ',' << (t.model_order ? std::to_string(*t.model_order) : "") << ','
               << detail::fmt_list(t.angles_deg) << ',' << detail::fmt_opt(t.doa_error_deg) << ','
               << detail::fmt_opt(t.final_mse) << ','
               << (t.converged_iteration ? std::to_string(*t.converged_iteration) : "") << ','
               << detail::fmt_list(t.ascent_mode_response) << ',' << detail::fmt_list(t.ascent_angles_deg) << ','
               << detail::fmt_list(t.analytic_angles_deg) << ',' << detail::fmt_opt(t.avg_output_modulus) << ','
               << detail::fmt_opt(t.avg_cost) << ',' << msg << '\n';
        }
    }));
    out.push_back(detail::write_text(dir, "summary.csv", [&](std::ostream& os) {
        const auto& a = report.aggregate;
        os << "trials,failed,model_order_accuracy,mean_abs_doa_error_deg,median_abs_doa_error_deg,"
              "p90_abs_doa_error_deg,mean_avg_output_modulus,mean_final_mse\n";
        os << a.trials << ',' << a.failed << ',' << detail::fmt_opt(a.model_order_accuracy) << ','
           << detail::fmt_opt(a.mean_abs_doa_error_deg) << ',' << detail::fmt_opt(a.median_abs_doa_error_deg) << ','
           << detail::fmt_opt(a.p90_abs_doa_error_deg) << ',' << detail::fmt_opt(a.mean_avg_output_modulus) << ','
           << detail::fmt_opt(a.mean_final_mse) << '\n';
    }));
    return out;
}

/// Process exit code for a finished run: 0 all trials ok, 3 every trial
/// failed, 4 some trials failed.
inline int exit_code_for(const RunReport& report) noexcept
{
    if (report.aggregate.failed == 0)
        return 0;
    return report.aggregate.failed == report.aggregate.trials ? 3 : 4;
}

} // namespace rootcma::harness

#endif // ROOTCMA_HARNESS_PIPELINE_HPP
