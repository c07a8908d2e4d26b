// Command-line front end for grouped sales forecasting.
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "hts/diagnostics.hpp"
#include "hts/errors.hpp"
#include "hts/evaluation.hpp"
#include "hts/pipeline.hpp"
#include "hts/reconciliation.hpp"
#include "hts/sarima.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::string methods;
    std::optional<double> shift;
    std::optional<unsigned> jobs;
};

std::vector<hts::Method> parse_method_list(const std::string& text) {
    std::vector<hts::Method> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(hts::parse_method(item));
    if (out.empty()) throw hts::config_error("NoMethods", "--methods lists no method");
    return out;
}

hts::JobConfig configure(const std::string& path, const Overrides& o) {
    auto config = hts::load_config(path);
    if (o.seed) config.seed = *o.seed;
    if (!o.methods.empty()) config.methods = parse_method_list(o.methods);
    if (o.shift) config.transform.shift = *o.shift;
    if (o.jobs) config.jobs = std::max(1U, *o.jobs);
    return config;
}

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--seed", o.seed, "Random seed (overrides the config)");
    cmd->add_option("--methods", o.methods, "Comma-separated methods, e.g. baseline,bottom-up,ols,wls,mint");
    cmd->add_option("--shift", o.shift, "Constant added before transforming");
    cmd->add_option("--jobs", o.jobs, "Nodes processed concurrently");
}

int ingest_check(const std::string& config_path, const std::string& data_path, const Overrides& o) {
    const auto config = configure(config_path, o);
    const auto data = hts::load_dataset(config, data_path);
    std::map<std::size_t, std::size_t> per_level;
    for (const auto& k : data.structure.nodes) ++per_level[k.level()];
    json levels = json::object();
    for (const auto& [level, count] : per_level) levels[std::to_string(level)] = count;
    json doc{{"records", data.records},
             {"weeks", data.weeks},
             {"nodes", data.structure.nodes.size()},
             {"bottom_series", data.structure.bottom.size()},
             {"nodes_per_level", levels},
             {"calendar_origin", hts::format_iso_date(config.calendar.origin())},
             {"training_weeks", config.training_length(data.weeks)}};
    std::cout << doc.dump(2) << '\n';
    return 0;
}

std::vector<double> read_single_series(const std::string& path, const std::string& column) {
    std::ifstream in(path);
    if (!in) throw hts::data_error("EmptyFile", fmt::format("cannot open '{}'", path));
    std::vector<double> values;
    std::string line;
    std::optional<std::size_t> col;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) {
            const auto a = f.find_first_not_of(" \t\r\"");
            const auto b = f.find_last_not_of(" \t\r\"");
            fields.push_back(a == std::string::npos ? std::string() : f.substr(a, b - a + 1));
        }
        if (!col) {
            // Header row: pick the named column, else the last one.
            const auto it = std::find(fields.begin(), fields.end(), column);
            col = it != fields.end() ? static_cast<std::size_t>(it - fields.begin()) : fields.size() - 1;
            char* end = nullptr;
            std::strtod(fields[*col].c_str(), &end);
            if (it != fields.end() || end != fields[*col].c_str() + fields[*col].size()) continue;
        }
        if (*col >= fields.size())
            throw hts::data_error("BadRow", fmt::format("line {}: missing value column", line_no));
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(fields[*col], &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != fields[*col].size() || !std::isfinite(v))
            throw hts::data_error("BadQuantity", fmt::format("line {}: '{}' is not a number", line_no, fields[*col]));
        values.push_back(v);
    }
    if (values.empty()) throw hts::data_error("EmptyFile", fmt::format("'{}' has no observations", path));
    return values;
}

hts::SarimaOrder parse_order(const std::string& text, int s) {
    std::vector<int> v;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            v.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw hts::config_error("InvalidOrder", fmt::format("bad --order '{}'", text));
        }
    }
    if (v.size() != 3 && v.size() != 6)
        throw hts::config_error("InvalidOrder", "--order expects p,d,q or p,d,q,P,D,Q");
    hts::SarimaOrder o{v[0], v[1], v[2], 0, 0, 0, s};
    if (v.size() == 6) {
        o.P = v[3];
        o.D = v[4];
        o.Q = v[5];
    }
    o.validate();
    return o;
}

struct FitArgs {
    std::string data;
    std::string column = "value";
    int period = 1;
    std::string order = "auto";
    std::string transform = "none";
    int horizon = 4;
    std::string criterion = "aicc";
};

int fit_single(const FitArgs& a, const Overrides& o) {
    const auto raw = read_single_series(a.data, a.column);
    const hts::TimeSeries y(raw, a.period);
    const double shift = o.shift.value_or(0.0);
    const auto kind = hts::parse_transform(a.transform);

    hts::TimeSeries z = y;
    std::optional<hts::BoxCoxParam> lam;
    if (kind != hts::TransformPolicy::Kind::None) {
        std::vector<double> shifted(raw);
        for (double& v : shifted) v += shift;
        const hts::TimeSeries ys = y.with_values(shifted);
        lam = kind == hts::TransformPolicy::Kind::Log ? hts::BoxCoxParam{0.0} : hts::select_lambda(ys);
        z = hts::box_cox(ys, *lam);
    }

    json doc;
    hts::FittedModel model;
    hts::CriteriaSet criteria;
    hts::LjungBoxResult lb;
    if (a.order == "auto") {
        hts::SearchConfig cfg;
        cfg.criterion = hts::parse_criterion(a.criterion);
        cfg.jobs = o.jobs.value_or(1);
        auto found = hts::auto_select(z, a.period, cfg);
        model = found.best;
        criteria = found.best_criteria;
        lb = found.best_ljung_box;
        doc["candidates"] = found.candidates.size();
        doc["warnings"] = found.warnings;
    } else {
        const auto order = parse_order(a.order, a.period);
        model = hts::fit(z, order, hts::default_intercept(order));
        criteria = hts::information_criteria(model.log_likelihood, hts::criteria_parameter_count(model),
                                             model.effective_n());
        const int lags = hts::default_ljung_box_lags(model.effective_n(), a.period, order.arma_terms());
        if (lags > order.arma_terms()) lb = hts::ljung_box(model.residuals.values(), lags, order.arma_terms());
    }
    auto fc = hts::forecast(model, z, a.horizon);
    if (lam)
        for (double& v : fc) v = hts::inv_box_cox_value(v, lam->lambda) - shift;

    const auto& c = model.coeffs;
    doc["order"] = model.order.to_string();
    doc["lambda"] = lam ? json(lam->lambda) : json(nullptr);
    doc["converged"] = model.converged;
    doc["coefficients"] = {{"phi", c.phi},
                           {"theta", c.theta},
                           {"seasonal_phi", c.seasonal_phi},
                           {"seasonal_theta", c.seasonal_theta},
                           {"intercept", model.has_intercept ? json(c.intercept) : json(nullptr)},
                           {"sigma2", c.sigma2}};
    doc["log_likelihood"] = model.log_likelihood;
    doc["criteria"] = {{"aic", criteria.aic}, {"aicc", criteria.aicc}, {"bic", criteria.bic}, {"k", criteria.k},
                       {"n", criteria.n}};
    doc["ljung_box"] = {{"q_star", lb.q_star}, {"lags", lb.lags_tested}, {"dof", lb.dof}, {"p_value", lb.p_value}};
    doc["forecast"] = fc;
    std::cout << doc.dump(2) << '\n';
    return 0;
}

int reconcile_cmd(const std::string& config_path, const std::string& base_path, const std::string& resid_path,
                  const std::string& out_dir, const Overrides& o) {
    const auto config = configure(config_path, o);
    std::vector<hts::SeriesKey> bottom;
    for (const auto& k : hts::read_forecast_keys(base_path, config.schema))
        if (k.level() == config.schema.size()) bottom.push_back(k);
    const auto structure = hts::build_structure(config.schema, config.levels, bottom);
    const auto S = hts::build_summing_matrix(structure);
    const auto base = hts::read_forecasts_csv(base_path, structure, "Baseline");

    bool needs_residuals = false;
    for (auto m : config.methods)
        needs_residuals = needs_residuals || m == hts::Method::WLS || m == hts::Method::MinTSample ||
                          m == hts::Method::MinTShrink;
    hts::ResidualMatrix residuals;
    if (needs_residuals) {
        if (resid_path.empty())
            throw hts::config_error("MissingResiduals", "WLS and MinT need --residuals");
        residuals = hts::read_residuals_csv(resid_path, structure);
    }

    std::vector<hts::Method> methods(config.methods);
    std::sort(methods.begin(), methods.end());
    methods.erase(std::unique(methods.begin(), methods.end()), methods.end());
    std::vector<hts::MethodOutput> outputs;
    for (auto m : methods) outputs.push_back(hts::apply_method(m, base, S, residuals));
    fs::create_directories(out_dir);
    hts::write_forecasts_csv(fs::path(out_dir) / "forecasts.csv", structure, outputs);
    return 0;
}

int simulate_cmd(const std::string& config_path, const std::string& out_path, int weeks, const Overrides& o) {
    const auto config = configure(config_path, o);
    if (weeks < 1) {
        if (!config.calendar.weeks) throw hts::config_error("InvalidConfig", "--weeks or calendar.weeks is required");
        weeks = *config.calendar.weeks;
    }
    const auto sales = hts::synthetic_sales(config, weeks, config.seed);
    if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
    hts::write_sales_csv(out_path, config.schema, sales);
    return 0;
}

int report_error(const std::string& code, const std::string& category, const std::string& message, int exit_code) {
    json doc{{"error", code}, {"category", category}, {"message", message}, {"exit_code", exit_code}};
    std::cerr << doc.dump() << '\n';
    return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grouped sales forecasting with SARIMA base models and forecast reconciliation"};
    app.require_subcommand(1);
    Overrides o;
    std::string config_path, data_path, out_dir = "out", base_path, resid_path;

    auto* ingest = app.add_subcommand("ingest-check", "Parse and aggregate a sales file, print a summary");
    ingest->add_option("--config", config_path, "Job config (JSON)")->required();
    ingest->add_option("--data", data_path, "Sales CSV")->required();
    add_common(ingest, o);

    FitArgs fa;
    auto* fitc = app.add_subcommand("fit", "Fit one series (CSV of values) and forecast it");
    fitc->add_option("--data", fa.data, "CSV with one value per row")->required();
    fitc->add_option("--column", fa.column, "Value column name");
    fitc->add_option("--period", fa.period, "Seasonal period");
    fitc->add_option("--order", fa.order, "p,d,q[,P,D,Q] or auto");
    fitc->add_option("--transform", fa.transform, "none, log or auto");
    fitc->add_option("--horizon", fa.horizon, "Forecast steps");
    fitc->add_option("--criterion", fa.criterion, "aic, aicc or bic");
    add_common(fitc, o);

    auto* fc = app.add_subcommand("forecast", "Forecast every node past the end of the data");
    fc->add_option("--config", config_path, "Job config (JSON)")->required();
    fc->add_option("--data", data_path, "Sales CSV")->required();
    fc->add_option("--out-dir", out_dir, "Output directory");
    add_common(fc, o);

    auto* rec = app.add_subcommand("reconcile", "Reconcile precomputed base forecasts");
    rec->add_option("--config", config_path, "Job config (JSON)")->required();
    rec->add_option("--base", base_path, "Base forecasts CSV (Baseline rows)")->required();
    rec->add_option("--residuals", resid_path, "Residuals CSV (node,offset,residual)");
    rec->add_option("--out-dir", out_dir, "Output directory");
    add_common(rec, o);

    auto* ev = app.add_subcommand("evaluate", "Holdout evaluation of every configured method");
    ev->add_option("--config", config_path, "Job config (JSON)")->required();
    ev->add_option("--data", data_path, "Sales CSV")->required();
    ev->add_option("--out-dir", out_dir, "Output directory");
    add_common(ev, o);

    int weeks = 0;
    std::string sim_out = "sales.csv";
    auto* sim = app.add_subcommand("simulate", "Write a synthetic sales CSV for the config schema");
    sim->add_option("--config", config_path, "Job config (JSON)")->required();
    sim->add_option("--weeks", weeks, "Number of weeks (default: calendar.weeks)");
    sim->add_option("--out", sim_out, "Output CSV path");
    add_common(sim, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return report_error("UsageError", "config", e.what(), 2);
    }

    try {
        if (*ingest) return ingest_check(config_path, data_path, o);
        if (*fitc) return fit_single(fa, o);
        if (*fc) {
            hts::run_forecast(configure(config_path, o), data_path, out_dir);
            return 0;
        }
        if (*rec) return reconcile_cmd(config_path, base_path, resid_path, out_dir, o);
        if (*ev) {
            hts::run_evaluate(configure(config_path, o), data_path, out_dir);
            return 0;
        }
        if (*sim) return simulate_cmd(config_path, sim_out, weeks, o);
    } catch (const hts::Error& e) {
        const int code = static_cast<int>(e.category());
        const char* category = e.category() == hts::ErrorCategory::Config ? "config"
                               : e.category() == hts::ErrorCategory::Data ? "data"
                                                                           : "numerical";
        return report_error(e.code(), category, e.what(), code);
    } catch (const fs::filesystem_error& e) {
        return report_error("FilesystemError", "data", e.what(), 3);
    } catch (const std::exception& e) {
        return report_error("InternalError", "numerical", e.what(), 4);
    }
    return 0;
}
