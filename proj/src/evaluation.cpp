#include "hts/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "hts/errors.hpp"
#include "hts/log.hpp"
#include "parallel.hpp"

namespace hts {

double mase(std::span<const double> actual, std::span<const double> forecast, std::span<const double> insample,
            int s) {
    if (actual.size() != forecast.size() || actual.empty())
        throw data_error("LengthMismatch", fmt::format("actual has {} points, forecast {}", actual.size(),
                                                       forecast.size()));
    const std::size_t lag = s > 1 ? static_cast<std::size_t>(s) : 1;
    if (insample.size() <= lag)
        throw data_error("SeriesTooShort",
                         fmt::format("MASE scale needs more than {} in-sample points, got {}", lag, insample.size()));
    double scale = 0.0;
    for (std::size_t t = lag; t < insample.size(); ++t) scale += std::abs(insample[t] - insample[t - lag]);
    scale /= static_cast<double>(insample.size() - lag);
    if (!(scale > 0.0))
        throw data_error("ZeroDenominator", "in-sample series is exactly (seasonally) constant; MASE undefined");
    double err = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) err += std::abs(forecast[i] - actual[i]);
    return err / static_cast<double>(actual.size()) / scale;
}

double rmse(std::span<const double> actual, std::span<const double> forecast) {
    if (actual.size() != forecast.size() || actual.empty())
        throw data_error("LengthMismatch", fmt::format("actual has {} points, forecast {}", actual.size(),
                                                       forecast.size()));
    double ss = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) ss += (forecast[i] - actual[i]) * (forecast[i] - actual[i]);
    return std::sqrt(ss / static_cast<double>(actual.size()));
}

std::string display_name(Method m) {
    switch (m) {
        case Method::Baseline: return "Baseline";
        case Method::BottomUp: return "Bottom-up";
        case Method::OLS: return "OLS";
        case Method::WLS: return "WLS";
        case Method::MinTSample: return "MinT-sample";
        case Method::MinTShrink: return "MinT";
    }
    return "Baseline";
}

std::string config_name(Method m) {
    switch (m) {
        case Method::Baseline: return "baseline";
        case Method::BottomUp: return "bottom-up";
        case Method::OLS: return "ols";
        case Method::WLS: return "wls";
        case Method::MinTSample: return "mint-sample";
        case Method::MinTShrink: return "mint-shrink";
    }
    return "baseline";
}

Method parse_method(const std::string& name) {
    if (name == "baseline") return Method::Baseline;
    if (name == "bottom-up" || name == "bottomup") return Method::BottomUp;
    if (name == "ols") return Method::OLS;
    if (name == "wls") return Method::WLS;
    if (name == "mint-sample") return Method::MinTSample;
    if (name == "mint-shrink" || name == "mint") return Method::MinTShrink;
    throw config_error("UnknownMethod", fmt::format("unknown reconciliation method '{}'", name));
}

TransformPolicy::Kind parse_transform(const std::string& name) {
    if (name == "none") return TransformPolicy::Kind::None;
    if (name == "log") return TransformPolicy::Kind::Log;
    if (name == "auto" || name == "auto-lambda") return TransformPolicy::Kind::AutoLambda;
    throw config_error("UnknownTransform", fmt::format("unknown transform policy '{}'", name));
}

std::string to_string(TransformPolicy::Kind kind) {
    switch (kind) {
        case TransformPolicy::Kind::None: return "none";
        case TransformPolicy::Kind::Log: return "log";
        case TransformPolicy::Kind::AutoLambda: return "auto-lambda";
    }
    return "none";
}

std::vector<double> seasonal_naive_forecast(std::span<const double> y, int s, int h) {
    const auto lag = static_cast<std::size_t>(std::max(1, s));
    if (y.size() < lag)
        throw data_error("SeriesTooShort", fmt::format("seasonal naive needs {} points, got {}", lag, y.size()));
    std::vector<double> out(static_cast<std::size_t>(h));
    const std::size_t T = y.size();
    for (std::size_t k = 1; k <= out.size(); ++k) {
        const std::size_t back = lag * ((k + lag - 1) / lag);
        out[k - 1] = y[T + k - 1 - back];
    }
    return out;
}

namespace {

NodeDiagnostics fallback_node(NodeDiagnostics d, const TimeSeries& y, int h, const std::string& reason) {
    d.fallback = true;
    d.notes.push_back("fallback to seasonal naive: " + reason);
    int s = y.period();
    if (y.size() <= static_cast<std::size_t>(s)) s = 1;
    d.order.reset();
    d.criteria.reset();
    d.ljung_box.reset();
    d.lambda.reset();
    d.forecast = seasonal_naive_forecast(y.values(), s, h);
    d.residuals.clear();
    const auto lag = static_cast<std::size_t>(s);
    for (std::size_t t = lag; t < y.size(); ++t) d.residuals.push_back(y[t] - y[t - lag]);
    d.model_residuals = d.residuals;
    return d;
}

NodeDiagnostics process_node(const SeriesKey& key, const TimeSeries& y, const ForecastSettings& settings) {
    NodeDiagnostics d;
    d.key = key;
    const int h = settings.horizon;
    const double shift = settings.transform.shift;

    TimeSeries z = y;
    bool transformed = false;
    double lambda = 1.0;
    if (settings.transform.kind != TransformPolicy::Kind::None) {
        std::vector<double> shifted(y.data());
        for (double& v : shifted) v += shift;
        const TimeSeries ys = y.with_values(std::move(shifted));
        try {
            lambda = settings.transform.kind == TransformPolicy::Kind::Log ? 0.0 : select_lambda(ys).lambda;
            z = box_cox(ys, {lambda});
            transformed = true;
            d.lambda = lambda;
        } catch (const Error& e) {
            d.notes.push_back(fmt::format("transform skipped ({}): {}", e.code(), e.what()));
        }
    }

    try {
        SearchConfig cfg = settings.search;
        cfg.jobs = 1;
        const auto found = auto_select(z, y.period(), cfg);
        for (const auto& w : found.warnings) d.notes.push_back(w);
        d.order = found.best.order;
        d.criteria = found.best_criteria;
        if (found.best_ljung_box.lags_tested > 0) d.ljung_box = found.best_ljung_box;
        d.candidates = found.candidates.size();

        const auto zf = forecast(found.best, z, h);
        const auto ez = found.best.residuals.data();
        d.model_residuals = ez;
        auto back = [&](double v) {
            if (!transformed) return v;
            if (lambda != 0.0 && !(lambda * v + 1.0 > 0.0))
                throw numerical_error("DomainViolation", "back-transformation undefined for a forecast or fitted value");
            return inv_box_cox_value(v, lambda) - shift;
        };
        d.forecast.resize(zf.size());
        std::transform(zf.begin(), zf.end(), d.forecast.begin(), back);
        // Original-unit residuals: actual minus back-transformed one-step fit.
        const std::size_t offset = y.size() - ez.size();
        d.residuals.resize(ez.size());
        for (std::size_t i = 0; i < ez.size(); ++i) d.residuals[i] = y[offset + i] - back(z[offset + i] - ez[i]);
        for (double v : d.forecast)
            if (!std::isfinite(v)) throw numerical_error("NonFiniteForecast", "forecast is not finite");
    } catch (const Error& e) {
        return fallback_node(std::move(d), y, h, fmt::format("{}: {}", e.code(), e.what()));
    }
    return d;
}

}  // namespace

BaseRun produce_base_forecasts(const GroupStructure& structure, const std::vector<TimeSeries>& training,
                               const ForecastSettings& settings) {
    if (training.size() != structure.nodes.size())
        throw config_error("DimensionMismatch", fmt::format("{} series for {} nodes", training.size(),
                                                            structure.nodes.size()));
    if (settings.horizon < 1)
        throw config_error("InvalidHorizon", fmt::format("horizon must be >= 1, got {}", settings.horizon));

    for (const auto& y : training) {
        const SarimaOrder simplest{0, 0, 0, 0, 0, 0, y.period()};
        const auto feas = check_feasibility(simplest, y.size());
        if (!feas.feasible_for_fit)
            throw config_error("NoFeasibleModel",
                               fmt::format("training span too short for any model: SARIMA{} {}", simplest.to_string(),
                                           feas.describe_violation(y.size(), true)));
    }

    BaseRun run;
    run.nodes.resize(training.size());
    detail::parallel_for(training.size(), settings.jobs, [&](std::size_t i) {
        run.nodes[i] = process_node(structure.nodes[i], training[i], settings);
    });

    run.base.values.resize(static_cast<Eigen::Index>(run.nodes.size()), settings.horizon);
    std::vector<std::vector<double>> resid;
    resid.reserve(run.nodes.size());
    for (std::size_t i = 0; i < run.nodes.size(); ++i) {
        for (int k = 0; k < settings.horizon; ++k)
            run.base.values(static_cast<Eigen::Index>(i), k) = run.nodes[i].forecast[static_cast<std::size_t>(k)];
        resid.push_back(run.nodes[i].residuals);
    }
    run.residuals = ResidualMatrix::from_aligned_tails(resid);
    return run;
}

const ReportRow* EvaluationReport::find(const std::string& node, const std::string& method) const {
    for (const auto& r : rows)
        if (r.node == node && r.method == method) return &r;
    return nullptr;
}

MethodOutput apply_method(Method method, const BaseForecasts& base, const SummingMatrix& S,
                          const ResidualMatrix& residuals) {
    MethodOutput out{method, {}, std::nullopt};
    switch (method) {
        case Method::Baseline: out.forecasts = base.values; break;
        case Method::BottomUp: out.forecasts = bottom_up(base, S).values; break;
        case Method::OLS:
            out.weights = ols_weights(static_cast<std::size_t>(S.entries.rows()));
            out.forecasts = reconcile(base, S, *out.weights).values;
            break;
        case Method::WLS:
            out.weights = estimate_weights(residuals, WeightKind::WLS);
            out.forecasts = reconcile(base, S, *out.weights).values;
            break;
        case Method::MinTSample:
            out.weights = estimate_weights(residuals, WeightKind::MinTSample);
            out.forecasts = reconcile(base, S, *out.weights).values;
            break;
        case Method::MinTShrink:
            out.weights = estimate_weights(residuals, WeightKind::MinTShrink);
            out.forecasts = reconcile(base, S, *out.weights).values;
            break;
    }
    return out;
}

Evaluation evaluate_forecasts(const GroupStructure& structure, const SummingMatrix& S,
                              const std::vector<TimeSeries>& training, const Eigen::MatrixXd& actual,
                              const BaseForecasts& base, const ResidualMatrix& residuals,
                              const std::vector<Method>& methods, const std::vector<bool>& flagged_nodes) {
    if (methods.empty()) throw config_error("NoMethods", "at least one method is required");
    const auto nodes = structure.nodes.size();
    if (actual.rows() != static_cast<Eigen::Index>(nodes) || actual.cols() != base.values.cols())
        throw config_error("DimensionMismatch", "actual values do not match the base forecast shape");

    std::vector<Method> ordered(methods);
    std::sort(ordered.begin(), ordered.end());
    ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());

    Evaluation ev;
    ev.report.horizon = static_cast<int>(base.values.cols());
    ev.report.train_length = training.empty() ? 0 : training.front().size();
    for (std::size_t i = 0; i < std::min<std::size_t>(3, nodes); ++i)
        ev.report.summary_nodes.push_back(structure.nodes[i].label(structure.schema));

    for (Method m : ordered) {
        auto out = apply_method(m, base, S, residuals);
        for (std::size_t i = 0; i < nodes; ++i) {
            const auto row_i = static_cast<Eigen::Index>(i);
            std::vector<double> a(static_cast<std::size_t>(actual.cols())), f(a.size());
            for (Eigen::Index k = 0; k < actual.cols(); ++k) {
                a[static_cast<std::size_t>(k)] = actual(row_i, k);
                f[static_cast<std::size_t>(k)] = out.forecasts(row_i, k);
            }
            ReportRow r;
            r.key = structure.nodes[i];
            r.node = structure.nodes[i].label(structure.schema);
            r.level = structure.nodes[i].level();
            r.method = display_name(m);
            r.horizon = ev.report.horizon;
            r.flagged = i < flagged_nodes.size() && flagged_nodes[i];
            r.rmse = rmse(a, f);
            try {
                r.mase = mase(a, f, training[i].values(), training[i].period());
            } catch (const Error&) {
                r.mase = std::numeric_limits<double>::quiet_NaN();
            }
            ev.report.rows.push_back(std::move(r));
        }
        ev.outputs.push_back(std::move(out));
    }
    return ev;
}

JobResult evaluate_job(const GroupStructure& structure, const SummingMatrix& S, const std::vector<TimeSeries>& series,
                       std::size_t train_length, const std::vector<Method>& methods, const ForecastSettings& settings) {
    if (series.size() != structure.nodes.size())
        throw config_error("DimensionMismatch", "one series per structure node is required");
    const auto h = static_cast<std::size_t>(std::max(settings.horizon, 0));
    if (series.empty() || train_length < 1 || train_length + h > series.front().size())
        throw config_error("InvalidSplit",
                           fmt::format("training length {} plus horizon {} exceeds the {} available periods",
                                       train_length, h, series.empty() ? 0 : series.front().size()));

    std::vector<TimeSeries> training;
    training.reserve(series.size());
    Eigen::MatrixXd actual(static_cast<Eigen::Index>(series.size()), static_cast<Eigen::Index>(h));
    for (std::size_t i = 0; i < series.size(); ++i) {
        training.push_back(series[i].slice(0, train_length));
        for (std::size_t k = 0; k < h; ++k)
            actual(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = series[i][train_length + k];
    }

    JobResult job;
    job.base_run = produce_base_forecasts(structure, training, settings);
    std::vector<bool> flagged(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) flagged[i] = job.base_run.nodes[i].fallback;
    job.evaluation =
        evaluate_forecasts(structure, S, training, actual, job.base_run.base, job.base_run.residuals, methods, flagged);
    return job;
}

}  // namespace hts
