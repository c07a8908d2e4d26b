#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hts/diagnostics.hpp"
#include "hts/grouping.hpp"
#include "hts/reconciliation.hpp"
#include "hts/sarima.hpp"

namespace hts {

/// Mean absolute error over the test points, scaled by the in-sample
/// (seasonal) naive MAE of `insample`. The seasonal scale is used when s > 1.
/// Throws ZeroDenominator, SeriesTooShort, LengthMismatch.
[[nodiscard]] double mase(std::span<const double> actual, std::span<const double> forecast,
                          std::span<const double> insample, int s);

[[nodiscard]] double rmse(std::span<const double> actual, std::span<const double> forecast);

enum class Method { Baseline, BottomUp, OLS, WLS, MinTSample, MinTShrink };

/// Display name used in reports: Baseline, Bottom-up, OLS, WLS, MinT-sample, MinT.
[[nodiscard]] std::string display_name(Method m);
/// Config spelling: baseline, bottom-up, ols, wls, mint-sample, mint-shrink (alias mint).
[[nodiscard]] Method parse_method(const std::string& name);
[[nodiscard]] std::string config_name(Method m);

struct TransformPolicy {
    enum class Kind { None, Log, AutoLambda };
    Kind kind = Kind::None;
    double shift = 0.0;  ///< added before transforming, subtracted after inverting
};

[[nodiscard]] TransformPolicy::Kind parse_transform(const std::string& name);
[[nodiscard]] std::string to_string(TransformPolicy::Kind kind);

/// Per-node record of the identify / estimate / diagnose / forecast loop.
struct NodeDiagnostics {
    SeriesKey key;
    std::optional<double> lambda;  ///< Box-Cox power applied, if any
    std::optional<SarimaOrder> order;
    std::optional<CriteriaSet> criteria;
    std::optional<LjungBoxResult> ljung_box;
    std::size_t candidates = 0;
    bool fallback = false;  ///< seasonal-naive substitute used
    std::vector<std::string> notes;
    std::vector<double> forecast;   ///< original units
    std::vector<double> residuals;  ///< original units, aligned to the end of training
    std::vector<double> model_residuals;  ///< modelling scale, for Q-Q / ACF output
};

struct BaseRun {
    BaseForecasts base;
    ResidualMatrix residuals;
    std::vector<NodeDiagnostics> nodes;  ///< structure order
};

struct ForecastSettings {
    int horizon = 4;
    TransformPolicy transform;
    SearchConfig search;
    unsigned jobs = 1;  ///< nodes processed concurrently
};

/// Fits each node's training series and forecasts `horizon` steps ahead.
/// Failing nodes fall back to the seasonal naive forecast with a note.
[[nodiscard]] BaseRun produce_base_forecasts(const GroupStructure& structure, const std::vector<TimeSeries>& training,
                                             const ForecastSettings& settings);

/// Forecast for one node when modelling failed: y_{T+k-s*ceil(k/s)} (naive for s = 1).
[[nodiscard]] std::vector<double> seasonal_naive_forecast(std::span<const double> y, int s, int h);

struct ReportRow {
    SeriesKey key;
    std::string node;
    std::size_t level = 0;  ///< number of bound attributes
    std::string method;
    double mase = 0.0;  ///< NaN when the in-sample scale is zero
    double rmse = 0.0;
    int horizon = 0;
    bool flagged = false;
};

struct EvaluationReport {
    std::vector<ReportRow> rows;  ///< method-major, structure order within a method
    std::size_t train_length = 0;
    int horizon = 0;
    std::string train_end;   ///< label of the last training period
    std::string test_start;  ///< label of the first test period
    std::vector<std::string> summary_nodes;  ///< the three most aggregated nodes

    [[nodiscard]] const ReportRow* find(const std::string& node, const std::string& method) const;
};

struct MethodOutput {
    Method method;
    Eigen::MatrixXd forecasts;  ///< nodes x h
    std::optional<WeightSpec> weights;
};

struct Evaluation {
    EvaluationReport report;
    std::vector<MethodOutput> outputs;  ///< requested order, canonicalised
};

/// Runs every requested method on precomputed base forecasts and scores all
/// nodes against `actual` (nodes x h). `training` supplies the MASE scale.
[[nodiscard]] Evaluation evaluate_forecasts(const GroupStructure& structure, const SummingMatrix& S,
                                            const std::vector<TimeSeries>& training, const Eigen::MatrixXd& actual,
                                            const BaseForecasts& base, const ResidualMatrix& residuals,
                                            const std::vector<Method>& methods,
                                            const std::vector<bool>& flagged_nodes = {});

/// Applies one reconciliation method. Baseline returns the base forecasts.
[[nodiscard]] MethodOutput apply_method(Method method, const BaseForecasts& base, const SummingMatrix& S,
                                        const ResidualMatrix& residuals);

struct JobResult {
    BaseRun base_run;
    Evaluation evaluation;
};

/// Splits every node series at `train_length`, forecasts the next `horizon`
/// points, reconciles with each method, and scores against the held-out data.
[[nodiscard]] JobResult evaluate_job(const GroupStructure& structure, const SummingMatrix& S,
                                     const std::vector<TimeSeries>& series, std::size_t train_length,
                                     const std::vector<Method>& methods, const ForecastSettings& settings);

}  // namespace hts
