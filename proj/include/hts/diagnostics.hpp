#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hts/sarima.hpp"
#include "hts/series.hpp"

namespace hts {

struct CriteriaSet {
    double aic = 0.0;
    double aicc = 0.0;
    double bic = 0.0;
    int k = 0;
    std::size_t n = 0;
};

/// aic = -2 logL + 2k, aicc = aic + 2k(k+1)/(n-k-1), bic = -2 logL + k ln n.
/// Throws InsufficientSample when n <= k + 1.
[[nodiscard]] CriteriaSet information_criteria(double log_likelihood, int k, std::size_t n);

/// Parameter count used for information criteria: ARMA terms, intercept, and the variance.
[[nodiscard]] int criteria_parameter_count(const FittedModel& model);

struct LjungBoxResult {
    double q_star = 0.0;
    int lags_tested = 0;
    int dof = 0;
    double p_value = 1.0;
};

/// Q* = T(T+2) sum_{k=1..l} r_k^2 / (T-k), referred to chi-squared with l - K dof.
[[nodiscard]] LjungBoxResult ljung_box(std::span<const double> residuals, int lags, int fitted_params);

/// Lag count used when the caller does not choose one: min(2s, floor(T/5)) for
/// seasonal data, otherwise 10; clipped so that at least one degree of freedom remains.
[[nodiscard]] int default_ljung_box_lags(std::size_t length, int period, int fitted_params);

struct QQPoint {
    double theoretical = 0.0;
    double sample = 0.0;
};

/// Standardised order statistics against standard-normal quantiles at (i - 0.5)/T.
/// Zero-variance input yields zero sample quantiles.
[[nodiscard]] std::vector<QQPoint> qq_points(std::span<const double> data);

/// KPSS level-stationarity statistic with a Bartlett long-run variance
/// using trunc(4 (T/100)^(1/4)) lags.
[[nodiscard]] double kpss_statistic(std::span<const double> y);
/// 5% critical value of the level-stationarity KPSS test.
inline constexpr double kKpssCritical5 = 0.463;

struct DifferencingChoice {
    int d = 0;
    int D = 0;
    bool too_short = false;  ///< seasonal decision skipped for lack of data
};

/// Seasonal difference when it lowers the standard deviation (and does better
/// than a first difference would); then a first difference when a KPSS test
/// rejects level stationarity at 5% and the difference lowers the standard deviation.
[[nodiscard]] DifferencingChoice choose_differencing(const TimeSeries& y, int s);

enum class Criterion { AIC, AICc, BIC };

[[nodiscard]] std::string to_string(Criterion c);
/// Accepts "aic", "aicc", "bic" (case-insensitive).
[[nodiscard]] Criterion parse_criterion(const std::string& name);
[[nodiscard]] double criterion_value(const CriteriaSet& c, Criterion which);

struct SearchConfig {
    int max_p = 3, max_q = 3;
    int max_P = 1, max_Q = 1;
    Criterion criterion = Criterion::AICc;
    /// nullopt: intercept only when d + D = 0.
    std::optional<bool> include_intercept;
    /// Forces (d, D) instead of calling choose_differencing.
    std::optional<std::pair<int, int>> differencing;
    unsigned jobs = 1;
};

struct Candidate {
    SarimaOrder order;
    std::optional<CriteriaSet> criteria;  ///< empty when the fit failed
    bool converged = false;
    std::string failure;  ///< error message for failed fits
};

struct SearchResult {
    FittedModel best;
    CriteriaSet best_criteria;
    LjungBoxResult best_ljung_box;
    std::vector<Candidate> candidates;  ///< canonical (p, q, P, Q) order
    int d = 0;
    int D = 0;
    std::vector<std::string> warnings;
};

/// Exhaustive feasibility-filtered search over p,q <= max_p/max_q and
/// P,Q <= max_P/max_Q at fixed (d, D). All candidates share one conditioning
/// window so their likelihoods cover the same observations.
/// Throws NoFeasibleModel when nothing can be fitted.
[[nodiscard]] SearchResult auto_select(const TimeSeries& y, int s, const SearchConfig& config = {});

}  // namespace hts
