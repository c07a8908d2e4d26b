#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hts/series.hpp"

namespace hts {

/// (p,d,q)(P,D,Q)^s
struct SarimaOrder {
    int p = 0, d = 0, q = 0;
    int P = 0, D = 0, Q = 0;
    int s = 1;

    /// Throws InvalidOrder for negative orders, s < 1, or seasonal terms with s = 1.
    void validate() const;
    [[nodiscard]] std::string to_string() const;
    [[nodiscard]] int arma_terms() const noexcept { return p + q + P + Q; }
    /// Largest lag of y entering the AR side once differencing is expanded.
    [[nodiscard]] int max_ar_lag() const noexcept { return (D + P) * s + p + d; }
    [[nodiscard]] int max_ma_lag() const noexcept { return Q * s + q; }
    /// Observations lost to differencing.
    [[nodiscard]] int differencing_span() const noexcept { return d + D * s; }

    friend auto operator<=>(const SarimaOrder&, const SarimaOrder&) = default;
};

struct SarimaCoefficients {
    std::vector<double> phi;             ///< non-seasonal AR, size p
    std::vector<double> theta;           ///< non-seasonal MA, size q
    std::vector<double> seasonal_phi;    ///< seasonal AR, size P
    std::vector<double> seasonal_theta;  ///< seasonal MA, size Q
    double intercept = 0.0;              ///< mean of the differenced series
    double sigma2 = 1.0;
};

struct FittedModel {
    SarimaOrder order;
    SarimaCoefficients coeffs;
    bool has_intercept = false;
    double log_likelihood = 0.0;
    /// One-step in-sample errors, aligned to the end of the training series.
    TimeSeries residuals;
    std::size_t train_length = 0;
    bool converged = true;

    /// Number of CSS residuals, the sample size behind log_likelihood.
    [[nodiscard]] std::size_t effective_n() const noexcept { return residuals.size(); }
    /// Estimated ARMA coefficients plus intercept (sigma2 excluded).
    [[nodiscard]] int estimated_coefficients() const noexcept { return order.arma_terms() + (has_intercept ? 1 : 0); }
};

/// Required lengths report the AR-side bounds; feasibility also checks the MA side.
struct FeasibilityReport {
    bool feasible_for_fit = false;
    bool feasible_for_forecast = false;
    int required_fit_length = 0;
    int required_forecast_length = 0;
    int max_ar_lag = 0;
    int max_ma_lag = 0;
    int period = 1;

    /// Human-readable statement of the violated length constraint, empty if none.
    [[nodiscard]] std::string describe_violation(std::size_t length, bool for_fit) const;
};

/// Length restrictions for a series of length `length`:
///   forecast: (D+P)s + p + d <= T  and  Qs + q <= T
///   fit:      (D+P+1)s + p + d <= T  and  (Q+1)s + q <= T
[[nodiscard]] FeasibilityReport check_feasibility(const SarimaOrder& order, std::size_t length);

/// Weights w_k of y_t = sum_k w_k y_{t-k} + (MA terms) obtained by expanding
/// Phi(L^s) phi(L) (1-L)^d (1-L^s)^D. Every lag that the product structurally
/// touches is present, even if its weight happens to be zero.
[[nodiscard]] std::map<int, double> expand_ar_recursion(const SarimaOrder& order, const SarimaCoefficients& coeffs);

struct FitOptions {
    /// Residuals start no earlier than this index of the differenced series.
    /// Used to put competing candidates on the same effective sample.
    std::size_t min_conditioning = 0;
    int max_iterations = 0;  ///< 0 selects a budget from the parameter count
    /// Throw NonConvergence instead of returning a model flagged converged = false.
    bool strict = false;
};

/// Conditional-sum-of-squares estimate on the fully differenced series.
/// Throws InfeasibleOrder, DegenerateSeries, or (strict) NonConvergence.
[[nodiscard]] FittedModel fit(const TimeSeries& y, const SarimaOrder& order, bool include_intercept,
                              const FitOptions& options = {});

/// Intercept policy used when callers have no preference: only for d + D = 0.
[[nodiscard]] inline bool default_intercept(const SarimaOrder& order) { return order.d + order.D == 0; }

/// One-step errors of `model` replayed over `history`, aligned to its end.
[[nodiscard]] std::vector<double> one_step_residuals(const FittedModel& model, std::span<const double> history);

/// Iterated conditional-mean forecasts for h steps after `history`.
[[nodiscard]] std::vector<double> forecast(const FittedModel& model, const TimeSeries& history, int h);

/// Gaussian SARIMA draw of length `length`. `initial` supplies the first
/// d + D*s observations used to undo differencing (zeros when empty).
[[nodiscard]] TimeSeries simulate(const SarimaOrder& order, const SarimaCoefficients& coeffs, std::size_t length,
                                  std::uint64_t seed, std::span<const double> initial = {});

/// True when every root of 1 - sum c_i z^i lies outside |z| = margin.
[[nodiscard]] bool ar_roots_outside(std::span<const double> coeffs, double margin = 1.0);
/// True when every root of 1 + sum c_i z^i lies outside |z| = margin.
[[nodiscard]] bool ma_roots_outside(std::span<const double> coeffs, double margin = 1.0);

}  // namespace hts
