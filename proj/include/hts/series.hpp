#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hts {

/// Regularly spaced observations plus the seasonal period they repeat on.
class TimeSeries {
public:
    TimeSeries() = default;
    explicit TimeSeries(std::vector<double> values, int period = 1, std::string start = {});

    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] const std::vector<double>& data() const noexcept { return values_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }
    [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
    [[nodiscard]] int period() const noexcept { return period_; }
    /// Calendar anchor of the first observation (ISO date or week label).
    [[nodiscard]] const std::string& start() const noexcept { return start_; }

    /// Same metadata, new values.
    [[nodiscard]] TimeSeries with_values(std::vector<double> values) const;
    /// Observations [first, first + count).
    [[nodiscard]] TimeSeries slice(std::size_t first, std::size_t count) const;

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

private:
    std::vector<double> values_;
    int period_ = 1;
    std::string start_;
};

struct BoxCoxParam {
    double lambda = 1.0;
};

/// Everything needed to undo `difference`: the operator (1 - L^lag)^order and
/// the first lag*order observations of the undifferenced series.
struct DifferenceSpec {
    int lag = 1;
    int order = 0;
    std::vector<double> initial_values;
};

// Box-Cox ---------------------------------------------------------------

/// (y^lambda - 1) / lambda, or ln(y) at lambda = 0. Throws NonPositiveValue.
[[nodiscard]] TimeSeries box_cox(const TimeSeries& y, BoxCoxParam lam);
/// Inverse of box_cox. Throws DomainViolation when lambda*z + 1 <= 0.
[[nodiscard]] TimeSeries inv_box_cox(const TimeSeries& z, BoxCoxParam lam);

[[nodiscard]] double box_cox_value(double y, double lambda);
[[nodiscard]] double inv_box_cox_value(double z, double lambda);

/// Guerrero-style choice of lambda on the grid -1.0, -0.9, ..., 2.0.
///
/// The series is cut into consecutive blocks of one season (two observations
/// when the period is 1); for each lambda the ratio block_sd / block_mean^(1-lambda)
/// is formed per block and the lambda giving the smallest coefficient of
/// variation of those ratios wins. A series with no dispersion at any lambda
/// returns lambda = 1 and emits a warning.
[[nodiscard]] BoxCoxParam select_lambda(const TimeSeries& y);

// Differencing ------------------------------------------------------------

struct Differenced {
    TimeSeries series;
    DifferenceSpec spec;
};

/// Applies (1 - L^lag)^order. Output has size() - lag*order points.
[[nodiscard]] Differenced difference(const TimeSeries& y, int lag, int order);
/// Exact inverse of difference. Throws SpecMismatch on inconsistent initials.
[[nodiscard]] TimeSeries integrate(const TimeSeries& z, const DifferenceSpec& spec);

/// Coefficients c_1..c_{lag*order} with (1 - L^lag)^order = 1 - sum c_k L^k.
[[nodiscard]] std::vector<double> differencing_polynomial(int lag, int order);

// Correlation -------------------------------------------------------------

/// Sample autocorrelations r_0..r_max_lag with the biased (divide by T)
/// autocovariance. r_0 = 1; a constant series yields zeros beyond lag 0.
[[nodiscard]] std::vector<double> acf(std::span<const double> y, std::size_t max_lag);
/// Partial autocorrelations at lags 0..max_lag via Durbin-Levinson on acf();
/// element 0 is 1 by convention.
[[nodiscard]] std::vector<double> pacf(std::span<const double> y, std::size_t max_lag);
/// Durbin-Levinson on a precomputed autocorrelation sequence (r[0] == 1).
[[nodiscard]] std::vector<double> durbin_levinson(std::span<const double> r);

[[nodiscard]] double mean(std::span<const double> y);
/// Sample standard deviation with the n - 1 denominator.
[[nodiscard]] double stddev(std::span<const double> y);

}  // namespace hts
