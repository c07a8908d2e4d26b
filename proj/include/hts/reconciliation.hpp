#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hts/grouping.hpp"

namespace hts {

/// Independent h-step forecasts, one row per node in summing-matrix row order.
struct BaseForecasts {
    Eigen::MatrixXd values;  ///< nodes x h
    [[nodiscard]] int horizon() const noexcept { return static_cast<int>(values.cols()); }
};

/// In-sample one-step residuals, one column per node, rows restricted to the
/// time points where every node has a residual.
struct ResidualMatrix {
    Eigen::MatrixXd values;  ///< T_common x nodes

    /// Aligns per-node residual sequences at their ends and keeps the common tail.
    static ResidualMatrix from_aligned_tails(const std::vector<std::vector<double>>& per_node);
};

enum class WeightKind { OLS, WLS, MinTSample, MinTShrink };

[[nodiscard]] std::string to_string(WeightKind kind);

struct WeightSpec {
    WeightKind kind = WeightKind::OLS;
    Eigen::MatrixXd W;             ///< symmetric positive definite, nodes x nodes
    double shrink_intensity = 0.0;  ///< MinT-shrink only
    std::vector<std::string> warnings;
};

/// Sample one-step covariance (1/T) sum e_t e_t'.
[[nodiscard]] Eigen::MatrixXd sample_covariance(const ResidualMatrix& residuals);

/// OLS: identity. WLS: diag of the one-step covariance. MinT-sample: the full
/// one-step covariance (falls back to MinT-shrink when T_common <= nodes).
/// MinT-shrink: lambda*diag + (1-lambda)*full with lambda estimated from the
/// standardised residuals unless `shrink_override` is given.
/// Zero-variance nodes get their diagonal floored, with a warning.
[[nodiscard]] WeightSpec estimate_weights(const ResidualMatrix& residuals, WeightKind kind,
                                          std::optional<double> shrink_override = std::nullopt);

/// Identity weights sized for `nodes`, no residuals needed.
[[nodiscard]] WeightSpec ols_weights(std::size_t nodes);

struct ReconciledForecasts {
    Eigen::MatrixXd values;            ///< nodes x h, equal to S * bottom
    Eigen::MatrixXd bottom_estimates;  ///< bottom x h
    Eigen::MatrixXd discrepancy;       ///< base - reconciled
};

/// S (S' W^-1 S)^-1 S' W^-1 yhat, via Cholesky solves. Throws SingularSystem.
[[nodiscard]] ReconciledForecasts reconcile(const BaseForecasts& base, const SummingMatrix& S, const WeightSpec& w);

/// Keeps the bottom rows of `base` and sums them upward.
[[nodiscard]] ReconciledForecasts bottom_up(const BaseForecasts& base, const SummingMatrix& S);

}  // namespace hts
