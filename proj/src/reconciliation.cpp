#include "hts/reconciliation.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "hts/errors.hpp"
#include "hts/log.hpp"

namespace hts {

ResidualMatrix ResidualMatrix::from_aligned_tails(const std::vector<std::vector<double>>& per_node) {
    std::size_t common = per_node.empty() ? 0 : per_node.front().size();
    for (const auto& r : per_node) common = std::min(common, r.size());
    ResidualMatrix out;
    out.values.resize(static_cast<Eigen::Index>(common), static_cast<Eigen::Index>(per_node.size()));
    for (std::size_t j = 0; j < per_node.size(); ++j) {
        const auto& r = per_node[j];
        const std::size_t offset = r.size() - common;
        for (std::size_t t = 0; t < common; ++t)
            out.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = r[offset + t];
    }
    return out;
}

std::string to_string(WeightKind kind) {
    switch (kind) {
        case WeightKind::OLS: return "OLS";
        case WeightKind::WLS: return "WLS";
        case WeightKind::MinTSample: return "MinT-sample";
        case WeightKind::MinTShrink: return "MinT";
    }
    return "OLS";
}

Eigen::MatrixXd sample_covariance(const ResidualMatrix& residuals) {
    const auto& e = residuals.values;
    return (e.transpose() * e) / static_cast<double>(e.rows());
}

WeightSpec ols_weights(std::size_t nodes) {
    WeightSpec w;
    w.kind = WeightKind::OLS;
    w.W = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(nodes));
    return w;
}

namespace {

/// Schafer-Strimmer intensity for shrinking the correlation matrix toward the identity.
double shrinkage_intensity(const Eigen::MatrixXd& e, const Eigen::MatrixXd& cov) {
    const auto n = static_cast<double>(e.rows());
    const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
    const Eigen::MatrixXd xs = e * sd.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd xs2 = xs.cwiseProduct(xs);
    const Eigen::MatrixXd cross = xs.transpose() * xs;
    Eigen::MatrixXd v = (xs2.transpose() * xs2 - cross.cwiseProduct(cross) / n) / (n * (n - 1.0));
    v.diagonal().setZero();
    Eigen::MatrixXd corr = cov.cwiseQuotient(sd * sd.transpose());
    corr.diagonal().setZero();
    const double denom = corr.cwiseProduct(corr).sum();
    if (!(denom > 0.0)) return 1.0;
    return std::clamp(v.sum() / denom, 0.0, 1.0);
}

}  // namespace

WeightSpec estimate_weights(const ResidualMatrix& residuals, WeightKind kind, std::optional<double> shrink_override) {
    const auto& e = residuals.values;
    const auto nodes = static_cast<std::size_t>(e.cols());
    if (kind == WeightKind::OLS) return ols_weights(nodes);
    if (e.rows() < 2)
        throw data_error("InsufficientResiduals",
                         fmt::format("weight estimation needs at least 2 common residual rows, got {}", e.rows()));

    WeightSpec w;
    w.kind = kind;
    auto note = [&](std::string msg) {
        warn(msg);
        w.warnings.push_back(std::move(msg));
    };

    Eigen::MatrixXd cov = sample_covariance(residuals);
    double positive_sum = 0.0;
    int positive = 0;
    for (Eigen::Index i = 0; i < cov.rows(); ++i)
        if (cov(i, i) > 0.0) {
            positive_sum += cov(i, i);
            ++positive;
        }
    const double floor = positive > 0 ? 1e-8 * positive_sum / positive : 1.0;
    for (Eigen::Index i = 0; i < cov.rows(); ++i)
        if (!(cov(i, i) > floor)) {
            if (!(cov(i, i) > 0.0)) note(fmt::format("DegenerateResiduals: node {} has zero residual variance; floored", i));
            cov(i, i) = std::max(cov(i, i), floor);
        }

    if (kind == WeightKind::MinTSample && e.rows() <= e.cols()) {
        note(fmt::format("MinT-sample needs more residual rows ({}) than nodes ({}); using MinT-shrink", e.rows(),
                         e.cols()));
        kind = WeightKind::MinTShrink;
        w.kind = kind;
    }

    const Eigen::MatrixXd diag = cov.diagonal().asDiagonal();
    switch (kind) {
        case WeightKind::WLS: w.W = diag; break;
        case WeightKind::MinTSample: w.W = cov; break;
        case WeightKind::MinTShrink: {
            const double lambda = shrink_override ? std::clamp(*shrink_override, 0.0, 1.0) : shrinkage_intensity(e, cov);
            w.shrink_intensity = lambda;
            w.W = lambda * diag + (1.0 - lambda) * cov;
            break;
        }
        case WeightKind::OLS: break;
    }
    return w;
}

namespace {

Eigen::LLT<Eigen::MatrixXd> factor_or_jitter(const Eigen::MatrixXd& m, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return llt;
    const double jitter = 1e-8 * m.trace() / static_cast<double>(m.rows());
    Eigen::MatrixXd bumped = m;
    bumped.diagonal().array() += std::max(jitter, 1e-300);
    llt.compute(bumped);
    if (llt.info() != Eigen::Success)
        throw numerical_error("SingularSystem",
                              fmt::format("{} is not positive definite even after jitter; try MinT-shrink", what));
    warn(fmt::format("{} needed diagonal jitter {:.3g}", what, jitter));
    return llt;
}

}  // namespace

ReconciledForecasts reconcile(const BaseForecasts& base, const SummingMatrix& S, const WeightSpec& w) {
    const auto& Smat = S.entries;
    if (base.values.rows() != Smat.rows() || w.W.rows() != Smat.rows() || w.W.cols() != Smat.rows())
        throw config_error("DimensionMismatch",
                           fmt::format("base has {} rows, S is {}x{}, W is {}x{}", base.values.rows(), Smat.rows(),
                                       Smat.cols(), w.W.rows(), w.W.cols()));
    const auto Wllt = factor_or_jitter(w.W, "weight matrix W");
    const Eigen::MatrixXd WinvS = Wllt.solve(Smat);
    const Eigen::MatrixXd A = Smat.transpose() * WinvS;
    const auto Allt = factor_or_jitter(A, "S'W^-1 S");

    ReconciledForecasts out;
    out.bottom_estimates = Allt.solve(WinvS.transpose() * base.values);
    out.values = Smat * out.bottom_estimates;
    out.discrepancy = base.values - out.values;
    return out;
}

ReconciledForecasts bottom_up(const BaseForecasts& base, const SummingMatrix& S) {
    const auto& Smat = S.entries;
    if (base.values.rows() != Smat.rows())
        throw config_error("DimensionMismatch",
                           fmt::format("base has {} rows, S has {}", base.values.rows(), Smat.rows()));
    ReconciledForecasts out;
    out.bottom_estimates.resize(Smat.cols(), base.values.cols());
    for (const auto& [key, col] : S.col_index) {
        const auto row = S.row_index.at(key);
        out.bottom_estimates.row(static_cast<Eigen::Index>(col)) = base.values.row(static_cast<Eigen::Index>(row));
    }
    out.values = Smat * out.bottom_estimates;
    out.discrepancy = base.values - out.values;
    return out;
}

}  // namespace hts
