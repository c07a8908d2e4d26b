#include "hts/sarima.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/core.h>

#include "hts/errors.hpp"
#include "nelder_mead.hpp"

namespace hts {
namespace {

// Polynomials are stored as full coefficient vectors, index = power of L.
using Poly = std::vector<double>;

Poly poly_mul(const Poly& a, const Poly& b) {
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) continue;
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    }
    return out;
}

std::vector<bool> support_mul(const std::vector<bool>& a, const std::vector<bool>& b) {
    std::vector<bool> out(a.size() + b.size() - 1, false);
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i])
            for (std::size_t j = 0; j < b.size(); ++j)
                if (b[j]) out[i + j] = true;
    return out;
}

/// 1 + sign * sum c_i L^(i*stride)
Poly lag_poly(std::span<const double> c, int stride, double sign) {
    Poly out(c.size() * static_cast<std::size_t>(stride) + 1, 0.0);
    out[0] = 1.0;
    for (std::size_t i = 0; i < c.size(); ++i) out[(i + 1) * static_cast<std::size_t>(stride)] = sign * c[i];
    return out;
}

std::vector<bool> lag_support(std::size_t terms, int stride) {
    std::vector<bool> out(terms * static_cast<std::size_t>(stride) + 1, false);
    out[0] = true;
    for (std::size_t i = 1; i <= terms; ++i) out[i * static_cast<std::size_t>(stride)] = true;
    return out;
}

Poly differencing_poly(const SarimaOrder& o) {
    Poly out{1.0};
    for (int i = 0; i < o.d; ++i) out = poly_mul(out, Poly{1.0, -1.0});
    Poly seasonal(static_cast<std::size_t>(o.s) + 1, 0.0);
    seasonal[0] = 1.0;
    seasonal[static_cast<std::size_t>(o.s)] = -1.0;
    for (int i = 0; i < o.D; ++i) out = poly_mul(out, seasonal);
    return out;
}

/// Multiplied ARMA operators on the differenced scale:
/// ar = {a_1..}: 1 - sum a_k L^k ; ma = {b_1..}: 1 + sum b_k L^k.
struct ArmaExpansion {
    std::vector<double> ar;
    std::vector<double> ma;
};

ArmaExpansion expand_arma(const SarimaOrder& o, const SarimaCoefficients& c) {
    const Poly ar = poly_mul(lag_poly(c.phi, 1, -1.0), lag_poly(c.seasonal_phi, o.s, -1.0));
    const Poly ma = poly_mul(lag_poly(c.theta, 1, 1.0), lag_poly(c.seasonal_theta, o.s, 1.0));
    ArmaExpansion out;
    out.ar.resize(ar.size() - 1);
    for (std::size_t k = 1; k < ar.size(); ++k) out.ar[k - 1] = -ar[k];
    out.ma.assign(ma.begin() + 1, ma.end());
    return out;
}

/// Roots of 1 + sum c_i z^i all outside |z| = margin. Uses the Schur-Cohn
/// step-down recursion on the reversed polynomial scaled by margin: every
/// reflection coefficient must lie strictly inside (-1, 1).
bool roots_outside(std::span<const double> c, double margin) {
    std::vector<double> a(c.begin(), c.end());
    double scale = 1.0;
    for (auto& v : a) v *= (scale *= margin);
    std::vector<double> next(a.size());
    for (std::size_t m = a.size(); m > 0; --m) {
        const double k = a[m - 1];
        if (!(std::abs(k) < 1.0)) return false;
        const double denom = 1.0 - k * k;
        for (std::size_t i = 0; i + 1 < m; ++i) next[i] = (a[i] - k * a[m - 2 - i]) / denom;
        std::copy(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(m - 1), a.begin());
    }
    return true;
}

constexpr double kRootMargin = 1.001;

bool admissible(const SarimaCoefficients& c) {
    return ar_roots_outside(c.phi, kRootMargin) && ar_roots_outside(c.seasonal_phi, kRootMargin) &&
           ma_roots_outside(c.theta, kRootMargin) && ma_roots_outside(c.seasonal_theta, kRootMargin);
}

std::vector<double> apply_differencing(std::span<const double> y, const SarimaOrder& o) {
    const Poly delta = differencing_poly(o);
    const std::size_t span = delta.size() - 1;
    if (y.size() <= span) return {};
    std::vector<double> w(y.size() - span);
    for (std::size_t t = span; t < y.size(); ++t) {
        double v = 0.0;
        for (std::size_t k = 0; k <= span; ++k)
            if (delta[k] != 0.0) v += delta[k] * y[t - k];
        w[t - span] = v;
    }
    return w;
}

std::size_t conditioning_start(const SarimaOrder& o, std::size_t min_conditioning) {
    const auto ar_span = static_cast<std::size_t>(o.p + o.P * o.s);
    const auto ma_span = static_cast<std::size_t>(o.q + o.Q * o.s);
    return std::max({ar_span, ma_span, min_conditioning});
}

/// Non-zero lag terms of an expanded operator.
using SparseLags = std::vector<std::pair<std::size_t, double>>;

SparseLags sparse(const std::vector<double>& c) {
    SparseLags out;
    for (std::size_t k = 0; k < c.size(); ++k)
        if (c[k] != 0.0) out.emplace_back(k + 1, c[k]);
    return out;
}

/// CSS errors of the ARMA part on w into `e` (resized to w.size()), with zero
/// errors before `start`. Returns the sum of squares over [start, n).
double css_errors(std::span<const double> w, const ArmaExpansion& arma, double mu, std::size_t start,
                  std::vector<double>& e) {
    const std::size_t n = w.size();
    const SparseLags ar = sparse(arma.ar), ma = sparse(arma.ma);
    e.assign(n, 0.0);
    double ssr = 0.0;
    for (std::size_t t = start; t < n; ++t) {
        double v = w[t] - mu;
        for (const auto& [k, a] : ar) v -= a * (w[t - k] - mu);
        for (const auto& [k, b] : ma)
            if (k <= t) v -= b * e[t - k];
        e[t] = v;
        ssr += v * v;
    }
    return ssr;
}

/// CSS residuals for [start, n).
std::vector<double> css_filter(std::span<const double> w, const ArmaExpansion& arma, double mu, std::size_t start) {
    std::vector<double> e;
    css_errors(w, arma, mu, start, e);
    return {e.begin() + static_cast<std::ptrdiff_t>(std::min(start, w.size())), e.end()};
}

SarimaCoefficients unpack(const SarimaOrder& o, std::span<const double> x, bool with_intercept, double mu_center,
                          double mu_scale) {
    SarimaCoefficients c;
    std::size_t i = 0;
    auto take = [&](int n) {
        std::vector<double> v(x.begin() + static_cast<std::ptrdiff_t>(i),
                              x.begin() + static_cast<std::ptrdiff_t>(i + static_cast<std::size_t>(n)));
        i += static_cast<std::size_t>(n);
        return v;
    };
    c.phi = take(o.p);
    c.theta = take(o.q);
    c.seasonal_phi = take(o.P);
    c.seasonal_theta = take(o.Q);
    c.intercept = with_intercept ? mu_center + mu_scale * x[i] : 0.0;
    return c;
}

double gaussian_loglik(double ssr, std::size_t n) {
    const double nn = static_cast<double>(n);
    return -0.5 * nn * (1.0 + std::log(2.0 * std::numbers::pi) + std::log(ssr / nn));
}

}  // namespace

void SarimaOrder::validate() const {
    if (p < 0 || d < 0 || q < 0 || P < 0 || D < 0 || Q < 0 || s < 1)
        throw config_error("InvalidOrder", fmt::format("invalid SARIMA order {}", to_string()));
    if (s == 1 && (P != 0 || D != 0 || Q != 0))
        throw config_error("InvalidOrder", fmt::format("seasonal terms need s > 1: {}", to_string()));
}

std::string SarimaOrder::to_string() const {
    return fmt::format("({},{},{})({},{},{})^{}", p, d, q, P, D, Q, s);
}

std::string FeasibilityReport::describe_violation(std::size_t length, bool for_fit) const {
    const bool ok = for_fit ? feasible_for_fit : feasible_for_forecast;
    if (ok) return {};
    const int extra = for_fit ? period : 0;
    return fmt::format("{} needs (D+P{})s+p+d = {} and (Q{})s+q = {} to be <= series length {}",
                       for_fit ? "fitting" : "forecasting", for_fit ? "+1" : "", max_ar_lag + extra,
                       for_fit ? "+1" : "", max_ma_lag + extra, length);
}

FeasibilityReport check_feasibility(const SarimaOrder& order, std::size_t length) {
    FeasibilityReport r;
    r.period = order.s;
    r.max_ar_lag = order.max_ar_lag();
    r.max_ma_lag = order.max_ma_lag();
    r.required_forecast_length = r.max_ar_lag;
    r.required_fit_length = r.max_ar_lag + order.s;
    const auto T = static_cast<long long>(length);
    r.feasible_for_forecast = r.max_ar_lag <= T && r.max_ma_lag <= T;
    r.feasible_for_fit = r.max_ar_lag + order.s <= T && r.max_ma_lag + order.s <= T;
    return r;
}

std::map<int, double> expand_ar_recursion(const SarimaOrder& order, const SarimaCoefficients& coeffs) {
    order.validate();
    Poly poly = poly_mul(lag_poly(coeffs.seasonal_phi, order.s, -1.0), lag_poly(coeffs.phi, 1, -1.0));
    poly = poly_mul(poly, differencing_poly(order));

    std::vector<bool> support = support_mul(lag_support(coeffs.seasonal_phi.size(), order.s),
                                            lag_support(coeffs.phi.size(), 1));
    for (int i = 0; i < order.d; ++i) support = support_mul(support, lag_support(1, 1));
    for (int i = 0; i < order.D; ++i) support = support_mul(support, lag_support(1, order.s));

    std::map<int, double> weights;
    for (std::size_t k = 1; k < poly.size(); ++k)
        if (support[k] || poly[k] != 0.0) weights[static_cast<int>(k)] = -poly[k];
    return weights;
}

bool ar_roots_outside(std::span<const double> coeffs, double margin) {
    std::vector<double> neg(coeffs.size());
    std::transform(coeffs.begin(), coeffs.end(), neg.begin(), [](double v) { return -v; });
    return roots_outside(neg, margin);
}

bool ma_roots_outside(std::span<const double> coeffs, double margin) { return roots_outside(coeffs, margin); }

FittedModel fit(const TimeSeries& y, const SarimaOrder& order, bool include_intercept, const FitOptions& options) {
    order.validate();
    const auto feas = check_feasibility(order, y.size());
    if (!feas.feasible_for_fit)
        throw config_error("InfeasibleOrder",
                           fmt::format("SARIMA{} infeasible: {}", order.to_string(),
                                       feas.describe_violation(y.size(), true)));
    for (std::size_t i = 0; i < y.size(); ++i)
        if (!std::isfinite(y[i]))
            throw data_error("NonFiniteValue", fmt::format("non-finite observation at index {}", i));

    const std::vector<double> w = apply_differencing(y.values(), order);
    const std::size_t start = conditioning_start(order, options.min_conditioning);
    if (w.size() <= start)
        throw config_error("InfeasibleOrder", fmt::format("SARIMA{} leaves no residuals on {} observations",
                                                          order.to_string(), y.size()));
    const std::span<const double> scored(w.data() + start, w.size() - start);
    const double w_mean = mean(scored);
    const double w_sd = stddev(w);
    if (!(w_sd > 0.0))
        throw data_error("DegenerateSeries",
                         fmt::format("series has zero variance after differencing for SARIMA{}", order.to_string()));

    const std::size_t dim = static_cast<std::size_t>(order.arma_terms()) + (include_intercept ? 1 : 0);
    const double mu_center = include_intercept ? w_mean : 0.0;
    const double mu_scale = w_sd;

    std::vector<double> buffer;
    const double scale = static_cast<double>(w.size() - start) * w_sd * w_sd;
    auto objective = [&](const std::vector<double>& x) {
        const SarimaCoefficients c = unpack(order, x, include_intercept, mu_center, mu_scale);
        if (!admissible(c)) return HUGE_VAL;
        return css_errors(w, expand_arma(order, c), c.intercept, start, buffer) / scale;
    };

    detail::SimplexResult best;
    if (dim == 0) {
        best.value = objective({});
        best.converged = true;
    } else {
        const int budget = options.max_iterations > 0 ? options.max_iterations : 400 + 200 * static_cast<int>(dim);
        const std::vector<double> step(dim, 0.1);
        bool first = true;
        for (double init : {0.0, 0.1, -0.1}) {
            std::vector<double> x0(dim, init);
            if (include_intercept) x0.back() = 0.0;
            auto r = detail::nelder_mead(objective, x0, step, budget);
            if (first || r.value < best.value) {
                best = std::move(r);
                first = false;
            }
        }
        // One restart from the incumbent guards against premature simplex collapse.
        auto polished = detail::nelder_mead(objective, best.x, step, budget);
        if (polished.value <= best.value) best = std::move(polished);
    }
    if (!std::isfinite(best.value) || best.value >= HUGE_VAL)
        throw numerical_error("NonConvergence",
                              fmt::format("SARIMA{}: no admissible parameter point found", order.to_string()));

    FittedModel model;
    model.order = order;
    model.has_intercept = include_intercept;
    model.coeffs = unpack(order, best.x, include_intercept, mu_center, mu_scale);
    const auto e = css_filter(w, expand_arma(order, model.coeffs), model.coeffs.intercept, start);
    double ssr = 0.0;
    for (double v : e) ssr += v * v;
    const std::size_t n = e.size();
    if (!(ssr > 0.0))
        throw data_error("DegenerateSeries",
                         fmt::format("SARIMA{} reproduces the series exactly; residual variance is zero",
                                     order.to_string()));
    model.coeffs.sigma2 = ssr / static_cast<double>(n);
    model.log_likelihood = gaussian_loglik(ssr, n);
    model.residuals = y.with_values(e);
    model.train_length = y.size();
    model.converged = best.converged;
    if (options.strict && !model.converged)
        throw numerical_error("NonConvergence",
                              fmt::format("SARIMA{}: simplex search hit its iteration budget (best SSR/n = {})",
                                          order.to_string(), model.coeffs.sigma2));
    return model;
}

std::vector<double> one_step_residuals(const FittedModel& model, std::span<const double> history) {
    const auto w = apply_differencing(history, model.order);
    const std::size_t start = conditioning_start(model.order, 0);
    if (w.size() <= start) return {};
    return css_filter(w, expand_arma(model.order, model.coeffs), model.coeffs.intercept, start);
}

std::vector<double> forecast(const FittedModel& model, const TimeSeries& history, int h) {
    const auto& o = model.order;
    if (h < 1) throw config_error("InvalidHorizon", fmt::format("horizon must be >= 1, got {}", h));
    const auto feas = check_feasibility(o, history.size());
    if (!feas.feasible_for_forecast)
        throw config_error("InfeasibleOrder", fmt::format("SARIMA{} cannot forecast: {}", o.to_string(),
                                                          feas.describe_violation(history.size(), false)));

    const auto weights = expand_ar_recursion(o, model.coeffs);
    const auto arma = expand_arma(o, model.coeffs);
    double ar_at_one = 1.0;
    for (double a : arma.ar) ar_at_one -= a;
    const double constant = model.coeffs.intercept * ar_at_one;

    const std::size_t T = history.size();
    std::vector<double> y(history.data());
    y.resize(T + static_cast<std::size_t>(h), 0.0);
    std::vector<double> e(T + static_cast<std::size_t>(h), 0.0);
    const auto resid = one_step_residuals(model, history.values());
    std::copy(resid.begin(), resid.end(), e.begin() + static_cast<std::ptrdiff_t>(T - resid.size()));

    std::vector<double> out(static_cast<std::size_t>(h));
    for (std::size_t t = T; t < y.size(); ++t) {
        double v = constant;
        for (const auto& [k, wk] : weights) v += wk * y[t - static_cast<std::size_t>(k)];
        for (std::size_t k = 1; k <= arma.ma.size(); ++k) v += arma.ma[k - 1] * e[t - k];
        y[t] = v;
        out[t - T] = v;
    }
    return out;
}

TimeSeries simulate(const SarimaOrder& order, const SarimaCoefficients& coeffs, std::size_t length,
                    std::uint64_t seed, std::span<const double> initial) {
    order.validate();
    if (coeffs.phi.size() != static_cast<std::size_t>(order.p) ||
        coeffs.theta.size() != static_cast<std::size_t>(order.q) ||
        coeffs.seasonal_phi.size() != static_cast<std::size_t>(order.P) ||
        coeffs.seasonal_theta.size() != static_cast<std::size_t>(order.Q))
        throw config_error("InvalidCoefficients",
                           fmt::format("coefficient counts do not match SARIMA{}", order.to_string()));
    if (!(coeffs.sigma2 >= 0.0) || !ar_roots_outside(coeffs.phi) || !ar_roots_outside(coeffs.seasonal_phi) ||
        !ma_roots_outside(coeffs.theta) || !ma_roots_outside(coeffs.seasonal_theta))
        throw config_error("InvalidCoefficients",
                           "simulation needs sigma2 >= 0, stationary AR and invertible MA polynomials");
    const auto span = static_cast<std::size_t>(order.differencing_span());
    if (!initial.empty() && initial.size() != span)
        throw config_error("InvalidCoefficients",
                           fmt::format("expected {} initial values for differencing, got {}", span, initial.size()));
    if (length <= span)
        throw config_error("SeriesTooShort", fmt::format("length {} does not exceed differencing span {}", length, span));

    const auto arma = expand_arma(order, coeffs);
    const std::size_t memory = std::max(arma.ar.size(), arma.ma.size());
    const std::size_t burn = 200 + 10 * memory;
    const std::size_t n = length - span;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(coeffs.sigma2));
    std::vector<double> u(burn + n, 0.0), e(burn + n, 0.0);
    for (std::size_t t = 0; t < u.size(); ++t) {
        e[t] = normal(rng);
        double v = e[t];
        for (std::size_t k = 1; k <= arma.ar.size() && k <= t; ++k) v += arma.ar[k - 1] * u[t - k];
        for (std::size_t k = 1; k <= arma.ma.size() && k <= t; ++k) v += arma.ma[k - 1] * e[t - k];
        u[t] = v;
    }

    const Poly delta = differencing_poly(order);
    std::vector<double> y(length, 0.0);
    if (!initial.empty()) std::copy(initial.begin(), initial.end(), y.begin());
    for (std::size_t t = span; t < length; ++t) {
        double v = coeffs.intercept + u[burn + t - span];
        for (std::size_t k = 1; k <= span; ++k) v -= delta[k] * y[t - k];
        y[t] = v;
    }
    return TimeSeries(std::move(y), order.s);
}

}  // namespace hts
