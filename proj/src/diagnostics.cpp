#include "hts/diagnostics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <fmt/core.h>

#include "hts/errors.hpp"
#include "hts/log.hpp"
#include "parallel.hpp"

namespace hts {

CriteriaSet information_criteria(double log_likelihood, int k, std::size_t n) {
    if (n < 1 || k < 0) throw data_error("InsufficientSample", fmt::format("invalid n = {}, k = {}", n, k));
    const auto nn = static_cast<double>(n);
    const auto kk = static_cast<double>(k);
    if (nn <= kk + 1.0)
        throw data_error("InsufficientSample",
                         fmt::format("AICc undefined: n = {} must exceed k + 1 = {}", n, k + 1));
    CriteriaSet c;
    c.k = k;
    c.n = n;
    c.aic = -2.0 * log_likelihood + 2.0 * kk;
    c.aicc = c.aic + 2.0 * kk * (kk + 1.0) / (nn - kk - 1.0);
    c.bic = -2.0 * log_likelihood + kk * std::log(nn);
    return c;
}

int criteria_parameter_count(const FittedModel& model) { return model.estimated_coefficients() + 1; }

LjungBoxResult ljung_box(std::span<const double> residuals, int lags, int fitted_params) {
    const auto T = residuals.size();
    if (lags < 1 || static_cast<std::size_t>(lags) >= T || fitted_params < 0 || lags <= fitted_params)
        throw data_error("InvalidLags", fmt::format("Ljung-Box needs T > l >= 1 and l > K; got T = {}, l = {}, K = {}",
                                                    T, lags, fitted_params));
    const auto r = acf(residuals, static_cast<std::size_t>(lags));
    const auto tt = static_cast<double>(T);
    double sum = 0.0;
    for (int k = 1; k <= lags; ++k) sum += r[static_cast<std::size_t>(k)] * r[static_cast<std::size_t>(k)] / (tt - k);
    LjungBoxResult out;
    out.q_star = tt * (tt + 2.0) * sum;
    out.lags_tested = lags;
    out.dof = lags - fitted_params;
    boost::math::chi_squared dist(out.dof);
    out.p_value = std::clamp(boost::math::cdf(boost::math::complement(dist, out.q_star)), 0.0, 1.0);
    return out;
}

int default_ljung_box_lags(std::size_t length, int period, int fitted_params) {
    int l = period > 1 ? std::min(2 * period, static_cast<int>(length / 5)) : 10;
    l = std::max(l, fitted_params + 1);
    l = std::min(l, static_cast<int>(length) - 1);
    return l;
}

std::vector<QQPoint> qq_points(std::span<const double> data) {
    const auto T = data.size();
    std::vector<double> sorted(data.begin(), data.end());
    std::sort(sorted.begin(), sorted.end());
    const double m = mean(data);
    const double sd = stddev(data);
    boost::math::normal standard;
    std::vector<QQPoint> out(T);
    for (std::size_t i = 0; i < T; ++i) {
        const double prob = (static_cast<double>(i) + 0.5) / static_cast<double>(T);
        out[i].theoretical = boost::math::quantile(standard, prob);
        out[i].sample = sd > 0.0 ? (sorted[i] - m) / sd : 0.0;
    }
    return out;
}

double kpss_statistic(std::span<const double> y) {
    const auto T = y.size();
    if (T < 2) return 0.0;
    const double m = mean(y);
    std::vector<double> e(T);
    for (std::size_t t = 0; t < T; ++t) e[t] = y[t] - m;
    const auto tt = static_cast<double>(T);
    double partial = 0.0, eta = 0.0;
    for (double v : e) {
        partial += v;
        eta += partial * partial;
    }
    const auto lags = static_cast<std::size_t>(std::trunc(4.0 * std::pow(tt / 100.0, 0.25)));
    double lrv = 0.0;
    for (double v : e) lrv += v * v;
    lrv /= tt;
    for (std::size_t j = 1; j <= lags && j < T; ++j) {
        double cov = 0.0;
        for (std::size_t t = j; t < T; ++t) cov += e[t] * e[t - j];
        lrv += 2.0 * (1.0 - static_cast<double>(j) / static_cast<double>(lags + 1)) * cov / tt;
    }
    if (!(lrv > 0.0)) return 0.0;
    return eta / (tt * tt * lrv);
}

DifferencingChoice choose_differencing(const TimeSeries& y, int s) {
    DifferencingChoice out;
    const auto T = y.size();
    if (T < 4) {
        warn(fmt::format("choose_differencing: only {} observations; using d = D = 0", T));
        out.too_short = true;
        return out;
    }
    TimeSeries x = y;
    if (s > 1) {
        if (T < 2 * static_cast<std::size_t>(s) + 2) {
            warn(fmt::format("choose_differencing: {} observations are fewer than 2s+2 = {}; seasonal difference skipped",
                             T, 2 * s + 2));
            out.too_short = true;
        } else {
            const double sd_level = stddev(y.values());
            const auto seasonal = difference(y, s, 1).series;
            const double sd_seasonal = stddev(seasonal.values());
            const double sd_first = stddev(difference(y, 1, 1).series.values());
            if (sd_seasonal < sd_level && sd_seasonal < sd_first) {
                out.D = 1;
                x = seasonal;
            }
        }
    }
    if (x.size() >= 4 && kpss_statistic(x.values()) > kKpssCritical5) {
        const double sd_diff = stddev(difference(x, 1, 1).series.values());
        if (sd_diff < stddev(x.values())) out.d = 1;
    }
    return out;
}

std::string to_string(Criterion c) {
    switch (c) {
        case Criterion::AIC: return "aic";
        case Criterion::AICc: return "aicc";
        case Criterion::BIC: return "bic";
    }
    return "aicc";
}

Criterion parse_criterion(const std::string& name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "aic") return Criterion::AIC;
    if (lower == "aicc") return Criterion::AICc;
    if (lower == "bic") return Criterion::BIC;
    throw config_error("InvalidCriterion", fmt::format("unknown information criterion '{}'", name));
}

double criterion_value(const CriteriaSet& c, Criterion which) {
    switch (which) {
        case Criterion::AIC: return c.aic;
        case Criterion::AICc: return c.aicc;
        case Criterion::BIC: return c.bic;
    }
    return c.aicc;
}

namespace {

struct FitOutcome {
    std::optional<FittedModel> model;
    std::optional<CriteriaSet> criteria;
    std::string failure;
    std::string code;
};

bool ranks_before(const SarimaOrder& a, double va, const SarimaOrder& b, double vb) {
    if (std::abs(va - vb) > 1e-9) return va < vb;
    if (a.arma_terms() != b.arma_terms()) return a.arma_terms() < b.arma_terms();
    return std::tie(a.p, a.q, a.P, a.Q) < std::tie(b.p, b.q, b.P, b.Q);
}

}  // namespace

SearchResult auto_select(const TimeSeries& y, int s, const SearchConfig& config) {
    SearchResult result;
    auto note = [&](std::string msg) {
        warn(msg);
        result.warnings.push_back(std::move(msg));
    };

    int period = std::max(1, s);
    if (period > 1 && y.size() < static_cast<std::size_t>(period) + 2) {
        note(fmt::format("auto_select: {} observations < s + 2 = {}; searching non-seasonal orders only", y.size(),
                         period + 2));
        period = 1;
    }

    if (config.differencing) {
        result.d = config.differencing->first;
        result.D = period > 1 ? config.differencing->second : 0;
    } else {
        const auto choice = choose_differencing(y, period);
        result.d = choice.d;
        result.D = choice.D;
        if (choice.too_short) result.warnings.emplace_back("differencing choice limited by series length");
    }

    const int max_P = period > 1 ? config.max_P : 0;
    const int max_Q = period > 1 ? config.max_Q : 0;
    std::vector<SarimaOrder> orders;
    for (int p = 0; p <= config.max_p; ++p)
        for (int q = 0; q <= config.max_q; ++q)
            for (int P = 0; P <= max_P; ++P)
                for (int Q = 0; Q <= max_Q; ++Q) {
                    SarimaOrder o{p, result.d, q, P, result.D, Q, period};
                    if (check_feasibility(o, y.size()).feasible_for_fit) orders.push_back(o);
                }
    if (orders.empty())
        throw config_error("NoFeasibleModel",
                           fmt::format("no SARIMA order with d = {}, D = {}, s = {} satisfies (D+P+1)s+p+d <= T and "
                                       "(Q+1)s+q <= T for T = {}",
                                       result.d, result.D, period, y.size()));

    std::size_t conditioning = 0;
    for (const auto& o : orders)
        conditioning = std::max<std::size_t>(conditioning, static_cast<std::size_t>(std::max(o.p + o.P * o.s, o.q + o.Q * o.s)));
    // Never condition away the whole sample: drop to per-order conditioning if needed.
    const std::size_t usable = y.size() - static_cast<std::size_t>(result.d + result.D * period);
    if (conditioning + 4 > usable) conditioning = 0;

    std::vector<FitOutcome> outcomes(orders.size());
    detail::parallel_for(orders.size(), config.jobs, [&](std::size_t i) {
        const auto& o = orders[i];
        const bool intercept = config.include_intercept.value_or(default_intercept(o));
        try {
            FitOptions opts;
            opts.min_conditioning = conditioning;
            auto m = fit(y, o, intercept, opts);
            outcomes[i].criteria = information_criteria(m.log_likelihood, criteria_parameter_count(m), m.effective_n());
            outcomes[i].model = std::move(m);
        } catch (const Error& e) {
            outcomes[i].failure = e.what();
            outcomes[i].code = e.code();
        }
    });

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < orders.size(); ++i) {
        Candidate c;
        c.order = orders[i];
        c.criteria = outcomes[i].criteria;
        c.converged = outcomes[i].model && outcomes[i].model->converged;
        c.failure = outcomes[i].failure;
        if (outcomes[i].model && !c.converged) c.failure = "simplex search did not converge";
        result.candidates.push_back(c);
        if (!c.converged || !c.criteria) continue;
        const double v = criterion_value(*c.criteria, config.criterion);
        if (!best || ranks_before(c.order, v, orders[*best],
                                  criterion_value(*outcomes[*best].criteria, config.criterion)))
            best = i;
    }
    if (!best) {
        // Fall back to any fitted model, even if flagged, before giving up.
        for (std::size_t i = 0; i < orders.size(); ++i)
            if (outcomes[i].model && outcomes[i].criteria) {
                if (!best || ranks_before(orders[i], criterion_value(*outcomes[i].criteria, config.criterion),
                                          orders[*best],
                                          criterion_value(*outcomes[*best].criteria, config.criterion)))
                    best = i;
            }
        if (!best) {
            const auto& first = outcomes.front();
            if (first.code == "DegenerateSeries") throw data_error(first.code, first.failure);
            throw config_error("NoFeasibleModel",
                               fmt::format("no candidate SARIMA model could be fitted: {}", first.failure));
        }
        note("auto_select: no candidate converged; using the best non-converged fit");
    }

    result.best = *outcomes[*best].model;
    result.best_criteria = *outcomes[*best].criteria;
    const int K = result.best.order.arma_terms();
    const auto& resid = result.best.residuals;
    if (resid.size() > static_cast<std::size_t>(K) + 2) {
        result.best_ljung_box =
            ljung_box(resid.values(), default_ljung_box_lags(resid.size(), period, K), K);
    } else {
        result.warnings.emplace_back("too few residuals for a Ljung-Box test");
    }
    return result;
}

}  // namespace hts
