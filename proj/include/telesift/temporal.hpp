#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace telesift {

// Monthly event counts per year, months 1..12.
struct MonthlyMatrix {
    std::map<int, std::array<std::uint64_t, 12>> counts;

    void add(int year, int month, std::uint64_t n = 1) {
        if (month < 1 || month > 12) throw std::invalid_argument("month out of range");
        auto& row = counts.try_emplace(year).first->second;
        row[std::size_t(month - 1)] += n;
    }

    std::uint64_t total(int year) const {
        auto it = counts.find(year);
        if (it == counts.end()) return 0;
        std::uint64_t sum = 0;
        for (auto c : it->second) sum += c;
        return sum;
    }

    std::vector<int> years() const {
        std::vector<int> out;
        for (const auto& [y, _] : counts) out.push_back(y);
        return out;
    }
};

// Monthly percentage distribution and its cumulative form for one year.
struct YearDistribution {
    int year = 0;
    std::array<double, 12> p{};      // percent per month
    std::array<double, 12> p_hat{};  // cumulative percent
    int m_star = 0;                  // threshold month, 0 while unset
    double a_v = 0.0;                // average growth slope, valid once m_star >= 2
};

inline YearDistribution monthly_distribution(const MonthlyMatrix& matrix, int year) {
    std::uint64_t total = matrix.total(year);
    if (total == 0)
        throw std::domain_error("no counts recorded for year " + std::to_string(year));
    const auto& row = matrix.counts.at(year);
    YearDistribution dist;
    dist.year = year;
    double cumulative = 0.0;
    for (std::size_t m = 0; m < 12; ++m) {
        dist.p[m] = 100.0 * double(row[m]) / double(total);
        cumulative += dist.p[m];
        dist.p_hat[m] = cumulative;
    }
    return dist;
}

// Smallest month whose cumulative share reaches the threshold. Month 12
// always qualifies because the cumulative distribution ends at 100.
inline int threshold_month(const YearDistribution& dist, double threshold_percent = 79.0) {
    for (std::size_t m = 0; m < 12; ++m)
        if (dist.p_hat[m] >= threshold_percent) return int(m + 1);
    return 12;
}

// Average monthly increase of the cumulative share up to the threshold
// month: (p_hat[m*] - p_hat[1]) / (m* - 1).
inline double growth_slope(const YearDistribution& dist) {
    if (dist.m_star < 2)
        throw std::domain_error("growth slope undefined for threshold month 1");
    return (dist.p_hat[std::size_t(dist.m_star - 1)] - dist.p_hat[0]) /
           double(dist.m_star - 1);
}

// Convenience: distribution with threshold month and slope filled in.
inline YearDistribution year_trend(const MonthlyMatrix& matrix, int year,
                                   double threshold_percent = 79.0) {
    auto dist = monthly_distribution(matrix, year);
    dist.m_star = threshold_month(dist, threshold_percent);
    if (dist.m_star >= 2) dist.a_v = growth_slope(dist);
    return dist;
}

struct LogisticParams {
    double L = 0.0;   // asymptote
    double k = 0.0;   // rate
    double t0 = 0.0;  // midpoint
    std::array<std::array<double, 3>, 3> covariance{};
    double ssr = 0.0;
    int iterations = 0;
    std::size_t n = 0;
};

inline double logistic_eval(const LogisticParams& p, double t) {
    return p.L / (1.0 + std::exp(-p.k * (t - p.t0)));
}

class FitError : public std::runtime_error {
public:
    FitError(const std::string& what, std::vector<std::string> trace = {})
        : std::runtime_error(what), trace_(std::move(trace)) {}
    const std::vector<std::string>& trace() const { return trace_; }

private:
    std::vector<std::string> trace_;
};

namespace detail {

// Solves A x = b for a 3x3 system with partial pivoting. Returns false when
// the system is singular.
inline bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b,
                   std::array<double, 3>& x) {
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        if (std::fabs(a[pivot][col]) < 1e-300) return false;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            double f = a[r][col] / a[col][col];
            for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (int i = 0; i < 3; ++i) x[i] = b[i] / a[i][i];
    return true;
}

inline bool invert3(const std::array<std::array<double, 3>, 3>& a,
                    std::array<std::array<double, 3>, 3>& inv) {
    for (int col = 0; col < 3; ++col) {
        std::array<double, 3> e{};
        e[col] = 1.0;
        std::array<double, 3> x{};
        if (!solve3(a, e, x)) return false;
        for (int r = 0; r < 3; ++r) inv[r][col] = x[r];
    }
    return true;
}

}  // namespace detail

// Least-squares logistic fit via damped Gauss-Newton from a fixed
// initialization (L = 2 max y, k = 1, t0 = median t). Converges when the
// step norm drops below step_tol; parameter covariance comes from the
// Jacobian at the optimum.
inline LogisticParams fit_logistic(std::span<const std::pair<double, double>> points,
                                   int max_iterations = 200, double step_tol = 1e-10) {
    if (points.size() < 3)
        throw FitError("logistic fit needs at least 3 points");
    for (const auto& [t, y] : points)
        if (!(y > 0.0)) throw FitError("logistic fit needs positive values");

    double max_y = 0.0;
    std::vector<double> ts;
    for (const auto& [t, y] : points) {
        max_y = std::max(max_y, y);
        ts.push_back(t);
    }
    std::sort(ts.begin(), ts.end());
    double median_t = ts.size() % 2 == 1
                          ? ts[ts.size() / 2]
                          : 0.5 * (ts[ts.size() / 2 - 1] + ts[ts.size() / 2]);

    LogisticParams params;
    params.L = 2.0 * max_y;
    params.k = 1.0;
    params.t0 = median_t;
    params.n = points.size();

    auto ssr_of = [&](double L, double k, double t0) {
        double ssr = 0.0;
        for (const auto& [t, y] : points) {
            double r = L / (1.0 + std::exp(-k * (t - t0))) - y;
            ssr += r * r;
        }
        return ssr;
    };

    std::vector<std::string> trace;
    double ssr = ssr_of(params.L, params.k, params.t0);
    std::array<std::array<double, 3>, 3> jtj{};
    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        jtj = {};
        std::array<double, 3> jtr{};
        for (const auto& [t, y] : points) {
            double s = 1.0 / (1.0 + std::exp(-params.k * (t - params.t0)));
            double f = params.L * s;
            double r = f - y;
            std::array<double, 3> g{s, params.L * s * (1.0 - s) * (t - params.t0),
                                    -params.L * s * (1.0 - s) * params.k};
            for (int a = 0; a < 3; ++a) {
                jtr[a] += g[a] * r;
                for (int b = 0; b < 3; ++b) jtj[a][b] += g[a] * g[b];
            }
        }
        std::array<double, 3> step{};
        if (!detail::solve3(jtj, {-jtr[0], -jtr[1], -jtr[2]}, step)) {
            trace.push_back("iteration " + std::to_string(iter) +
                            ": singular normal equations");
            throw FitError("logistic fit failed: singular Jacobian", trace);
        }

        // Step halving until the residual stops growing.
        double scale = 1.0;
        double next_ssr = 0.0;
        bool accepted = false;
        for (int half = 0; half < 60; ++half) {
            next_ssr = ssr_of(params.L + scale * step[0], params.k + scale * step[1],
                              params.t0 + scale * step[2]);
            if (next_ssr <= ssr * (1.0 + 1e-12)) {
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) {
            trace.push_back("iteration " + std::to_string(iter) +
                            ": no damping step reduced the residual");
            throw FitError("logistic fit failed to converge", trace);
        }
        params.L += scale * step[0];
        params.k += scale * step[1];
        params.t0 += scale * step[2];
        ssr = next_ssr;
        double step_norm = scale * std::sqrt(step[0] * step[0] + step[1] * step[1] +
                                             step[2] * step[2]);
        trace.push_back("iteration " + std::to_string(iter) + ": ssr " +
                        std::to_string(ssr) + ", step " + std::to_string(step_norm));
        if (step_norm < step_tol) break;
        if (!std::isfinite(params.L) || !std::isfinite(params.k) ||
            !std::isfinite(params.t0))
            throw FitError("logistic fit diverged", trace);
    }
    params.iterations = iter + 1;
    params.ssr = ssr;

    std::array<std::array<double, 3>, 3> inv{};
    if (!detail::invert3(jtj, inv))
        throw FitError("logistic fit failed: singular Jacobian at optimum", trace);
    double dof = double(points.size()) > 3 ? double(points.size()) - 3 : 1.0;
    double sigma2 = ssr / dof;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) params.covariance[a][b] = sigma2 * inv[a][b];
    return params;
}

// Normal-approximation 95% prediction band at t, from the parameter
// covariance propagated through the gradient.
struct BandPoint {
    double t = 0.0;
    double mean = 0.0;
    double se = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

inline BandPoint logistic_band(const LogisticParams& p, double t) {
    double s = 1.0 / (1.0 + std::exp(-p.k * (t - p.t0)));
    std::array<double, 3> g{s, p.L * s * (1.0 - s) * (t - p.t0),
                            -p.L * s * (1.0 - s) * p.k};
    double var = 0.0;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) var += g[a] * p.covariance[a][b] * g[b];
    BandPoint band;
    band.t = t;
    band.mean = p.L * s;
    band.se = var > 0 ? std::sqrt(var) : 0.0;
    band.lo = band.mean - 1.96 * band.se;
    band.hi = band.mean + 1.96 * band.se;
    return band;
}

struct SlopeBand {
    double low = 0.0;
    double mean = 0.0;
    double high = 0.0;
};

struct ThresholdInterval {
    double m_low = 1.0;
    double m_mean = 1.0;
    double m_high = 1.0;
    bool degenerate = false;  // first-month share already past the threshold
};

// Threshold-month prediction from slope bounds:
//   m = 1 + (80 - p_hat_1) / slope
// Higher slopes reach the threshold earlier, so the slope band's upper end
// gives the interval's lower end.
inline ThresholdInterval predict_threshold_interval(const SlopeBand& slopes,
                                                    double p_hat_1,
                                                    double threshold_percent = 80.0) {
    if (!(slopes.low > 0.0) || !(slopes.mean > 0.0) || !(slopes.high > 0.0))
        throw std::domain_error("slope bounds must be positive");
    ThresholdInterval out;
    if (p_hat_1 >= threshold_percent) {
        out.degenerate = true;
        return out;
    }
    double need = threshold_percent - p_hat_1;
    out.m_low = 1.0 + need / slopes.high;
    out.m_mean = 1.0 + need / slopes.mean;
    out.m_high = 1.0 + need / slopes.low;
    return out;
}

struct CorrelationResult {
    double r = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

namespace detail {

// Regularized incomplete beta by Lentz continued fraction.
inline double beta_cf(double a, double b, double x) {
    constexpr int max_iters = 300;
    constexpr double eps = 1e-15, tiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iters; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

inline double reg_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log(1.0 - x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace detail

// Product-moment correlation with a two-sided p-value from the t-statistic
// r sqrt((n-2)/(1-r^2)) against Student-t with n-2 degrees of freedom.
inline CorrelationResult pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("series lengths differ");
    if (a.size() < 3) throw std::invalid_argument("pearson needs at least 3 points");
    std::size_t n = a.size();
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= double(n);
    mean_b /= double(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double da = a[i] - mean_a, db = b[i] - mean_b;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw std::domain_error("correlation undefined for zero-variance series");

    CorrelationResult res;
    res.n = n;
    res.r = sab / std::sqrt(saa * sbb);
    double nu = double(n - 2);
    double r2 = res.r * res.r;
    if (r2 >= 1.0) {
        res.p_value = 0.0;
    } else {
        double t2 = r2 * nu / (1.0 - r2);
        res.p_value = detail::reg_incomplete_beta(nu / 2.0, 0.5, nu / (nu + t2));
    }
    return res;
}

}  // namespace telesift
