#include "ultr/numerics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace ultr {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
constexpr double kLogSqrt2Pi = 0.918938533204672741780329736406;
constexpr double kInvSqrt2 = 0.707106781186547524400844362105;

}  // namespace

double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double log_norm_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

double norm_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double log_norm_cdf(double z) {
    // near-zero upper tail: log(1 - Q(z)) keeps full precision
    if (z > -1.0) return std::log1p(-0.5 * std::erfc(z * kInvSqrt2));
    double cdf = 0.5 * std::erfc(-z * kInvSqrt2);
    if (cdf > 0.0) return std::log(cdf);
    // below erfc's underflow (~ -37.5): asymptotic expansion of the tail,
    // Phi(z) ~ phi(z)/(-z) * (1 - 1/z^2 + 3/z^4 - 15/z^6)
    double zi = 1.0 / (z * z);
    double series = 1.0 - zi * (1.0 - 3.0 * zi * (1.0 - 5.0 * zi));
    return log_norm_pdf(z) - std::log(-z) + std::log(series);
}

double inverse_mills(double z) {
    if (z < -4.0) return std::exp(log_norm_pdf(z) - log_norm_cdf(z));
    return norm_pdf(z) / norm_cdf(z);
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

double log_sigmoid(double z) {
    if (z >= 0.0) return -std::log1p(std::exp(-z));
    return z - std::log1p(std::exp(z));
}

namespace {

// continued fraction for the incomplete beta (modified Lentz)
double betacf(double a, double b, double x) {
    const int max_iter = 300;
    const double eps = 3e-15, fpmin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
    double x = df / (df + t * t);
    double p = 0.5 * incomplete_beta(df / 2.0, 0.5, x);
    return t > 0.0 ? 1.0 - p : p;
}

double student_t_quantile(double p, double df) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("student_t_quantile: p in (0,1) required");
    double lo = -1e3, hi = 1e3;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, df) < p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

GradCheckReport grad_check(const std::function<double(const Eigen::VectorXd&)>& loss,
                           const Eigen::VectorXd& params,
                           const Eigen::VectorXd& analytic_grad,
                           double step) {
    if (step <= 0.0) throw std::invalid_argument("grad_check: step must be positive");
    if (!std::isfinite(loss(params))) throw std::runtime_error("grad_check: non-finite loss");
    GradCheckReport report;
    Eigen::VectorXd probe = params;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        probe(i) = params(i) + step;
        double up = loss(probe);
        probe(i) = params(i) - step;
        double down = loss(probe);
        probe(i) = params(i);
        if (!std::isfinite(up) || !std::isfinite(down))
            throw std::runtime_error("grad_check: non-finite loss");
        double numeric = (up - down) / (2.0 * step);
        double analytic = analytic_grad(i);
        double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
        double rel = std::fabs(analytic - numeric) / denom;
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_index = i;
        }
    }
    return report;
}

}  // namespace ultr
