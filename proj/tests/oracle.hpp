// Long-double reference values for the standard normal CDF, computed from
// first principles (Taylor series in the bulk, Laplace continued fraction in
// the tail) so library implementations can be checked against something
// independent.
#pragma once

#include <cmath>

namespace oracle {

constexpr long double kInvSqrt2Pi = 0.3989422804014326779399460599343818684759L;

inline long double norm_pdf(long double z) { return kInvSqrt2Pi * expl(-0.5L * z * z); }

// upper tail Q(x) = 1 - Phi(x) for x >= 0
inline long double upper_tail(long double x) {
    if (x < 5.0L) {
        // Phi(x) - 1/2 = pdf(x) * sum_k x^(2k+1) / (1*3*5*...*(2k+1))
        long double term = x, sum = x;
        for (int k = 1; k < 500; ++k) {
            term *= x * x / static_cast<long double>(2 * k + 1);
            sum += term;
            if (term < 1e-25L * sum) break;
        }
        return 0.5L - norm_pdf(x) * sum;
    }
    // Q(x) = pdf(x) / (x + 1/(x + 2/(x + 3/(...)))), modified Lentz
    const long double tiny = 1e-4000L;
    long double f = x, c = x, d = 0.0L;
    for (int n = 1; n < 200000; ++n) {
        long double a = static_cast<long double>(n);
        d = x + a * d;
        if (d == 0.0L) d = tiny;
        c = x + a / c;
        if (c == 0.0L) c = tiny;
        d = 1.0L / d;
        long double delta = c * d;
        f *= delta;
        if (fabsl(delta - 1.0L) < 1e-21L) break;
    }
    return norm_pdf(x) / f;
}

inline long double norm_cdf(long double z) {
    return z >= 0.0L ? 1.0L - upper_tail(z) : upper_tail(-z);
}

inline long double log_norm_cdf(long double z) {
    if (z >= 0.0L) return log1pl(-upper_tail(z));
    return logl(upper_tail(-z));
}

}  // namespace oracle
