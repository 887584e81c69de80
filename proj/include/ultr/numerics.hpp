#pragma once

#include <Eigen/Core>
#include <functional>

namespace ultr {

// standard normal density
double norm_pdf(double z);

// log of the standard normal density
double log_norm_pdf(double z);

// standard normal CDF, Cody-style rational approximations; absolute error
// well below 1e-12 on [-8, 8]
double norm_cdf(double z);

// log of the standard normal CDF, stable down to z = -37 and beyond
double log_norm_cdf(double z);

// inverse Mills ratio phi(z)/Phi(z), stable in the deep left tail
double inverse_mills(double z);

double sigmoid(double z);
double log_sigmoid(double z);

// regularized incomplete beta I_x(a, b) via Lentz continued fraction
double incomplete_beta(double a, double b, double x);

double student_t_cdf(double t, double df);

// p-quantile of Student's t; used for confidence intervals
double student_t_quantile(double p, double df);

struct GradCheckReport {
    double max_rel_err = 0.0;
    Eigen::Index worst_index = -1;
};

// Compare an analytic gradient against central finite differences.
// Relative error denominator is max(|analytic|, |numeric|, 1e-8).
GradCheckReport grad_check(const std::function<double(const Eigen::VectorXd&)>& loss,
                           const Eigen::VectorXd& params,
                           const Eigen::VectorXd& analytic_grad,
                           double step);

}  // namespace ultr
