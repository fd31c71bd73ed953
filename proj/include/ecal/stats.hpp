#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace ecal {

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;  // two-sided
};

/// Welch's unequal-variance t statistic with Welch-Satterthwaite degrees of
/// freedom; two-sided p through the regularized incomplete beta function.
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

/// I_x(a, b), regularized. Continued-fraction evaluation; exact 0/1 at the
/// endpoints.
double regularized_incomplete_beta(double a, double b, double x);

/// Rank AUC with midrank tie handling. Absent when every item is positive
/// or every item is negative.
std::optional<double> rank_auc(const std::vector<double>& scores,
                               const std::vector<std::uint8_t>& is_positive);

double mean_of(const std::vector<double>& xs);
double sample_stddev(const std::vector<double>& xs);

}  // namespace ecal
