#pragma once

#include "smoe/tensor_io.hpp"

#include <limits>
#include <optional>
#include <span>
#include <string_view>

namespace smoe::stats {

enum class StatisticKind {
    smoe_scale,
    normal_mean,
    normal_std,
    shannon_entropy,
    lognormal_mean,
    lognormal_entropy,
    truncnormal_mean,
    truncnormal_std,
    truncnormal_entropy,
};

std::string_view to_string(StatisticKind kind);
std::optional<StatisticKind> parse_statistic(std::string_view name);

// Truncated-normal kinds read the tensor before the rectifier; all others after.
Stage required_stage(StatisticKind kind);

// Stand-in for an entropy of -inf (zero-spread column). Finite so that map
// normalization stays well defined; compute_scale_map remaps it.
inline constexpr double kDegenerateEntropy = std::numeric_limits<double>::lowest();

struct NormalStats {
    double mean;
    double std;
};

struct LogNormalStats {
    double mean;
    double entropy;  // bits
};

struct TruncatedNormalParams {
    double mu;     // parent-normal mean
    double sigma;  // parent-normal std
    double trunc_mean;
    double trunc_std;
    double trunc_entropy;  // nats
};

// mean * (log2(mean) - mean(log2 x)) over epsilon-shifted values. Never negative.
double smoe_scale(std::span<const double> x, double epsilon = kDefaultEpsilon);
double smoe_scale(const ActivationColumn& column);

// Population moments (divide by r).
NormalStats normal_stats(std::span<const double> x);
NormalStats normal_stats(const ActivationColumn& column);

// Entropy in bits of the epsilon-shifted column normalized onto the simplex.
double shannon_entropy(std::span<const double> x, double epsilon = kDefaultEpsilon);
double shannon_entropy(const ActivationColumn& column);

LogNormalStats lognormal_stats(std::span<const double> x, double epsilon = kDefaultEpsilon);
LogNormalStats lognormal_stats(const ActivationColumn& column);

// Moment-fit a parent normal to pre-activation values, then truncate below 0.
TruncatedNormalParams truncnormal_stats(std::span<const double> x);
TruncatedNormalParams truncnormal_stats(const ActivationColumn& column);
// Closed-form truncation of N(mu, sigma^2) to [0, inf).
TruncatedNormalParams truncate_normal_at_zero(double mu, double sigma);

// Full maximum-likelihood Gamma scale estimate (shape by Newton iteration to
// 1e-10). Reference only; returns 0 for zero-dispersion columns.
double gamma_scale_oracle(std::span<const double> x, double epsilon = kDefaultEpsilon);
double gamma_scale_oracle(const ActivationColumn& column);

// Shape estimate used by the oracle, exposed for order checks against s.
double gamma_shape_mle(double s);

// Dispatch on kind; degenerate entropies come back as kDegenerateEntropy.
double column_statistic(StatisticKind kind, std::span<const double> x,
                        double epsilon = kDefaultEpsilon);

double standard_normal_cdf(double z);
double standard_normal_pdf(double z);

}  // namespace smoe::stats
