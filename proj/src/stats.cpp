#include "smoe/stats.hpp"

#include "smoe/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <utility>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

namespace smoe::stats {

namespace {

constexpr std::array<std::pair<StatisticKind, std::string_view>, 9> kNames{{
    {StatisticKind::smoe_scale, "smoe_scale"},
    {StatisticKind::normal_mean, "normal_mean"},
    {StatisticKind::normal_std, "normal_std"},
    {StatisticKind::shannon_entropy, "shannon_entropy"},
    {StatisticKind::lognormal_mean, "lognormal_mean"},
    {StatisticKind::lognormal_entropy, "lognormal_entropy"},
    {StatisticKind::truncnormal_mean, "truncnormal_mean"},
    {StatisticKind::truncnormal_std, "truncnormal_std"},
    {StatisticKind::truncnormal_entropy, "truncnormal_entropy"},
}};

constexpr double kSigmaFloor = 1e-12;
// Beyond this truncation point erfc and the pdf head for underflow; switch to
// the asymptotic Mills ratio.
constexpr double kTailSwitch = 30.0;

double mean_of(std::span<const double> x) {
    double sum = 0.0;
    for (double v : x) sum += v;
    return sum / static_cast<double>(x.size());
}

void require_nonempty(std::span<const double> x) {
    if (x.empty()) throw UsageError("statistic needs a column of length >= 1");
}

}  // namespace

std::string_view to_string(StatisticKind kind) {
    for (const auto& [k, name] : kNames)
        if (k == kind) return name;
    return "unknown";
}

std::optional<StatisticKind> parse_statistic(std::string_view name) {
    for (const auto& [k, n] : kNames)
        if (n == name) return k;
    return std::nullopt;
}

Stage required_stage(StatisticKind kind) {
    switch (kind) {
        case StatisticKind::truncnormal_mean:
        case StatisticKind::truncnormal_std:
        case StatisticKind::truncnormal_entropy:
            return Stage::pre_activation;
        default:
            return Stage::post_activation;
    }
}

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double standard_normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double smoe_scale(std::span<const double> x, double epsilon) {
    require_nonempty(x);
    double sum = 0.0;
    double lo = x[0];
    double hi = x[0];
    for (double v : x) {
        sum += v + epsilon;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo == hi) return 0.0;
    const double r = static_cast<double>(x.size());
    const double mu = sum / r;
    double acc = 0.0;
    for (double v : x) acc += std::log2(mu / (v + epsilon));
    return std::max(0.0, mu * acc / r);
}

double smoe_scale(const ActivationColumn& column) {
    return smoe_scale(column.values(), column.epsilon());
}

NormalStats normal_stats(std::span<const double> x) {
    require_nonempty(x);
    const double mean = mean_of(x);
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(x.size()))};
}

NormalStats normal_stats(const ActivationColumn& column) { return normal_stats(column.values()); }

double shannon_entropy(std::span<const double> x, double epsilon) {
    require_nonempty(x);
    double total = 0.0;
    for (double v : x) total += v + epsilon;
    double h = 0.0;
    for (double v : x) {
        const double p = (v + epsilon) / total;
        h -= p * std::log2(p);
    }
    return std::max(0.0, h);
}

double shannon_entropy(const ActivationColumn& column) {
    return shannon_entropy(column.values(), column.epsilon());
}

LogNormalStats lognormal_stats(std::span<const double> x, double epsilon) {
    require_nonempty(x);
    const double r = static_cast<double>(x.size());
    double m = 0.0;
    for (double v : x) m += std::log2(v + epsilon);
    m /= r;
    double ss = 0.0;
    for (double v : x) {
        const double d = std::log2(v + epsilon) - m;
        ss += d * d;
    }
    const double s = std::sqrt(ss / r);
    const double ln2 = std::numbers::ln2;

    LogNormalStats out{};
    out.mean = std::exp2(m + s * s * ln2 / 2.0);
    if (s < kSigmaFloor) {
        out.entropy = kDegenerateEntropy;
    } else {
        out.entropy = m + 0.5 * std::log2(2.0 * std::numbers::pi * std::numbers::e * s * s * ln2 * ln2);
    }
    return out;
}

LogNormalStats lognormal_stats(const ActivationColumn& column) {
    return lognormal_stats(column.values(), column.epsilon());
}

TruncatedNormalParams truncate_normal_at_zero(double mu, double sigma) {
    TruncatedNormalParams p{mu, sigma, 0.0, 0.0, kDegenerateEntropy};
    if (!(sigma >= kSigmaFloor)) {
        p.trunc_mean = std::max(mu, 0.0);
        return p;
    }
    const double alpha = -mu / sigma;
    double lambda = 0.0;
    double log_z = 0.0;
    if (alpha < kTailSwitch) {
        const double z = 0.5 * std::erfc(alpha / std::numbers::sqrt2);
        lambda = standard_normal_pdf(alpha) / z;
        log_z = std::log(z);
    } else {
        // Q(a)/pdf(a) ~ 1/a - 1/a^3 + 3/a^5 - 15/a^7
        const double a2 = alpha * alpha;
        const double mills = (1.0 - (1.0 - (3.0 - 15.0 / a2) / a2) / a2) / alpha;
        lambda = 1.0 / mills;
        log_z = -0.5 * a2 - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(mills);
    }
    p.trunc_mean = mu + sigma * lambda;
    const double var_ratio = std::max(0.0, 1.0 + alpha * lambda - lambda * lambda);
    p.trunc_std = sigma * std::sqrt(var_ratio);
    p.trunc_entropy = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e) + std::log(sigma) + log_z +
                      alpha * lambda / 2.0;
    return p;
}

TruncatedNormalParams truncnormal_stats(std::span<const double> x) {
    const auto parent = normal_stats(x);
    return truncate_normal_at_zero(parent.mean, parent.std);
}

TruncatedNormalParams truncnormal_stats(const ActivationColumn& column) {
    return truncnormal_stats(column.values());
}

double gamma_shape_mle(double s) {
    if (!(s > 0.0)) return 0.0;
    double k = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
    for (int iter = 0; iter < 100; ++iter) {
        const double f = std::log(k) - boost::math::digamma(k) - s;
        const double df = 1.0 / k - boost::math::trigamma(k);
        double next = k - f / df;
        if (!(next > 0.0)) next = k / 2.0;
        const double step = next - k;
        k = next;
        if (std::abs(step) < 1e-10) break;
    }
    return k;
}

double gamma_scale_oracle(std::span<const double> x, double epsilon) {
    require_nonempty(x);
    const double r = static_cast<double>(x.size());
    double sum = 0.0;
    double log_sum = 0.0;
    for (double v : x) {
        const double y = v + epsilon;
        if (!(y > 0.0)) throw UsageError("gamma oracle needs positive values after the epsilon shift");
        sum += y;
        log_sum += std::log(y);
    }
    const double mean = sum / r;
    const double s = std::log(mean) - log_sum / r;
    if (!(s > 0.0)) return 0.0;
    return mean / gamma_shape_mle(s);
}

double gamma_scale_oracle(const ActivationColumn& column) {
    return gamma_scale_oracle(column.values(), column.epsilon());
}

double column_statistic(StatisticKind kind, std::span<const double> x, double epsilon) {
    switch (kind) {
        case StatisticKind::smoe_scale: return smoe_scale(x, epsilon);
        case StatisticKind::normal_mean: return normal_stats(x).mean;
        case StatisticKind::normal_std: return normal_stats(x).std;
        case StatisticKind::shannon_entropy: return shannon_entropy(x, epsilon);
        case StatisticKind::lognormal_mean: return lognormal_stats(x, epsilon).mean;
        case StatisticKind::lognormal_entropy: return lognormal_stats(x, epsilon).entropy;
        case StatisticKind::truncnormal_mean: return truncnormal_stats(x).trunc_mean;
        case StatisticKind::truncnormal_std: return truncnormal_stats(x).trunc_std;
        case StatisticKind::truncnormal_entropy: return truncnormal_stats(x).trunc_entropy;
    }
    throw UsageError("unknown statistic kind");
}

}  // namespace smoe::stats
