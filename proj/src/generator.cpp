#include "hopac/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/bernoulli.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/polygamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

namespace hopac {

namespace {

constexpr double kEndpointGuard = 1e-10;
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

// One-parameter generators (beta = 1). All five families are strict, so
// psi(t) > 0 for finite t and psi^{-1}(0) = +inf.

double base_psi(Family family, double theta, double t) {
    if (t == kInf) return 0.0;
    switch (family) {
        case Family::A: {
            const double e = std::exp(-t);
            return (1.0 - theta) * e / (1.0 - theta * e);
        }
        case Family::C:
            return std::exp(-std::log1p(t) / theta);
        case Family::F: {
            const double c = -std::expm1(-theta);
            return -std::log1p(-c * std::exp(-t)) / theta;
        }
        case Family::G:
            return std::exp(-std::pow(t, 1.0 / theta));
        case Family::J:
            return -std::expm1(std::log(-std::expm1(-t)) / theta);
    }
    return 0.0;
}

double base_psi_inverse(Family family, double theta, double s) {
    if (s <= 0.0) return kInf;
    if (s >= 1.0) return 0.0;
    switch (family) {
        case Family::A:
            return std::log((1.0 - theta) / s + theta);
        case Family::C:
            return std::expm1(-theta * std::log(s));
        case Family::F: {
            const double c = -std::expm1(-theta);
            return -std::log(-std::expm1(-theta * s) / c);
        }
        case Family::G:
            return std::pow(-std::log(s), theta);
        case Family::J:
            return -std::log1p(-std::exp(theta * std::log1p(-s)));
    }
    return 0.0;
}

double base_log_neg_d1(Family family, double theta, double t) {
    switch (family) {
        case Family::A: {
            const double e = std::exp(-t);
            return std::log1p(-theta) - t - 2.0 * std::log1p(-theta * e);
        }
        case Family::C:
            return -std::log(theta) - (1.0 / theta + 1.0) * std::log1p(t);
        case Family::F: {
            const double log_w = std::log(-std::expm1(-theta)) - t;
            return log_w - std::log(theta) - std::log1p(-std::exp(log_w));
        }
        case Family::G: {
            const double a = 1.0 / theta;
            return std::log(a) + (a - 1.0) * std::log(t) - std::pow(t, a);
        }
        case Family::J: {
            const double a = 1.0 / theta;
            const double x = -std::expm1(-t);
            return std::log(a) + (a - 1.0) * std::log(x) - t;
        }
    }
    return 0.0;
}

double base_log_d2(Family family, double theta, double t) {
    switch (family) {
        case Family::A: {
            const double e = std::exp(-t);
            return std::log1p(-theta) - t + std::log1p(theta * e) - 3.0 * std::log1p(-theta * e);
        }
        case Family::C: {
            const double a = 1.0 / theta;
            return std::log(a) + std::log(a + 1.0) - (a + 2.0) * std::log1p(t);
        }
        case Family::F: {
            const double log_w = std::log(-std::expm1(-theta)) - t;
            return log_w - std::log(theta) - 2.0 * std::log1p(-std::exp(log_w));
        }
        case Family::G: {
            const double a = 1.0 / theta;
            const double ta = std::pow(t, a);
            return -ta + std::log(a) + (a - 2.0) * std::log(t) + std::log(a * ta + (1.0 - a));
        }
        case Family::J: {
            const double a = 1.0 / theta;
            const double x = -std::expm1(-t);
            return std::log(a) - t + (a - 2.0) * std::log(x) +
                   std::log(x + (1.0 - a) * std::exp(-t));
        }
    }
    return 0.0;
}

double debye1(double x) {
    // D_1(x) = (1/x) int_0^x t / (e^t - 1) dt.
    if (x < 0.0) return debye1(-x) - x / 2.0;
    if (x < 2.0) {
        // Bernoulli series, converging for |x| < 2 pi.
        double sum = 1.0 - x / 4.0;
        double power = 1.0;
        double factorial = 1.0;
        for (int k = 1; k <= 30; ++k) {
            power *= x * x;
            factorial *= (2.0 * k - 1.0) * (2.0 * k);
            const double term = boost::math::bernoulli_b2n<double>(k) * power / ((2.0 * k + 1.0) * factorial);
            sum += term;
            if (std::abs(term) < 1e-17) break;
        }
        return sum;
    }
    // int_0^x = pi^2/6 - sum_k e^{-kx} (x/k + 1/k^2).
    double tail = 0.0;
    for (int k = 1; k < 200; ++k) {
        const double term = std::exp(-k * x) * (x / k + 1.0 / (static_cast<double>(k) * k));
        tail += term;
        if (term < 1e-18) break;
    }
    return (std::numbers::pi * std::numbers::pi / 6.0 - tail) / x;
}

double joe_base_tau(double theta) {
    if (theta <= 1.0) return 0.0;
    // tau = 1 + 2/(2 - theta) (digamma(2) - digamma(2/theta + 1)); with
    // delta = 1 - 2/theta the bracket is a Taylor series near theta = 2.
    const double delta = 1.0 - 2.0 / theta;
    double ratio;  // bracket / delta
    if (std::abs(delta) < 1e-3) {
        ratio = boost::math::trigamma(2.0) -
                delta * (boost::math::polygamma(2, 2.0) / 2.0 - delta * boost::math::polygamma(3, 2.0) / 6.0);
    } else {
        ratio = (boost::math::digamma(2.0) - boost::math::digamma(2.0 - delta)) / delta;
    }
    return 1.0 - 2.0 * ratio / theta;
}

}  // namespace

char family_label(Family family) {
    switch (family) {
        case Family::A: return 'A';
        case Family::C: return 'C';
        case Family::F: return 'F';
        case Family::G: return 'G';
        case Family::J: return 'J';
    }
    return '?';
}

Family parse_family(std::string_view label) {
    if (label.size() == 1) {
        switch (label.front()) {
            case 'A': case 'a': return Family::A;
            case 'C': case 'c': return Family::C;
            case 'F': case 'f': return Family::F;
            case 'G': case 'g': return Family::G;
            case 'J': case 'j': return Family::J;
            default: break;
        }
    }
    throw std::invalid_argument("unknown copula family '" + std::string(label) + "'");
}

std::string family_name(Family family) {
    switch (family) {
        case Family::A: return "Ali-Mikhail-Haq";
        case Family::C: return "Clayton";
        case Family::F: return "Frank";
        case Family::G: return "Gumbel";
        case Family::J: return "Joe";
    }
    return "unknown";
}

bool ThetaRange::contains(double theta) const {
    const bool above = lower_open ? theta > lower : theta >= lower;
    const bool below = upper_open ? theta < upper : theta <= upper;
    return above && below;
}

ThetaRange theta_range(Family family) {
    switch (family) {
        case Family::A: return {0.0, 1.0, false, true};
        case Family::C: return {0.0, kInf, true, true};
        case Family::F: return {0.0, kInf, true, true};
        case Family::G: return {1.0, kInf, false, true};
        case Family::J: return {1.0, kInf, false, true};
    }
    return {0.0, kInf, true, true};
}

double theta_floor(Family family) {
    switch (family) {
        case Family::A: return 0.0;
        case Family::C:
        case Family::F: return kEndpointGuard;
        case Family::G:
        case Family::J: return 1.0;
    }
    return 0.0;
}

double theta_ceiling(Family family) {
    return family == Family::A ? 1.0 - kEndpointGuard : kInf;
}

Generator::Generator(Family family, double theta, double beta)
    : family_(family), theta_(theta), beta_(beta) {
    if (!std::isfinite(theta) || !std::isfinite(beta)) {
        throw std::invalid_argument("generator parameters must be finite");
    }
    if (beta < 1.0) throw std::invalid_argument("outer power beta must be >= 1");
    if (!theta_range(family).contains(theta)) {
        throw std::invalid_argument(std::string("theta outside the parameter range of family ") +
                                    family_label(family));
    }
    theta_ = std::clamp(theta_, theta_floor(family), theta_ceiling(family));
    if (family_ == Family::G) {
        theta_ *= beta_;
        beta_ = 1.0;
    }
}

double Generator::psi_at_log(double log_t) const {
    if (std::isnan(log_t)) throw std::domain_error("psi: argument must be nonnegative");
    const double log_s = log_t / beta_;
    switch (family_) {
        case Family::C: {
            // (1 + s)^(-1/theta) with log1p(s) from log s.
            const double log1p_s = log_s > 0.0 ? log_s + std::log1p(std::exp(-log_s)) : std::log1p(std::exp(log_s));
            return std::exp(-log1p_s / theta_);
        }
        case Family::G:
            return std::exp(-std::exp(log_s / theta_));
        default:
            // The remaining families decay exponentially in s.
            return std::clamp(base_psi(family_, theta_, std::exp(log_s)), 0.0, 1.0);
    }
}

double Generator::psi(double t) const {
    if (!(t >= 0.0)) throw std::domain_error("psi: argument must be nonnegative");
    if (t == 0.0) return 1.0;
    const double s = beta_ == 1.0 ? t : std::pow(t, 1.0 / beta_);
    return std::clamp(base_psi(family_, theta_, s), 0.0, 1.0);
}

double Generator::psi_inverse(double s) const {
    if (!(s >= 0.0 && s <= 1.0)) throw std::domain_error("psi_inverse: argument must lie in [0, 1]");
    if (s == 1.0) return 0.0;
    const double x = base_psi_inverse(family_, theta_, s);
    return beta_ == 1.0 ? x : std::pow(x, beta_);
}

double Generator::log_neg_psi_d1(double t) const {
    if (!(t > 0.0) && !(t == 0.0 && beta_ == 1.0)) {
        throw std::domain_error("psi derivative requires t > 0");
    }
    if (beta_ == 1.0) return base_log_neg_d1(family_, theta_, t);
    const double log_t = std::log(t);
    const double s = std::exp(log_t / beta_);
    return base_log_neg_d1(family_, theta_, s) - std::log(beta_) + (1.0 / beta_ - 1.0) * log_t;
}

double Generator::log_psi_d2(double t) const {
    if (!(t > 0.0) && !(t == 0.0 && beta_ == 1.0)) {
        throw std::domain_error("psi derivative requires t > 0");
    }
    if (beta_ == 1.0) return base_log_d2(family_, theta_, t);
    const double log_t = std::log(t);
    const double log_b = std::log(beta_);
    const double s = std::exp(log_t / beta_);
    const double curvature = base_log_d2(family_, theta_, s) - 2.0 * log_b + (2.0 / beta_ - 2.0) * log_t;
    const double slope = base_log_neg_d1(family_, theta_, s) - log_b + std::log1p(-1.0 / beta_) +
                         (1.0 / beta_ - 2.0) * log_t;
    return log_sum_exp(curvature, slope);
}

double Generator::log_pair_density(double u, double v) const {
    if (!(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0)) throw std::domain_error("pair density needs u, v in (0, 1)");
    const double x = base_psi_inverse(family_, theta_, u);
    const double y = base_psi_inverse(family_, theta_, v);
    if (beta_ == 1.0) {
        return base_log_d2(family_, theta_, x + y) - base_log_neg_d1(family_, theta_, x) -
               base_log_neg_d1(family_, theta_, y);
    }
    // With t = x^beta, -psi_beta'(t) = -phi'(x) x^(1 - beta) / beta, and
    // psi_beta''(T) is evaluated at s = T^(1/beta).
    const double lx = std::log(x);
    const double ly = std::log(y);
    const double log_t = log_sum_exp(beta_ * lx, beta_ * ly);
    const double log_b = std::log(beta_);
    const double s = std::exp(log_t / beta_);
    const double curvature = base_log_d2(family_, theta_, s) - 2.0 * log_b + (2.0 / beta_ - 2.0) * log_t;
    const double slope = base_log_neg_d1(family_, theta_, s) - log_b + std::log1p(-1.0 / beta_) +
                         (1.0 / beta_ - 2.0) * log_t;
    const double margins = base_log_neg_d1(family_, theta_, x) + base_log_neg_d1(family_, theta_, y) -
                           2.0 * log_b + (1.0 - beta_) * (lx + ly);
    return log_sum_exp(curvature, slope) - margins;
}

double Generator::psi_d1(double t) const { return -std::exp(log_neg_psi_d1(t)); }

double Generator::psi_d2(double t) const { return std::exp(log_psi_d2(t)); }

double Generator::kendall_tau() const {
    return 1.0 - (1.0 - base_kendall_tau(family_, theta_)) / beta_;
}

TailCoefficients Generator::tail_coefficients() const {
    TailCoefficients tc;
    if (family_ == Family::C) tc.lower = std::exp2(-1.0 / (theta_ * beta_));
    switch (family_) {
        case Family::A:
        case Family::C:
        case Family::F:
            tc.upper = 2.0 - std::exp2(1.0 / beta_);
            break;
        case Family::G:
        case Family::J:
            tc.upper = 2.0 - std::exp2(1.0 / (theta_ * beta_));
            break;
    }
    return tc;
}

double base_kendall_tau(Family family, double theta) {
    switch (family) {
        case Family::A: {
            if (theta < 1e-4) {
                return theta * (2.0 / 9.0 + theta * (1.0 / 18.0 + theta * (1.0 / 45.0 + theta / 90.0)));
            }
            const double om = 1.0 - theta;
            return 1.0 - 2.0 * (theta + om * om * std::log1p(-theta)) / (3.0 * theta * theta);
        }
        case Family::C:
            return theta / (theta + 2.0);
        case Family::F: {
            if (theta < 1e-3) {
                const double t2 = theta * theta;
                return theta * (1.0 / 9.0 - t2 / 900.0 + t2 * t2 / 52920.0);
            }
            return 1.0 - 4.0 / theta * (1.0 - debye1(theta));
        }
        case Family::G:
            return 1.0 - 1.0 / theta;
        case Family::J:
            return joe_base_tau(theta);
    }
    return 0.0;
}

double kendall_tau_inverse(Family family, double tau, double beta) {
    if (beta < 1.0 || !std::isfinite(beta)) throw std::invalid_argument("beta must be finite and >= 1");
    if (!std::isfinite(tau)) throw InfeasibleError("tau must be finite");
    const double target = 1.0 - beta * (1.0 - tau);
    const double lo_theta = theta_floor(family);
    const double lo_tau = base_kendall_tau(family, lo_theta);
    if (target < lo_tau - 1e-12) {
        throw InfeasibleError(std::string("Kendall's tau below the attainable range of family ") +
                              family_label(family));
    }
    if (target <= lo_tau) return lo_theta;
    if (target >= 1.0) throw InfeasibleError("Kendall's tau must be below 1");

    switch (family) {
        case Family::C:
            return std::max(lo_theta, 2.0 * target / (1.0 - target));
        case Family::G:
            return 1.0 / (1.0 - target);
        default:
            break;
    }

    double lo = lo_theta;
    double hi;
    if (family == Family::A) {
        hi = theta_ceiling(family);
        if (base_kendall_tau(family, hi) <= target) {
            throw InfeasibleError("Kendall's tau outside [0, 1/3) for the Ali-Mikhail-Haq family at this beta");
        }
    } else {
        hi = std::max(2.0, 2.0 * lo);
        while (base_kendall_tau(family, hi) < target) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e15) throw InfeasibleError("Kendall's tau too close to 1");
        }
    }
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (base_kendall_tau(family, mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-13 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

std::optional<ThetaBeta> solve_tau_lambda_u(Family family, double tau, double lambda_u) {
    if (family == Family::G) {
        throw std::invalid_argument("Gumbel outer power is redundant; (tau, lambda_u) cannot be tuned separately");
    }
    if (!(tau >= 0.0 && tau < 1.0) || !(lambda_u >= 0.0 && lambda_u < 1.0)) {
        throw std::domain_error("tau and lambda_u must lie in [0, 1)");
    }
    // 2 - 2^(1/p) = lambda_u  <=>  p = ln 2 / ln(2 - lambda_u)
    const double power = std::log(2.0) / std::log(2.0 - lambda_u);

    auto verified = [&](double theta, double beta) -> std::optional<ThetaBeta> {
        const Generator g(family, theta, beta);
        if (std::abs(g.kendall_tau() - tau) > 1e-6) return std::nullopt;
        if (std::abs(g.tail_coefficients().upper - lambda_u) > 1e-6) return std::nullopt;
        return ThetaBeta{g.theta(), g.beta()};
    };

    if (family != Family::J) {
        try {
            const double theta = kendall_tau_inverse(family, tau, power);
            return verified(theta, power);
        } catch (const InfeasibleError&) {
            return std::nullopt;
        }
    }

    // Joe: theta * beta = power with theta in [1, power]; scan for a root of
    // tau(theta, power / theta) - tau, then bisect.
    auto excess = [&](double theta) {
        const double beta = std::max(1.0, power / theta);
        return 1.0 - (1.0 - base_kendall_tau(Family::J, theta)) / beta - tau;
    };
    if (power - 1.0 < 1e-14) {
        return tau < 1e-12 ? verified(1.0, 1.0) : std::nullopt;
    }
    constexpr int kGrid = 400;
    double prev_theta = 1.0;
    double prev_value = excess(prev_theta);
    if (prev_value == 0.0) return verified(1.0, power);
    for (int k = 1; k <= kGrid; ++k) {
        const double theta = 1.0 + (power - 1.0) * k / kGrid;
        const double value = excess(theta);
        if ((prev_value < 0.0) != (value < 0.0) || value == 0.0) {
            double lo = prev_theta;
            double hi = theta;
            const bool increasing = value >= prev_value;
            for (int iter = 0; iter < 200 && hi - lo > 1e-14 * hi; ++iter) {
                const double mid = 0.5 * (lo + hi);
                const double v = excess(mid);
                if ((v < 0.0) == increasing) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            const double root = 0.5 * (lo + hi);
            return verified(root, std::max(1.0, power / root));
        }
        prev_theta = theta;
        prev_value = value;
    }
    return std::nullopt;
}

}  // namespace hopac
