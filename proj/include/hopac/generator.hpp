#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hopac {

/// One-parameter Archimedean families: Ali-Mikhail-Haq, Clayton, Frank,
/// Gumbel and Joe.
enum class Family { A, C, F, G, J };

char family_label(Family family);
Family parse_family(std::string_view label);
std::string family_name(Family family);

/// Admissible interval of the base parameter theta.
struct ThetaRange {
    double lower;
    double upper;
    bool lower_open;
    bool upper_open;

    [[nodiscard]] bool contains(double theta) const;
};

ThetaRange theta_range(Family family);

/// Smallest/largest theta the numerics actually use for a family; open
/// endpoints are pulled inside by 1e-10.
double theta_floor(Family family);
double theta_ceiling(Family family);

/// Raised when a Kendall's tau (or tau/tail pair) is outside what a family
/// can attain.
class InfeasibleError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct TailCoefficients {
    double lower = 0.0;
    double upper = 0.0;
};

/// Outer-power transformed generator psi_beta(t) = psi_theta(t^(1/beta)).
///
/// Values are immutable. Gumbel generators are stored as (theta * beta, 1)
/// because the outer power of a Gumbel generator is again Gumbel.
class Generator {
public:
    Generator(Family family, double theta, double beta = 1.0);

    [[nodiscard]] Family family() const noexcept { return family_; }
    [[nodiscard]] double theta() const noexcept { return theta_; }
    [[nodiscard]] double beta() const noexcept { return beta_; }

    /// The one-parameter generator this one is the outer power of.
    [[nodiscard]] Generator base() const { return Generator(family_, theta_, 1.0); }

    [[nodiscard]] double psi(double t) const;
    /// psi(exp(log_t)) without forming t.
    [[nodiscard]] double psi_at_log(double log_t) const;
    [[nodiscard]] double psi_inverse(double s) const;
    [[nodiscard]] double psi_d1(double t) const;
    [[nodiscard]] double psi_d2(double t) const;

    /// log(-psi'(t)) and log(psi''(t)); finite wherever psi_d1/psi_d2 would
    /// under- or overflow.
    [[nodiscard]] double log_neg_psi_d1(double t) const;
    [[nodiscard]] double log_psi_d2(double t) const;

    /// log density of the bivariate copula psi(psi^-1(u) + psi^-1(v)) for
    /// u, v in (0, 1).
    [[nodiscard]] double log_pair_density(double u, double v) const;

    [[nodiscard]] double kendall_tau() const;
    [[nodiscard]] TailCoefficients tail_coefficients() const;

    friend bool operator==(const Generator&, const Generator&) = default;

private:
    Family family_;
    double theta_;
    double beta_;
};

/// Kendall's tau of the one-parameter family at theta.
double base_kendall_tau(Family family, double theta);

/// Theta such that Generator(family, theta, beta).kendall_tau() == tau.
/// Throws InfeasibleError when the family cannot reach tau at this beta.
double kendall_tau_inverse(Family family, double tau, double beta = 1.0);

struct ThetaBeta {
    double theta;
    double beta;
};

/// Parameters hitting a prescribed (Kendall's tau, upper tail coefficient)
/// pair, or nullopt if the pair is unattainable. Gumbel is rejected since
/// its beta is redundant.
std::optional<ThetaBeta> solve_tau_lambda_u(Family family, double tau, double lambda_u);

}  // namespace hopac
