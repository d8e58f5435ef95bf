#pragma once

#include <cmath>

namespace pspectra::detail {

// |x|^p and friends, with exact fast paths for the exponents used most.
class Powers {
public:
    explicit Powers(double p) : p_(p)
    {
        if (p == 2.0) kind_ = Kind::Two;
        else if (p == 3.0) kind_ = Kind::Three;
        else if (p == 4.0) kind_ = Kind::Four;
        else if (p == 1.5) kind_ = Kind::OneHalf;
        else if (p == 2.5) kind_ = Kind::TwoHalf;
        else kind_ = Kind::General;
    }

    double p() const { return p_; }

    // |x|^p
    double abs_pow(double x) const
    {
        const double a = std::abs(x);
        switch (kind_) {
        case Kind::Two: return a * a;
        case Kind::Three: return a * a * a;
        case Kind::Four: return (a * a) * (a * a);
        case Kind::OneHalf: return a * std::sqrt(a);
        case Kind::TwoHalf: return a * a * std::sqrt(a);
        default: return std::pow(a, p_);
        }
    }

    // |x|^{p-2} x
    double signed_pow(double x) const
    {
        const double a = std::abs(x);
        switch (kind_) {
        case Kind::Two: return x;
        case Kind::Three: return a * x;
        case Kind::Four: return a * a * x;
        case Kind::OneHalf: return std::copysign(std::sqrt(a), x);
        case Kind::TwoHalf: return std::sqrt(a) * x;
        default: return a == 0.0 ? 0.0 : std::copysign(std::pow(a, p_ - 1.0), x);
        }
    }

    // (p - 1) |x|^{p-2}, the derivative of signed_pow; +inf at 0 when p < 2
    double signed_pow_derivative(double x) const
    {
        const double a = std::abs(x);
        switch (kind_) {
        case Kind::Two: return 1.0;
        case Kind::Three: return 2.0 * a;
        case Kind::Four: return 3.0 * a * a;
        case Kind::OneHalf: return 0.5 / std::sqrt(a);
        case Kind::TwoHalf: return 1.5 * std::sqrt(a);
        default: return (p_ - 1.0) * std::pow(a, p_ - 2.0);
        }
    }

    // t^{p/2} for t >= 0
    double half_pow(double t) const
    {
        switch (kind_) {
        case Kind::Two: return t;
        case Kind::Three: return t * std::sqrt(t);
        case Kind::Four: return t * t;
        case Kind::OneHalf: return std::sqrt(t * std::sqrt(t));
        case Kind::TwoHalf: return t * std::sqrt(std::sqrt(t));
        default: return std::pow(t, 0.5 * p_);
        }
    }

    // d/dt t^{p/2} = (p/2) t^{p/2 - 1}
    double half_pow_derivative(double t) const
    {
        switch (kind_) {
        case Kind::Two: return 1.0;
        case Kind::Three: return 1.5 * std::sqrt(t);
        case Kind::Four: return 2.0 * t;
        case Kind::OneHalf: return 0.75 / std::sqrt(std::sqrt(t));
        case Kind::TwoHalf: return 1.25 * std::sqrt(std::sqrt(t));
        default: return 0.5 * p_ * std::pow(t, 0.5 * p_ - 1.0);
        }
    }

private:
    enum class Kind { Two, Three, Four, OneHalf, TwoHalf, General };
    double p_;
    Kind kind_;
};

} // namespace pspectra::detail
