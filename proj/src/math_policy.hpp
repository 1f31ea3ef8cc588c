#pragma once

#include <boost/math/policies/policy.hpp>

namespace survbench::detail {

// Special functions return NaN/inf instead of throwing; callers check.
using MathPolicy = boost::math::policies::policy<
    boost::math::policies::promote_double<false>,
    boost::math::policies::domain_error<boost::math::policies::ignore_error>,
    boost::math::policies::pole_error<boost::math::policies::ignore_error>,
    boost::math::policies::overflow_error<boost::math::policies::ignore_error>,
    boost::math::policies::underflow_error<boost::math::policies::ignore_error>,
    boost::math::policies::evaluation_error<boost::math::policies::ignore_error>>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kLnSqrt2Pi = 0.91893853320467274178;
inline constexpr double kEulerGamma = 0.57721566490153286061;

}  // namespace survbench::detail
