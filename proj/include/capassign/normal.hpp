#pragma once

// Standard normal helpers shared by the welfare, likelihood and sampling code.

namespace capassign::normal {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kSqrt2 = 1.41421356237309504880;

/// Density phi(x).
double pdf(double x);
/// Distribution function Phi(x), accurate in both tails.
double cdf(double x);
/// Upper tail 1 - Phi(x) without cancellation.
double sf(double x);
/// log Phi(x); finite for every finite x.
double log_cdf(double x);
/// Inverse Mills ratio phi(x) / Phi(x); finite for every finite x.
double inverse_mills(double x);
/// Phi^{-1}(p) for p in (0, 1).
double quantile(double p);

/// Expected loss E[max(Z - c, 0)] = phi(c) - c * (1 - Phi(c)), Z standard normal.
double loss(double c);

}  // namespace capassign::normal
