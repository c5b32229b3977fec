#pragma once

#include <cstddef>
#include <cstdint>

/// Every tunable default in one place. The CLI help text is generated from
/// these values.
namespace fedm::defaults {

inline constexpr std::size_t draws = 4000;        // B
inline constexpr std::size_t burn_in = 2000;
inline constexpr std::size_t thin = 1;
inline constexpr std::size_t broadcast_quantile = 50;  // B1
inline constexpr std::size_t broadcast_auc = 100;
inline constexpr double target_accept_low_dim = 0.35;   // d <= 4
inline constexpr double target_accept_high_dim = 0.234; // d > 4
inline constexpr double adaptation_decay = 0.6;         // Robbins-Monro gain t^-0.6
inline constexpr double c1_warning = 10.0;

inline constexpr double radius_quantile = 50.0;
inline constexpr double radius_auc = 0.999;
inline constexpr double tau = 0.5;

inline constexpr std::size_t perturbations_quantile = 500;
inline constexpr std::size_t perturbations_auc = 100;

inline constexpr std::size_t q_samples = 10000;
inline constexpr double alpha = 0.05;
inline constexpr double p_value_floor = 1e-12;
inline constexpr double lasso_tolerance = 1e-10;
inline constexpr std::size_t lasso_max_sweeps = 10000;
inline constexpr double pd_tolerance = 1e-8;     // times (1 + ||A||_op)
inline constexpr double omega_jitter = 1e-10;    // times tr(Omega) / dim
inline constexpr double ridge_fallback = 1e-8;

inline constexpr std::uint64_t seed = 20240917;

}  // namespace fedm::defaults
