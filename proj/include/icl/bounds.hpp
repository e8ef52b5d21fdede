#pragma once

// Closed-form estimation-error bounds, natural logs throughout.
// Per-step values are in nats per token unless noted.

#include <cstddef>

namespace icl::bounds {

/// d/(2T) (1 + ln(1 + T/(4d))).
double logistic_bound(std::size_t d, std::size_t T);

/// (d²+r²)L² ln(4K²)/T + (d²+r²)L ln(2KT²/L)/(2T).
/// Throws InvalidRegime when 2KT²/L <= 1.
double transformer_bound(std::size_t d, std::size_t r, std::size_t K, std::size_t L,
                         std::size_t T);

/// dr(1 + ln(1 + M/r))/(2MT) + r(1 + ln(1 + 2T/r))/(2T).
double linrep_bound(std::size_t d, std::size_t r, std::size_t M, std::size_t T);

/// R ln(1 + M/R) ln(MN), in nats total (not per step).
double sparse_meta_bound(double R, std::size_t M, std::size_t N);

struct MixtureTerms {
  double sparse = 0.0;       // R ln(1+M/R) ln(MN)/(MT)
  double components = 0.0;   // R ln(1+M/R) (d²+r²)L² ln(4K²MT²)/(MT)
  double assignment = 0.0;   // ln N / T
  double total = 0.0;
};

/// Three displayed terms of the mixture-of-transformers bound.
/// Throws InvalidRegime when r > d.
MixtureTerms mixture_transformer_bound(std::size_t d, std::size_t r, std::size_t K, std::size_t L,
                                       std::size_t M, std::size_t T, std::size_t N, double R);

/// H(ψ)/(MT) + H(θ_m|ψ)/T.
double entropy_bound(double H_psi, double H_theta_given_psi, std::size_t M, std::size_t T);

/// kl_prior/(MT).
double misspecified_bound(double kl_prior, std::size_t M, std::size_t T);

struct IclBound {
  double full = 0.0;    // irr + meta/(Mτ) + intra/τ
  double remark = 0.0;  // irr + intra/τ
};
IclBound icl_bound(double irreducible_per_tau, double meta_info, double intra_info, std::size_t M,
                   std::size_t tau);

}  // namespace icl::bounds
