#include "icl/bounds.hpp"

#include <cmath>
#include <string>

#include "icl/errors.hpp"

namespace icl::bounds {

namespace {

void require_positive(std::size_t v, const char* name) {
  if (v < 1) throw InvalidArgument(std::string(name) + " must be >= 1");
}

}  // namespace

double logistic_bound(std::size_t d, std::size_t T) {
  require_positive(d, "d");
  require_positive(T, "T");
  const double dd = static_cast<double>(d), tt = static_cast<double>(T);
  return dd / (2.0 * tt) * (1.0 + std::log1p(tt / (4.0 * dd)));
}

double transformer_bound(std::size_t d, std::size_t r, std::size_t K, std::size_t L,
                         std::size_t T) {
  require_positive(d, "d");
  require_positive(r, "r");
  require_positive(K, "K");
  require_positive(L, "L");
  require_positive(T, "T");
  const double dd = static_cast<double>(d), rr = static_cast<double>(r);
  const double kk = static_cast<double>(K), ll = static_cast<double>(L), tt = static_cast<double>(T);
  const double arg = 2.0 * kk * tt * tt / ll;
  if (!(arg > 1.0)) {
    throw InvalidRegime("transformer_bound: 2KT²/L = " + std::to_string(arg) + " must exceed 1");
  }
  const double p = dd * dd + rr * rr;
  return p * ll * ll * std::log(4.0 * kk * kk) / tt + p * ll * std::log(arg) / (2.0 * tt);
}

double linrep_bound(std::size_t d, std::size_t r, std::size_t M, std::size_t T) {
  require_positive(d, "d");
  require_positive(r, "r");
  require_positive(M, "M");
  require_positive(T, "T");
  const double dd = static_cast<double>(d), rr = static_cast<double>(r);
  const double mm = static_cast<double>(M), tt = static_cast<double>(T);
  return dd * rr * (1.0 + std::log1p(mm / rr)) / (2.0 * mm * tt) +
         rr * (1.0 + std::log1p(2.0 * tt / rr)) / (2.0 * tt);
}

double sparse_meta_bound(double R, std::size_t M, std::size_t N) {
  if (!(R > 0.0) || !std::isfinite(R)) throw InvalidArgument("R must be positive");
  require_positive(M, "M");
  require_positive(N, "N");
  const double mm = static_cast<double>(M);
  return R * std::log1p(mm / R) * std::log(mm * static_cast<double>(N));
}

MixtureTerms mixture_transformer_bound(std::size_t d, std::size_t r, std::size_t K, std::size_t L,
                                       std::size_t M, std::size_t T, std::size_t N, double R) {
  require_positive(d, "d");
  require_positive(r, "r");
  require_positive(K, "K");
  require_positive(L, "L");
  require_positive(T, "T");
  if (r > d) throw InvalidRegime("mixture_transformer_bound requires r <= d");
  const double mt = static_cast<double>(M) * static_cast<double>(T);
  const double kk = static_cast<double>(K), ll = static_cast<double>(L), tt = static_cast<double>(T);
  const double p = static_cast<double>(d * d + r * r);
  MixtureTerms out;
  out.sparse = sparse_meta_bound(R, M, N) / mt;
  const double reuse = R * std::log1p(static_cast<double>(M) / R);
  out.components = reuse * p * ll * ll * std::log(4.0 * kk * kk * static_cast<double>(M) * tt * tt) / mt;
  out.assignment = std::log(static_cast<double>(N)) / tt;
  out.total = out.sparse + out.components + out.assignment;
  return out;
}

double entropy_bound(double H_psi, double H_theta_given_psi, std::size_t M, std::size_t T) {
  if (!(H_psi >= 0.0) || !(H_theta_given_psi >= 0.0)) {
    throw InvalidArgument("entropies must be nonnegative");
  }
  require_positive(M, "M");
  require_positive(T, "T");
  const double tt = static_cast<double>(T);
  return H_psi / (static_cast<double>(M) * tt) + H_theta_given_psi / tt;
}

double misspecified_bound(double kl_prior, std::size_t M, std::size_t T) {
  if (!(kl_prior >= 0.0)) throw InvalidArgument("kl_prior must be nonnegative");
  require_positive(M, "M");
  require_positive(T, "T");
  return kl_prior / (static_cast<double>(M) * static_cast<double>(T));
}

IclBound icl_bound(double irreducible_per_tau, double meta_info, double intra_info, std::size_t M,
                   std::size_t tau) {
  require_positive(M, "M");
  require_positive(tau, "tau");
  if (!(meta_info >= 0.0) || !(intra_info >= 0.0)) {
    throw InvalidArgument("information terms must be nonnegative");
  }
  const double t = static_cast<double>(tau);
  IclBound b;
  b.remark = irreducible_per_tau + intra_info / t;
  b.full = b.remark + meta_info / (static_cast<double>(M) * t);
  return b;
}

}  // namespace icl::bounds
