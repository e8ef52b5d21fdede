#include "icl/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

namespace icl {

Pmf::Pmf(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw InvalidArgument("Pmf: empty probability vector");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw InvalidArgument("Pmf: negative or non-finite probability");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw InvalidArgument("Pmf: probabilities sum to " + std::to_string(sum));
  }
}

Pmf Pmf::normalized(std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidArgument("Pmf::normalized: negative or non-finite weight");
    }
    sum += w;
  }
  if (!(sum > 0.0)) throw InvalidArgument("Pmf::normalized: zero total weight");
  for (double& w : weights) w /= sum;
  return Pmf(std::move(weights));
}

Pmf Pmf::uniform(std::size_t n) {
  if (n == 0) throw InvalidArgument("Pmf::uniform: empty alphabet");
  return Pmf(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Pmf Pmf::point(std::size_t n, std::size_t index) {
  if (index >= n) throw InvalidArgument("Pmf::point: index out of range");
  std::vector<double> p(n, 0.0);
  p[index] = 1.0;
  return Pmf(std::move(p));
}

McEstimate summarize(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("summarize: no trials");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  const double sd = values.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
  return {mean, sd / std::sqrt(n), values.size()};
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::seed_seq make_seed(std::uint64_t master, std::uint64_t stream) {
  const std::uint64_t a = splitmix64(master);
  const std::uint64_t b = splitmix64(a ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  return std::seed_seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                       static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed), stream_id_(stream_id) {
  auto seq = make_seed(master_seed, stream_id);
  engine_.seed(seq);
}

RngStream RngStream::derive(std::uint64_t child) const {
  return RngStream(master_seed_, splitmix64(stream_id_ * 0x100000001b3ULL ^ splitmix64(child)));
}

double RngStream::uniform() {
  return std::generate_canonical<double, 53>(engine_);
}

double RngStream::normal() { return normal_(engine_); }

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n == 0) throw InvalidArgument("uniform_index: empty range");
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

std::size_t RngStream::categorical(const Pmf& pmf) { return categorical(pmf.probs()); }

std::size_t RngStream::categorical(std::span<const double> probs) {
  const double u = uniform();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  // Rounding left u above the last cumulative sum: take the last nonzero entry.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  throw InvalidArgument("categorical: all-zero probabilities");
}

double RngStream::log_gamma_variate(double shape) {
  if (!(shape > 0.0)) throw InvalidArgument("log_gamma_variate: shape must be positive");
  if (shape >= 1.0) {
    std::gamma_distribution<double> dist(shape, 1.0);
    return std::log(dist(engine_));
  }
  // Gamma(a) = Gamma(a + 1) * U^(1/a), kept in log space.
  std::gamma_distribution<double> dist(shape + 1.0, 1.0);
  double u = uniform();
  while (u <= 0.0) u = uniform();
  return std::log(dist(engine_)) + std::log(u) / shape;
}

double logsumexp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double hi = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

Pmf softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("softmax: empty logits");
  for (double v : logits) {
    if (!std::isfinite(v)) throw InvalidArgument("softmax: non-finite logit");
  }
  const double hi = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return Pmf(std::move(out));
}

Pmf softmax(const Eigen::VectorXd& logits) {
  return softmax(std::span<const double>(logits.data(), static_cast<std::size_t>(logits.size())));
}

Eigen::MatrixXd clip_columns(const Eigen::MatrixXd& matrix) {
  if (!matrix.allFinite()) throw InvalidArgument("clip_columns: non-finite entry");
  Eigen::MatrixXd out = matrix;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    // A rescaled column can come out at 1 + a few ulps; leave those alone so
    // clipping is idempotent.
    const double norm = out.col(c).norm();
    if (norm > 1.0 + 8 * std::numeric_limits<double>::epsilon()) out.col(c) /= norm;
  }
  return out;
}

double kl_divergence(const Pmf& p, const Pmf& q) {
  if (p.size() != q.size()) throw InvalidArgument("kl_divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) {
      throw DivergenceInfinite("kl_divergence: p has mass where q has none (index " +
                               std::to_string(i) + ")");
    }
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

void Corpus::validate() const {
  if (vocab < 1) throw InvalidArgument("Corpus: vocabulary must be nonempty");
  const std::size_t T = length();
  for (const auto& doc : documents) {
    if (doc.size() != T) throw InvalidArgument("Corpus: documents have different lengths");
    for (Token tok : doc.tokens) {
      if (tok < 0 || static_cast<std::size_t>(tok) >= vocab) {
        throw InvalidArgument("Corpus: token out of vocabulary range");
      }
    }
  }
}

void write_corpus_csv(std::ostream& out, std::span<const Corpus> trials) {
  out << "trial,document,step,token\n";
  for (std::size_t trial = 0; trial < trials.size(); ++trial) {
    const auto& corpus = trials[trial];
    for (std::size_t m = 0; m < corpus.documents.size(); ++m) {
      const auto& doc = corpus.documents[m];
      for (std::size_t t = 0; t < doc.size(); ++t) {
        out << trial << ',' << (m + 1) << ',' << (t + 1) << ',' << (doc.tokens[t] + 1) << '\n';
      }
    }
  }
}

}  // namespace icl
