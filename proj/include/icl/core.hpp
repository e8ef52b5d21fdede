#pragma once

// Probability primitives, seeded random streams and the shared containers
// (Pmf, McEstimate, Document, Corpus) used across the library.
//
// All information quantities are in nats.

#include <Eigen/Dense>

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <iosfwd>
#include <mutex>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "icl/errors.hpp"

namespace icl {

using Token = int;  // 0-based inside the library; 1-based in exported files

/// Normalized probability vector over a finite alphabet.
class Pmf {
 public:
  static constexpr double kSumTolerance = 1e-12;

  /// Validates: nonempty, entries >= 0, sum within kSumTolerance of 1.
  explicit Pmf(std::vector<double> probs);

  /// Rescales nonnegative weights to sum to one.
  static Pmf normalized(std::vector<double> weights);
  static Pmf uniform(std::size_t n);
  static Pmf point(std::size_t n, std::size_t index);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }

  bool operator==(const Pmf&) const = default;

 private:
  std::vector<double> probs_;
};

/// Monte Carlo mean with its standard error.
struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_trials = 0;
};

/// Mean and standard error of per-trial values, accumulated in index order.
McEstimate summarize(std::span<const double> values);

/// Counter-derived random stream. Two streams built from the same
/// (master_seed, stream_id) produce identical draws.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Independent sub-stream keyed by `child`.
  RngStream derive(std::uint64_t child) const;

  double uniform();  // [0, 1)
  double normal();   // N(0, 1)
  double normal(double mean, double sd) { return mean + sd * normal(); }
  std::size_t uniform_index(std::size_t n);
  std::size_t categorical(const Pmf& pmf);
  std::size_t categorical(std::span<const double> probs);
  /// log of a Gamma(shape, 1) draw; stays finite for tiny shapes.
  double log_gamma_variate(double shape);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

double logsumexp(std::span<const double> values);

/// exp(x_i - logsumexp(x)). Throws InvalidArgument on empty or non-finite input.
Pmf softmax(std::span<const double> logits);
Pmf softmax(const Eigen::VectorXd& logits);

/// Rescales every column with L2 norm > 1 (beyond 8 ulps) to norm 1.
Eigen::MatrixXd clip_columns(const Eigen::MatrixXd& matrix);

/// sum p_i ln(p_i / q_i) with 0 ln 0 = 0. Throws DivergenceInfinite when
/// p_i > 0 and q_i = 0, InvalidArgument on length mismatch.
double kl_divergence(const Pmf& p, const Pmf& q);

/// Shannon entropy of a probability vector; zero entries contribute nothing.
double entropy(std::span<const double> probs);

/// One autoregressive sequence. `inputs[t]` is the exogenous, unscored
/// covariate attached to step t (empty for purely symbolic environments).
struct Document {
  std::vector<Token> tokens;
  std::vector<Eigen::VectorXd> inputs;

  std::size_t size() const { return tokens.size(); }
  bool has_inputs() const { return !inputs.empty(); }
};

/// M documents of equal length T over a vocabulary of size d.
struct Corpus {
  std::size_t vocab = 0;
  std::vector<Document> documents;

  std::size_t num_documents() const { return documents.size(); }
  std::size_t length() const {
    return documents.empty() ? 0 : documents.front().size();
  }
  /// Throws InvalidArgument on ragged documents or out-of-range tokens.
  void validate() const;
};

/// CSV with columns trial,document,step,token (all 1-based except trial).
void write_corpus_csv(std::ostream& out, std::span<const Corpus> trials);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots by the caller so the outcome does not depend
/// on the worker count. The lowest-index exception is rethrown.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t error_index = n;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = static_cast<unsigned>(
      std::min<std::size_t>(threads, n));
  pool.reserve(count);
  for (unsigned w = 0; w < count; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace icl
