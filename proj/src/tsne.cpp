#include "textshift/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "textshift/error.hpp"
#include "textshift/rng.hpp"

namespace textshift {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double t = a[j] - b[j];
    d += t * t;
  }
  return d;
}

constexpr double kDuplicateDistance = 1e-12;
constexpr double kJitterScale = 1e-6;

void jitter_duplicates(Matrix& X, Rng& rng) {
  const double limit = kDuplicateDistance * kDuplicateDistance;
  for (std::size_t i = 1; i < X.rows(); ++i) {
    bool duplicate = false;
    for (std::size_t j = 0; j < i && !duplicate; ++j) {
      duplicate = squared_distance(X.row(i), X.row(j)) < limit;
    }
    if (duplicate) {
      for (auto& v : X.row(i)) v += kJitterScale * rng.normal();
    }
  }
}

}  // namespace

Matrix conditional_affinities(const Matrix& X, double perplexity) {
  const std::size_t n = X.rows();
  Matrix P(n, n);
  const double target = std::log(perplexity);
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      dist[j] = j == i ? 0.0 : squared_distance(X.row(i), X.row(j));
      if (j != i) dmin = std::min(dmin, dist[j]);
    }
    // Shifting by the nearest distance keeps at least one weight at exp(0).
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    auto row = P.row(i);
    for (std::size_t step = 0; step < kPerplexitySearchSteps; ++step) {
      double sum = 0.0;
      double weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) {
          row[j] = 0.0;
          continue;
        }
        const double shifted = dist[j] - dmin;
        row[j] = std::exp(-beta * shifted);
        sum += row[j];
        weighted += shifted * row[j];
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      for (auto& p : row) p /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < kPerplexityTolerance) break;
      if (diff > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
  }
  return P;
}

Matrix symmetrize_affinities(const Matrix& conditional) {
  const std::size_t n = conditional.rows();
  Matrix P(n, n);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) P(i, j) = (conditional(i, j) + conditional(j, i)) * scale;
  }
  return P;
}

namespace {

// Student-t kernel values 1 / (1 + |y_i - y_j|^2) with a zero diagonal; returns their sum.
double student_kernel(const Matrix& Y, Matrix& kernel) {
  const std::size_t n = Y.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    kernel(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 1.0 / (1.0 + squared_distance(Y.row(i), Y.row(j)));
      kernel(i, j) = v;
      kernel(j, i) = v;
      total += 2.0 * v;
    }
  }
  return total;
}

double kl_from_kernel(const Matrix& P, const Matrix& kernel, double total) {
  const std::size_t n = P.rows();
  double kl = 0.0;
  const double log_total = std::log(total);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double p = P(i, j);
      if (i == j || p <= 0.0) continue;
      kl += p * (std::log(p) - (std::log(kernel(i, j)) - log_total));
    }
  }
  return std::max(kl, 0.0);
}

}  // namespace

double tsne_kl(const Matrix& P, const Matrix& Y) {
  Matrix kernel(Y.rows(), Y.rows());
  const double total = student_kernel(Y, kernel);
  return kl_from_kernel(P, kernel, total);
}

TsneResult tsne(const Matrix& X_in, const TsneConfig& config) {
  const std::size_t n = X_in.rows();
  if (n < 4) throw Error(ErrorCode::TooFewPoints, "t-SNE needs at least 4 points");
  if (!(config.perplexity > 0.0)) throw Error(ErrorCode::InvalidConfig, "perplexity must be positive");
  if (!(config.perplexity < static_cast<double>(n - 1) / 3.0)) {
    throw Error(ErrorCode::PerplexityTooLarge,
                "perplexity must be below (N-1)/3 = " + std::to_string((n - 1) / 3.0));
  }
  if (config.iterations == 0) throw Error(ErrorCode::InvalidConfig, "iterations must be positive");

  Rng rng(config.seed);
  Matrix X = X_in;
  jitter_duplicates(X, rng);
  const Matrix P = symmetrize_affinities(conditional_affinities(X, config.perplexity));

  constexpr std::size_t dims = 2;
  TsneResult result;
  Matrix& Y = result.embedding;
  Y = Matrix(n, dims);
  for (auto& v : Y.values()) v = 1e-4 * rng.normal();

  Matrix update(n, dims);
  Matrix gains(n, dims, 1.0);
  Matrix grad(n, dims);
  Matrix kernel(n, n);
  result.kl.reserve(config.iterations + 1);

  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    const double total = student_kernel(Y, kernel);
    result.kl.push_back(kl_from_kernel(P, kernel, total));

    const double exaggeration = iter < config.exaggeration_iterations ? config.exaggeration : 1.0;
    const double momentum =
        iter < config.momentum_switch ? config.initial_momentum : config.final_momentum;

    for (std::size_t i = 0; i < n; ++i) {
      double g0 = 0.0;
      double g1 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double k = kernel(i, j);
        const double mult = (exaggeration * P(i, j) - k / total) * k;
        g0 += mult * (Y(i, 0) - Y(j, 0));
        g1 += mult * (Y(i, 1) - Y(j, 1));
      }
      grad(i, 0) = 4.0 * g0;
      grad(i, 1) = 4.0 * g1;
    }

    for (std::size_t idx = 0; idx < Y.size(); ++idx) {
      double& gain = gains.values()[idx];
      const double g = grad.values()[idx];
      double& u = update.values()[idx];
      gain = ((g > 0.0) != (u > 0.0)) ? gain + 0.2 : gain * 0.8;
      gain = std::max(gain, 0.01);
      u = momentum * u - config.learning_rate * gain * g;
      Y.values()[idx] += u;
    }

    for (std::size_t d = 0; d < dims; ++d) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += Y(i, d);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) Y(i, d) -= mean;
    }
  }
  result.kl.push_back(tsne_kl(P, Y));
  return result;
}

}  // namespace textshift
