#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "textshift/matrix.hpp"

namespace textshift {

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;
  std::uint64_t seed = 1;
};

inline constexpr double kPerplexityTolerance = 1e-5;
inline constexpr std::size_t kPerplexitySearchSteps = 50;

/// Row-conditional Gaussian affinities p_{j|i}. Each row's bandwidth is found
/// by bisection on the precision so that the row entropy matches
/// log(perplexity) within kPerplexityTolerance (at most 50 steps).
Matrix conditional_affinities(const Matrix& X, double perplexity);

/// (P + P^T) / 2N, so the joint matrix sums to one.
Matrix symmetrize_affinities(const Matrix& conditional);

/// KL(P || Q) with Student-t affinities Q computed from the embedding Y.
double tsne_kl(const Matrix& P, const Matrix& Y);

struct TsneResult {
  Matrix embedding;        // N x 2
  std::vector<double> kl;  // kl[t] is the divergence before iteration t; last entry is final
};

/// Exact O(N^2) t-SNE to two dimensions. TooFewPoints when N < 4;
/// PerplexityTooLarge unless perplexity < (N - 1) / 3. Rows closer than
/// 1e-12 to an earlier row are jittered before affinities are computed.
TsneResult tsne(const Matrix& X, const TsneConfig& config);

}  // namespace textshift
