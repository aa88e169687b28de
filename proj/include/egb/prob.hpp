#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "egb/errors.hpp"

namespace egb {

using TokenId = int32_t;

/// Normalized probability vector over a vocabulary at one decoding position.
struct TokenDistribution {
  std::vector<double> probs;

  int vocab_size() const { return static_cast<int>(probs.size()); }

  /// Throws DistributionError unless every entry is >= 0 and the entries sum
  /// to 1 within 1e-6 absolute.
  void validate() const;

  /// Validating factory.
  static TokenDistribution make(std::vector<double> probs);

  bool operator==(const TokenDistribution& other) const = default;
};

/// Entropy plus varentropy of one next-token distribution.
struct UncertaintyReading {
  double entropy_bits = 0.0;
  double varentropy_bits2 = 0.0;
};

namespace prob {

/// Shannon entropy in bits, -sum p_i log2 p_i with 0*log2(0) = 0.
/// Result lies in [0, log2 V].
double entropy(const TokenDistribution& dist);

/// Variance of token surprisal in bits^2: sum p_i (-log2 p_i - H)^2.
double varentropy(const TokenDistribution& dist);

UncertaintyReading uncertainty(const TokenDistribution& dist);

/// Renormalized p_i^(1/temperature). temperature = 1 returns the input
/// unchanged; temperature <= 0 throws ParameterError. Preserves argmax.
TokenDistribution apply_temperature(const TokenDistribution& dist, double temperature);

/// Draws a token index from `dist` using `rng`. Bit-reproducible: the uniform
/// variate is built from raw rng output rather than std::uniform_real_distribution.
TokenId sample(const TokenDistribution& dist, std::mt19937_64& rng);

/// Index of the largest entry; ties go to the lower index.
TokenId argmax(const TokenDistribution& dist);

/// Token ids ordered by descending probability (ties by lower id), restricted
/// to the support (p > 0). Used for diversified branch expansion.
std::vector<TokenId> support_by_probability(const TokenDistribution& dist);

}  // namespace prob
}  // namespace egb
