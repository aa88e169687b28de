#include "egb/prob.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace egb {

void TokenDistribution::validate() const {
  if (probs.empty()) throw DistributionError("empty distribution");
  double sum = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (!(p >= 0.0))
      throw DistributionError("negative or NaN probability at index " + std::to_string(i));
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw DistributionError("probabilities sum to " + std::to_string(sum) +
                            ", expected 1 within 1e-6");
}

TokenDistribution TokenDistribution::make(std::vector<double> probs) {
  TokenDistribution d{std::move(probs)};
  d.validate();
  return d;
}

namespace prob {

double entropy(const TokenDistribution& dist) {
  dist.validate();
  double h = 0.0;
  for (double p : dist.probs) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return std::max(0.0, h);
}

double varentropy(const TokenDistribution& dist) {
  dist.validate();
  const double h = entropy(dist);
  double v = 0.0;
  for (double p : dist.probs) {
    if (p > 0.0) {
      const double s = -std::log2(p) - h;
      v += p * s * s;
    }
  }
  return std::max(0.0, v);
}

UncertaintyReading uncertainty(const TokenDistribution& dist) {
  dist.validate();
  double h = 0.0;
  for (double p : dist.probs) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  h = std::max(0.0, h);
  double v = 0.0;
  for (double p : dist.probs) {
    if (p > 0.0) {
      const double s = -std::log2(p) - h;
      v += p * s * s;
    }
  }
  return {h, std::max(0.0, v)};
}

TokenDistribution apply_temperature(const TokenDistribution& dist, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("temperature must be > 0");
  dist.validate();
  if (temperature == 1.0) return dist;
  const double inv = 1.0 / temperature;
  std::vector<double> out(dist.probs.size(), 0.0);
  double sum = 0.0;
  for (size_t i = 0; i < dist.probs.size(); ++i) {
    const double p = dist.probs[i];
    if (p > 0.0) {
      out[i] = std::exp(inv * std::log(p));
      sum += out[i];
    }
  }
  if (sum <= 0.0) throw DistributionError("temperature scaling collapsed the distribution");
  for (double& p : out) p /= sum;
  return TokenDistribution{std::move(out)};
}

TokenId sample(const TokenDistribution& dist, std::mt19937_64& rng) {
  dist.validate();
  // 53-bit uniform in [0, 1); avoids implementation-defined
  // std::uniform_real_distribution so draws are reproducible everywhere.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double cum = 0.0;
  TokenId last_positive = 0;
  for (size_t i = 0; i < dist.probs.size(); ++i) {
    const double p = dist.probs[i];
    if (p <= 0.0) continue;
    cum += p;
    last_positive = static_cast<TokenId>(i);
    if (u < cum) return last_positive;
  }
  return last_positive;  // rounding slack at the top of the CDF
}

TokenId argmax(const TokenDistribution& dist) {
  return static_cast<TokenId>(
      std::max_element(dist.probs.begin(), dist.probs.end()) - dist.probs.begin());
}

std::vector<TokenId> support_by_probability(const TokenDistribution& dist) {
  std::vector<TokenId> ids;
  for (size_t i = 0; i < dist.probs.size(); ++i) {
    if (dist.probs[i] > 0.0) ids.push_back(static_cast<TokenId>(i));
  }
  std::stable_sort(ids.begin(), ids.end(), [&](TokenId a, TokenId b) {
    return dist.probs[a] > dist.probs[b];
  });
  return ids;
}

}  // namespace prob
}  // namespace egb
