#pragma once

// Position-biased noisy click model and RandPair swap injection.

#include <cstdint>
#include <span>
#include <vector>

#include "rankprop/core.hpp"
#include "rankprop/random.hpp"

namespace rankprop {

struct ClickModelConfig {
  double eta = 0.0;        // examination probability at rank k is (1/k)^eta
  double eps_plus = 1.0;   // click probability of an examined relevant doc
  double eps_minus = 0.1;  // click probability of an examined irrelevant doc

  void validate() const;
};

/// query_labels[d] is the binary label of DocId d. Draws two uniforms per
/// rank (examination, then click) so the stream advances by 2K draws per call
/// regardless of outcomes.
ClickVector simulate_clicks(const Impression& impression, std::span<const int> query_labels,
                            const ClickModelConfig& cfg, Rng& rng);

struct SwapConfig {
  double percent = 0.0;  // B in [0, 100]

  void validate() const;
};

/// Each impression independently gets, with probability B/100, exactly one
/// swap of ranks k and k+1 with k uniform in 1..K-1.
std::vector<Impression> apply_randpair(std::span<const Impression> impressions,
                                       const SwapConfig& cfg, Rng& rng);

}  // namespace rankprop
