#include "rankprop/clicks.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rankprop {

void ClickModelConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("click eta must be >= 0");
  if (!(eps_plus >= 0.0 && eps_plus <= 1.0) || !(eps_minus >= 0.0 && eps_minus <= 1.0)) {
    throw std::invalid_argument("click noise parameters must lie in [0,1]");
  }
  if (eps_plus < eps_minus) throw std::invalid_argument("click eps_plus must be >= eps_minus");
}

ClickVector simulate_clicks(const Impression& impression, std::span<const int> query_labels,
                            const ClickModelConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ClickVector clicks(impression.size(), 0);
  for (std::size_t pos = 0; pos < impression.size(); ++pos) {
    const auto d = impression.docs[pos].value;
    if (d >= query_labels.size()) {
      throw std::invalid_argument("no label for doc " + std::to_string(d) + " of query '" +
                                  impression.query.value + "'");
    }
    const double examine = std::pow(1.0 / static_cast<double>(pos + 1), cfg.eta);
    const double u_exam = unit(rng);
    const double u_click = unit(rng);
    const double p_click = query_labels[d] == 1 ? cfg.eps_plus : cfg.eps_minus;
    clicks[pos] = (u_exam < examine && u_click < p_click) ? 1 : 0;
  }
  return clicks;
}

void SwapConfig::validate() const {
  if (!(percent >= 0.0 && percent <= 100.0)) throw std::invalid_argument("swap B must lie in [0,100]");
}

std::vector<Impression> apply_randpair(std::span<const Impression> impressions,
                                       const SwapConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<Impression> out(impressions.begin(), impressions.end());
  if (cfg.percent == 0.0) return out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& imp : out) {
    if (imp.size() < 2) throw std::invalid_argument("RandPair swaps need K >= 2");
    const bool selected = unit(rng) < cfg.percent / 100.0;
    std::uniform_int_distribution<std::size_t> pick(0, imp.size() - 2);
    const std::size_t k = pick(rng);
    if (selected) std::swap(imp.docs[k], imp.docs[k + 1]);
  }
  return out;
}

}  // namespace rankprop
