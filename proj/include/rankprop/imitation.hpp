#pragma once

// Imitation ranker: a tanh MLP scorer trained to reproduce logged orderings
// with a pairwise (RankNet) or listwise (ListMLE) objective.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "rankprop/core.hpp"
#include "rankprop/data.hpp"

namespace rankprop {

/// Fully connected layer, weights row-major (out x in).
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  bool operator==(const DenseLayer&) const = default;
};

/// tanh on every hidden layer, linear scalar output.
struct MlpParams {
  std::vector<DenseLayer> layers;

  static MlpParams zeros(std::span<const std::size_t> dims);
  std::vector<std::size_t> dims() const;
  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  std::size_t num_params() const;

  /// Layer by layer: weights then bias.
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);

  /// this += alpha * other (same shape).
  void add_scaled(double alpha, const MlpParams& other);

  bool operator==(const MlpParams&) const = default;
};

double mlp_forward(const MlpParams& params, std::span<const double> x);

enum class Objective { kPairwise, kListMle };
enum class ModelSize { kSmall, kMedium, kBig };

std::string_view objective_name(Objective o);
Objective parse_objective(std::string_view s);
std::string_view model_size_name(ModelSize s);
ModelSize parse_model_size(std::string_view s);

/// small = [F,1]; medium = [F,32,1]; big = [F,128,32,1].
std::vector<std::size_t> architecture(ModelSize size, std::size_t input_dim);

/// Uniform in +-sqrt(6 / (fan_in + fan_out)) per layer, zero biases.
MlpParams init_mlp(std::span<const std::size_t> dims, std::uint64_t seed);

struct LossGrad {
  double loss = 0.0;
  MlpParams grad;
};

/// Sum over impressions and logged pairs (d above z) of
/// log(1 + exp(-(s_d - s_z))), with its exact gradient.
LossGrad pairwise_loss_grad(const MlpParams& params, std::span<const LoggedRecord> batch,
                            const FeatureStore& features);

/// Sum over impressions of -sum_i [s_i - log sum_{j >= i} exp(s_j)] in logged
/// order, with its exact gradient.
LossGrad listmle_loss_grad(const MlpParams& params, std::span<const LoggedRecord> batch,
                           const FeatureStore& features);

struct ImitationTrainConfig {
  Objective objective = Objective::kPairwise;
  ModelSize size = ModelSize::kMedium;
  std::size_t epochs = 200;
  double learning_rate = 1e-2;
  std::size_t batch_size = 64;  // impressions per minibatch
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainingReport {
  std::vector<double> loss_curve;  // mean loss per impression, one entry per epoch
  double swap_percent = 0.0;
  double validation_tau = 0.0;     // NaN when no validation pool was given
};

struct ImitationResult {
  MlpParams params;
  TrainingReport report;
};

/// Minibatch gradient descent over the logged impressions (seeded shuffle
/// each epoch, mean gradient per batch). Throws std::invalid_argument on an
/// empty dataset or invalid config.
ImitationResult train_imitation(const LoggedDataset& ds, const ImitationTrainConfig& cfg,
                                const LabeledPool* validation = nullptr);

/// 100 * (#logged pairs d above z with s_d <= s_z) / (#logged pairs).
double swap_percent(const MlpParams& params, const LoggedDataset& ds);

/// Mean per-query Kendall tau-b between predicted scores and labels; queries
/// where tau is undefined (one label class) are skipped.
double validation_tau(const MlpParams& params, const LabeledPool& pool);

/// Text format, version 1: "key=value" lines; dims lists layer widths, then
/// W<i> (row-major, out x in) and b<i> per layer, shortest round-trip decimals.
void write_mlp(const MlpParams& params, std::ostream& out);
MlpParams read_mlp(std::istream& in);

}  // namespace rankprop
