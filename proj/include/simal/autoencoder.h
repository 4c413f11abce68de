#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "simal/binary_matrix.h"

namespace simal {

struct ModelDims {
  std::size_t input = 0;   // d
  std::size_t latent = 0;  // k, 1 <= k < d
  std::size_t hidden = 0;  // optional intermediate width; 0 disables

  void validate() const;

  // k = max(2, ceil(d/8)), capped at d-1.
  static ModelDims for_input(std::size_t d);

  bool operator==(const ModelDims&) const = default;
};

struct TrainConfig {
  double learning_rate = 1e-2;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double weight_init_scale = 1.0;

  void validate() const;
};

enum class Activation { kLogistic, kTanh };

// Affine map followed by an elementwise activation. Weights are stored
// input-major: weight (j -> i) lives at weight_offset + j * out + i.
struct LayerSpec {
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  Activation activation = Activation::kTanh;
};

// All trainable weights of the attention-gated autoencoder in one flat
// buffer. Layer 0 is the attention gate (d -> d, logistic). Then come the
// encoder (d -> [hidden ->] k, tanh) and the decoder (k -> [hidden, tanh ->]
// d, logistic).
class ModelParams {
 public:
  explicit ModelParams(ModelDims dims);

  const ModelDims& dims() const noexcept { return dims_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  // Index of the layer whose output is the latent code z.
  std::size_t latent_layer() const noexcept { return dims_.hidden ? 2 : 1; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;

  // Seeds of the init call followed by each training call applied so far.
  const std::vector<std::uint64_t>& lineage() const noexcept { return lineage_; }
  void append_lineage(std::uint64_t seed) { lineage_.push_back(seed); }

  bool all_finite() const;

  bool operator==(const ModelParams& other) const {
    return dims_ == other.dims_ && values_ == other.values_ && lineage_ == other.lineage_;
  }

 private:
  ModelDims dims_;
  std::vector<LayerSpec> layers_;
  std::vector<double> values_;
  std::vector<std::uint64_t> lineage_;
};

// Uniform weights in [-s, s] with s = weight_init_scale / sqrt(fan_in);
// zero biases.
ModelParams init_params(const ModelDims& dims, std::uint64_t seed,
                        double weight_init_scale = 1.0);

struct ForwardResult {
  std::vector<double> x_hat;  // length d, each in (0,1)
  std::vector<double> z;      // length k
  std::vector<double> alpha;  // length d, each in (0,1)
};

std::vector<double> attention(const ModelParams& params, std::span<const double> x);
ForwardResult forward(const ModelParams& params, std::span<const double> x);

// ||x - x_hat||^2.
double reconstruction_error(std::span<const double> x, std::span<const double> x_hat);
double reconstruction_error(const ModelParams& params, std::span<const double> x);
double reconstruction_error(const ModelParams& params, RowView row);

// Returns the reconstruction loss of `x` and adds its gradient with respect
// to every parameter into `grad` (same layout as params.values()).
double loss_and_gradient(const ModelParams& params, std::span<const double> x,
                         std::span<double> grad);

// Mean reconstruction loss over the given rows.
double mean_loss(const ModelParams& params, const BinaryMatrix& matrix,
                 std::span<const RowId> rows);

// Mini-batch gradient descent on the mean reconstruction loss. Rows are
// reshuffled every epoch from a stream seeded by cfg.seed. `epoch_losses`,
// when given, receives the mean per-sample loss seen during each epoch.
ModelParams train(const ModelParams& params, const BinaryMatrix& matrix,
                  std::span<const RowId> rows, const TrainConfig& cfg,
                  std::vector<double>* epoch_losses = nullptr);

std::map<RowId, double> score_all(const ModelParams& params, const BinaryMatrix& matrix,
                                  const IdSet& ids);

// Top `limit` active features of a binary row by attention weight, as
// (feature index, alpha) with ties broken by feature index.
std::vector<std::pair<std::uint32_t, double>> top_attention_features(const ModelParams& params,
                                                                     RowView row,
                                                                     std::size_t limit);

// Text checkpoint. Doubles are written as hex floats so a save/load round
// trip is exact.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_to_string(const ModelParams& params);
ModelParams checkpoint_from_string(std::string_view text);

}  // namespace simal
