#include "simal/autoencoder.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "simal/errors.h"
#include "simal/rng.h"

namespace simal {

namespace {

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

double activate(Activation act, double v) {
  return act == Activation::kLogistic ? logistic(v) : std::tanh(v);
}

// Derivative of the activation expressed through its output.
double activation_slope(Activation act, double out) {
  return act == Activation::kLogistic ? out * (1.0 - out) : 1.0 - out * out;
}

struct SparseInput {
  std::vector<std::uint32_t> index;
  std::vector<double> value;
};

SparseInput sparse_from_dense(std::span<const double> x) {
  SparseInput in;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0) {
      in.index.push_back(static_cast<std::uint32_t>(i));
      in.value.push_back(x[i]);
    }
  }
  return in;
}

SparseInput sparse_from_row(RowView row) {
  SparseInput in;
  in.index = row.active();
  in.value.assign(in.index.size(), 1.0);
  return in;
}

void check_input(const ModelParams& params, std::size_t size) {
  if (size != params.dims().input) {
    throw DimensionError("input has length " + std::to_string(size) + ", model expects " +
                         std::to_string(params.dims().input));
  }
}

// Activations of one forward pass. Attention and the gated input are only
// materialized at the nonzero input coordinates; elsewhere x* is zero.
struct Pass {
  const SparseInput* in = nullptr;
  std::vector<double> alpha;  // at in->index
  std::vector<double> gated;  // x* at in->index
  std::vector<std::vector<double>> outs;  // outs[l], l >= 1

  double loss = 0.0;
  std::vector<double> dense_x;
};

void run_forward(const ModelParams& params, const SparseInput& in, Pass& pass) {
  const auto& layers = params.layers();
  const std::size_t d = params.dims().input;
  pass.in = &in;
  const std::size_t nnz = in.index.size();

  const auto wa = params.weights(0);
  const auto ba = params.bias(0);
  pass.alpha.resize(nnz);
  pass.gated.resize(nnz);
  for (std::size_t a = 0; a < nnz; ++a) {
    const std::size_t i = in.index[a];
    double pre = ba[i];
    for (std::size_t b = 0; b < nnz; ++b) pre += wa[in.index[b] * d + i] * in.value[b];
    pass.alpha[a] = logistic(pre);
    pass.gated[a] = in.value[a] * pass.alpha[a];
  }

  pass.outs.resize(layers.size());
  {
    const LayerSpec& first = layers[1];
    const auto w = params.weights(1);
    const auto b = params.bias(1);
    auto& out = pass.outs[1];
    out.assign(b.begin(), b.end());
    for (std::size_t a = 0; a < nnz; ++a) {
      const double g = pass.gated[a];
      const double* col = w.data() + in.index[a] * first.out;
      for (std::size_t o = 0; o < first.out; ++o) out[o] += col[o] * g;
    }
    for (double& v : out) v = activate(first.activation, v);
  }
  for (std::size_t l = 2; l < layers.size(); ++l) {
    const LayerSpec& spec = layers[l];
    const auto w = params.weights(l);
    const auto b = params.bias(l);
    const auto& prev = pass.outs[l - 1];
    auto& out = pass.outs[l];
    out.assign(b.begin(), b.end());
    for (std::size_t j = 0; j < spec.in; ++j) {
      const double v = prev[j];
      const double* col = w.data() + j * spec.out;
      for (std::size_t o = 0; o < spec.out; ++o) out[o] += col[o] * v;
    }
    for (double& v : out) v = activate(spec.activation, v);
  }

  pass.dense_x.assign(d, 0.0);
  for (std::size_t a = 0; a < nnz; ++a) pass.dense_x[in.index[a]] = in.value[a];
  const auto& x_hat = pass.outs.back();
  double loss = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double r = pass.dense_x[i] - x_hat[i];
    loss += r * r;
  }
  pass.loss = loss;
}

// Adds d(loss)/d(params) of the pass into `grad`.
void run_backward(const ModelParams& params, const Pass& pass, std::span<double> grad) {
  const auto& layers = params.layers();
  const std::size_t d = params.dims().input;
  const SparseInput& in = *pass.in;
  const std::size_t nnz = in.index.size();

  const auto& x_hat = pass.outs.back();
  std::vector<double> g_out(d);
  for (std::size_t i = 0; i < d; ++i) g_out[i] = 2.0 * (x_hat[i] - pass.dense_x[i]);

  std::vector<double> g_pre;
  for (std::size_t l = layers.size() - 1; l >= 2; --l) {
    const LayerSpec& spec = layers[l];
    const auto& out = pass.outs[l];
    const auto& prev = pass.outs[l - 1];
    g_pre.resize(spec.out);
    for (std::size_t o = 0; o < spec.out; ++o) {
      g_pre[o] = g_out[o] * activation_slope(spec.activation, out[o]);
    }
    double* gw = grad.data() + spec.weight_offset;
    double* gb = grad.data() + spec.bias_offset;
    const auto w = params.weights(l);
    std::vector<double> g_in(spec.in, 0.0);
    for (std::size_t j = 0; j < spec.in; ++j) {
      const double v = prev[j];
      double* gcol = gw + j * spec.out;
      const double* col = w.data() + j * spec.out;
      double acc = 0.0;
      for (std::size_t o = 0; o < spec.out; ++o) {
        gcol[o] += g_pre[o] * v;
        acc += col[o] * g_pre[o];
      }
      g_in[j] = acc;
    }
    for (std::size_t o = 0; o < spec.out; ++o) gb[o] += g_pre[o];
    g_out = std::move(g_in);
  }

  const LayerSpec& first = layers[1];
  g_pre.resize(first.out);
  for (std::size_t o = 0; o < first.out; ++o) {
    g_pre[o] = g_out[o] * activation_slope(first.activation, pass.outs[1][o]);
  }
  {
    double* gw = grad.data() + first.weight_offset;
    double* gb = grad.data() + first.bias_offset;
    for (std::size_t o = 0; o < first.out; ++o) gb[o] += g_pre[o];
    const auto w = params.weights(1);
    const LayerSpec& gate = layers[0];
    double* gwa = grad.data() + gate.weight_offset;
    double* gba = grad.data() + gate.bias_offset;
    for (std::size_t a = 0; a < nnz; ++a) {
      const std::size_t i = in.index[a];
      double* gcol = gw + i * first.out;
      const double* col = w.data() + i * first.out;
      double g_gated = 0.0;
      for (std::size_t o = 0; o < first.out; ++o) {
        gcol[o] += g_pre[o] * pass.gated[a];
        g_gated += col[o] * g_pre[o];
      }
      const double alpha = pass.alpha[a];
      const double g_gate_pre = g_gated * in.value[a] * alpha * (1.0 - alpha);
      gba[i] += g_gate_pre;
      for (std::size_t b = 0; b < nnz; ++b) gwa[in.index[b] * d + i] += g_gate_pre * in.value[b];
    }
  }
}

}  // namespace

void ModelDims::validate() const {
  if (input < 2) throw ConfigError("model input dimension must be >= 2");
  if (latent < 1 || latent >= input) {
    throw ConfigError("latent dimension must satisfy 1 <= k < d (k=" + std::to_string(latent) +
                      ", d=" + std::to_string(input) + ")");
  }
}

ModelDims ModelDims::for_input(std::size_t d) {
  if (d < 2) throw ConfigError("model input dimension must be >= 2");
  const std::size_t k = std::max<std::size_t>(2, (d + 7) / 8);
  return ModelDims{d, std::min(k, d - 1), 0};
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0 && std::isfinite(learning_rate))) {
    throw ConfigError("learning_rate must be positive", "learning_rate");
  }
  if (epochs < 1) throw ConfigError("epochs must be >= 1", "epochs");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1", "batch_size");
  if (!(weight_init_scale > 0.0 && std::isfinite(weight_init_scale))) {
    throw ConfigError("weight_init_scale must be positive", "weight_init_scale");
  }
}

ModelParams::ModelParams(ModelDims dims) : dims_(dims) {
  dims_.validate();
  const std::size_t d = dims_.input;
  const std::size_t k = dims_.latent;
  const std::size_t h = dims_.hidden;
  auto add = [this](std::string name, std::size_t in, std::size_t out, Activation act) {
    LayerSpec spec;
    spec.name = std::move(name);
    spec.in = in;
    spec.out = out;
    spec.activation = act;
    spec.weight_offset = values_.size();
    spec.bias_offset = spec.weight_offset + in * out;
    values_.resize(spec.bias_offset + out, 0.0);
    layers_.push_back(std::move(spec));
  };
  add("attention", d, d, Activation::kLogistic);
  if (h) {
    add("encoder_hidden", d, h, Activation::kTanh);
    add("encoder_latent", h, k, Activation::kTanh);
    add("decoder_hidden", k, h, Activation::kTanh);
    add("decoder_output", h, d, Activation::kLogistic);
  } else {
    add("encoder_latent", d, k, Activation::kTanh);
    add("decoder_output", k, d, Activation::kLogistic);
  }
}

std::span<double> ModelParams::weights(std::size_t layer) {
  const LayerSpec& s = layers_.at(layer);
  return {values_.data() + s.weight_offset, s.in * s.out};
}

std::span<const double> ModelParams::weights(std::size_t layer) const {
  const LayerSpec& s = layers_.at(layer);
  return {values_.data() + s.weight_offset, s.in * s.out};
}

std::span<double> ModelParams::bias(std::size_t layer) {
  const LayerSpec& s = layers_.at(layer);
  return {values_.data() + s.bias_offset, s.out};
}

std::span<const double> ModelParams::bias(std::size_t layer) const {
  const LayerSpec& s = layers_.at(layer);
  return {values_.data() + s.bias_offset, s.out};
}

bool ModelParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ModelParams init_params(const ModelDims& dims, std::uint64_t seed, double weight_init_scale) {
  ModelParams params(dims);
  Rng rng(seed);
  for (std::size_t l = 0; l < params.layers().size(); ++l) {
    const double s = weight_init_scale / std::sqrt(static_cast<double>(params.layers()[l].in));
    for (double& w : params.weights(l)) w = rng.uniform(-s, s);
  }
  params.append_lineage(seed);
  return params;
}

std::vector<double> attention(const ModelParams& params, std::span<const double> x) {
  check_input(params, x.size());
  const std::size_t d = params.dims().input;
  const auto w = params.weights(0);
  const auto b = params.bias(0);
  std::vector<double> pre(b.begin(), b.end());
  for (std::size_t j = 0; j < d; ++j) {
    if (x[j] == 0.0) continue;
    const double* col = w.data() + j * d;
    for (std::size_t i = 0; i < d; ++i) pre[i] += col[i] * x[j];
  }
  for (double& v : pre) v = logistic(v);
  return pre;
}

ForwardResult forward(const ModelParams& params, std::span<const double> x) {
  check_input(params, x.size());
  const SparseInput in = sparse_from_dense(x);
  Pass pass;
  run_forward(params, in, pass);
  ForwardResult result;
  result.x_hat = pass.outs.back();
  result.z = pass.outs[params.latent_layer()];
  result.alpha = attention(params, x);
  return result;
}

double reconstruction_error(std::span<const double> x, std::span<const double> x_hat) {
  if (x.size() != x_hat.size()) throw DimensionError("reconstruction length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = x[i] - x_hat[i];
    sum += r * r;
  }
  return sum;
}

double reconstruction_error(const ModelParams& params, std::span<const double> x) {
  check_input(params, x.size());
  const SparseInput in = sparse_from_dense(x);
  Pass pass;
  run_forward(params, in, pass);
  return pass.loss;
}

double reconstruction_error(const ModelParams& params, RowView row) {
  check_input(params, row.size());
  const SparseInput in = sparse_from_row(row);
  Pass pass;
  run_forward(params, in, pass);
  return pass.loss;
}

double loss_and_gradient(const ModelParams& params, std::span<const double> x,
                         std::span<double> grad) {
  check_input(params, x.size());
  if (grad.size() != params.values().size()) throw DimensionError("gradient buffer size mismatch");
  const SparseInput in = sparse_from_dense(x);
  Pass pass;
  run_forward(params, in, pass);
  run_backward(params, pass, grad);
  return pass.loss;
}

double mean_loss(const ModelParams& params, const BinaryMatrix& matrix,
                 std::span<const RowId> rows) {
  if (rows.empty()) throw ContractError("mean_loss needs at least one row");
  double sum = 0.0;
  for (RowId r : rows) sum += reconstruction_error(params, matrix.row(r));
  return sum / static_cast<double>(rows.size());
}

ModelParams train(const ModelParams& params, const BinaryMatrix& matrix,
                  std::span<const RowId> rows, const TrainConfig& cfg,
                  std::vector<double>* epoch_losses) {
  cfg.validate();
  if (rows.empty()) throw ContractError("training set is empty");
  check_input(params, matrix.cols());

  ModelParams out = params;
  out.append_lineage(cfg.seed);
  const std::size_t d = out.dims().input;
  const auto& layers = out.layers();
  const LayerSpec& gate = layers[0];
  const LayerSpec& first = layers[1];

  std::vector<SparseInput> inputs;
  inputs.reserve(rows.size());
  for (RowId r : rows) inputs.push_back(sparse_from_row(matrix.row(r)));

  std::vector<double> grad(out.values().size(), 0.0);
  // Gate and first-encoder gradients are nonzero only at coordinates active in
  // some row of the batch, so only those are visited when applying a step.
  std::vector<std::uint32_t> touched;
  std::vector<char> is_touched(d, 0);

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(cfg.seed);
  Pass pass;
  double* v = out.values().data();

  if (epoch_losses) epoch_losses->clear();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      double batch_sum = 0.0;
      for (std::size_t p = start; p < end; ++p) {
        const SparseInput& in = inputs[order[p]];
        run_forward(out, in, pass);
        run_backward(out, pass, grad);
        batch_sum += pass.loss;
        for (std::uint32_t i : in.index) {
          if (!is_touched[i]) {
            is_touched[i] = 1;
            touched.push_back(i);
          }
        }
      }
      if (!std::isfinite(batch_sum)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(batch_index),
                            epoch, batch_index);
      }
      epoch_sum += batch_sum;

      const double step = cfg.learning_rate / static_cast<double>(end - start);
      auto apply = [&](std::size_t idx) {
        v[idx] -= step * grad[idx];
        grad[idx] = 0.0;
      };
      for (std::uint32_t j : touched) {
        for (std::uint32_t i : touched) apply(gate.weight_offset + j * d + i);
        apply(gate.bias_offset + j);
        for (std::size_t o = 0; o < first.out; ++o) apply(first.weight_offset + j * first.out + o);
      }
      for (std::size_t idx = first.bias_offset; idx < grad.size(); ++idx) apply(idx);
      for (std::uint32_t i : touched) is_touched[i] = 0;
      touched.clear();
    }
    if (epoch_losses) epoch_losses->push_back(epoch_sum / static_cast<double>(rows.size()));
  }
  if (!out.all_finite()) {
    throw TrainingError("non-finite parameters after training", cfg.epochs, 0);
  }
  return out;
}

std::map<RowId, double> score_all(const ModelParams& params, const BinaryMatrix& matrix,
                                  const IdSet& ids) {
  std::map<RowId, double> scores;
  for (RowId id : ids) scores.emplace_hint(scores.end(), id, reconstruction_error(params, matrix.row(id)));
  return scores;
}

std::vector<std::pair<std::uint32_t, double>> top_attention_features(const ModelParams& params,
                                                                     RowView row,
                                                                     std::size_t limit) {
  check_input(params, row.size());
  const SparseInput in = sparse_from_row(row);
  Pass pass;
  run_forward(params, in, pass);
  std::vector<std::pair<std::uint32_t, double>> out;
  out.reserve(in.index.size());
  for (std::size_t a = 0; a < in.index.size(); ++a) out.emplace_back(in.index[a], pass.alpha[a]);
  std::sort(out.begin(), out.end(), [](const auto& l, const auto& r) {
    return l.second != r.second ? l.second > r.second : l.first < r.first;
  });
  if (out.size() > limit) out.resize(limit);
  return out;
}

}  // namespace simal
