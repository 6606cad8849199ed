#pragma once

#include "mmehr/autodiff.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>

namespace mmehr {

enum class ModelKind { kFusion, kLstmVars, kTransformerVars, kNotesOnly, kLstmFusion };

std::string_view model_kind_name(ModelKind kind);
/// Accepts "fusion", "lstm_vars", "transformer_vars", "notes_only", "lstm_fusion".
ModelKind parse_model_kind(std::string_view name);

enum class NotesPooling { kMaskedMean, kMean };

struct ModelConfig {
  Index hours = 48;
  Index notes_dim = 768;  // D1
  Index ts_dim = 76;      // D2
  Index notes_out = 64;   // D3
  Index ts_out = 64;      // D4
  Index mm_out = 128;     // D5, transformer model width
  Index layers = 2;
  Index heads = 4;
  Index ff_dim = 512;
  std::vector<Index> head_hidden = {64};
  Index lstm_hidden = 64;
  NotesPooling notes_pooling = NotesPooling::kMaskedMean;
  /// Sinusoidal positions on the hour tokens; off only in tests.
  bool positions = true;

  /// Throws on non-positive dims or a width not divisible by the head count.
  void validate(ModelKind kind) const;
};

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Named parameters in a fixed insertion order.
class Parameters {
 public:
  void add(std::string name, Tensor value);

  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;
  const Tensor& at(const std::string& name) const { return tensors_[index_of(name)]; }
  Tensor& at(const std::string& name) { return tensors_[index_of(name)]; }

  Index scalar_count() const;
  /// Weight matrices (rank-2 tensors) are the L2-regularised subset.
  static bool is_weight(const Tensor& t) { return t.rank() == 2; }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parameters registered as leaves on one tape.
class ParamVars {
 public:
  ParamVars(Tape& tape, const Parameters& params, bool requires_grad = true);
  /// Wraps vars already on a tape, one per parameter in order (used by gradient checks).
  ParamVars(const Parameters& params, std::vector<Var> vars);

  Var operator()(const std::string& name) const { return vars_[params_->index_of(name)]; }
  Var operator[](std::size_t i) const { return vars_[i]; }
  std::size_t size() const { return vars_.size(); }

 private:
  const Parameters* params_;
  std::vector<Var> vars_;
};

/// pe[p, 2i] = sin(p / 10000^(2i/d)), pe[p, 2i+1] = cos(p / 10000^(2i/d)).
template <typename Scalar = double>
RowMatrix<Scalar> sinusoidal_positions(Index positions, Index dim) {
  if (dim % 2 != 0) throw Error("sinusoidal_positions: model width must be even, got " + std::to_string(dim));
  RowMatrix<Scalar> pe(positions, dim);
  for (Index p = 0; p < positions; ++p) {
    for (Index i = 0; i < dim; i += 2) {
      const Scalar angle = static_cast<Scalar>(p) / std::pow(Scalar(10000), static_cast<Scalar>(i) / static_cast<Scalar>(dim));
      pe(p, i) = std::sin(angle);
      pe(p, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

struct EncodedStreams {
  Var notes;       // L x D3
  Var ts;          // L x D4
  Var multimodal;  // L x D5
};

/// Notes/TS/MM encoders on per-hour features.
EncodedStreams encode_streams(const ParamVars& p, Var notes, Var ts);

struct ForwardTrace {
  std::vector<MatrixXd> attention;  // one (L+1) x (L+1) matrix per layer and head
};

/// Post-norm encoder stack over [CLS; tokens]; returns the CLS output as [1, D].
Var transformer_forward(const ParamVars& p, Var tokens, const ModelConfig& config, ForwardTrace* trace = nullptr);

/// Single-layer LSTM over the rows of `sequence`; returns the last hidden state [1, H].
Var lstm_forward(const ParamVars& p, Var sequence, Index hidden);

struct EpisodeVars {
  Var notes;  // L x D1
  Var ts;     // L x D2
  const Eigen::VectorXd* presence = nullptr;
};

class Model {
 public:
  Model(ModelKind kind, ModelConfig config, Parameters params);

  /// Glorot-uniform weights, zero biases, unit layer-norm gains, forget-gate bias 1.
  static Model initialize(ModelKind kind, const ModelConfig& config, std::uint64_t seed);

  ModelKind kind() const { return kind_; }
  const ModelConfig& config() const { return config_; }
  const Parameters& params() const { return params_; }
  Parameters& params() { return params_; }

  /// Records the forward pass and returns the [1, 1] logit.
  Var logit(const ParamVars& p, const EpisodeVars& in, ForwardTrace* trace = nullptr) const;

  double predict(const MatrixXd& notes, const Eigen::VectorXd& presence, const MatrixXd& ts) const;

 private:
  ModelKind kind_;
  ModelConfig config_;
  Parameters params_;
};

/// Parameter names and shapes implied by a configuration, in creation order.
std::vector<std::pair<std::string, Shape>> parameter_layout(ModelKind kind, const ModelConfig& config);

}  // namespace mmehr
