#pragma once

#include "mmehr/checkpoint.hpp"
#include "mmehr/dataset.hpp"
#include "mmehr/metrics.hpp"

#include <functional>

namespace mmehr {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double l2 = 1e-5;
  Index batch_size = 32;
  Index max_epochs = 30;
  /// Epochs without validation-AUCPR improvement before stopping; 0 stops after one epoch.
  Index patience = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// Sum of squared entries over weight matrices (biases, gains and the CLS vector excluded).
double l2_penalty(const Parameters& params);

/// Mean BCE of `logits` against `labels` plus lambda * sum ||W||^2, on the tape.
Var loss(Var logits, const Tensor& labels, const ParamVars& vars, const Parameters& params, double lambda);

struct AdamState {
  std::vector<MatrixXd> m;
  std::vector<MatrixXd> v;
  std::int64_t step = 0;
};

/// Bias-corrected Adam update in place.
void adam_step(Parameters& params, const std::vector<Tensor>& grads, AdamState& state, const TrainConfig& config);

/// Forward + backward for one episode; adds `weight` * dBCE/dparam into `grads`
/// and returns the episode's BCE.
double accumulate_episode_gradients(const Model& model, const EpisodeTensors& episode, double weight,
                                    std::vector<Tensor>& grads);

std::vector<double> predict_all(const Model& model, const std::vector<EpisodeTensors>& episodes);

struct TrainResult {
  Checkpoint best;
  EvalResult best_validation;
  Index best_epoch = 0;
  Index epochs_run = 0;
  /// Newline-delimited JSON events (epoch, split, metric, value, seed).
  std::vector<nlohmann::json> log;
};

/// Trains with Adam and early stopping on validation AUCPR; returns the
/// best-validation checkpoint. Throws TrainingDiverged on a non-finite loss.
TrainResult train(ModelKind kind, const ModelConfig& model_config, const std::vector<EpisodeTensors>& train_set,
                  const std::vector<EpisodeTensors>& validation_set, const TrainConfig& config,
                  const std::function<void(const nlohmann::json&)>& on_event = {});

/// One run per seed (seed replaces config.seed), fanned out over `jobs`
/// worker threads; results come back in seed order.
std::vector<TrainResult> train_seeds(ModelKind kind, const ModelConfig& model_config,
                                     const std::vector<EpisodeTensors>& train_set,
                                     const std::vector<EpisodeTensors>& validation_set, const TrainConfig& config,
                                     const std::vector<std::uint64_t>& seeds, unsigned jobs = 1);

}  // namespace mmehr
