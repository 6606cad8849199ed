#include "mmehr/train.hpp"
#include "mmehr/random.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

namespace mmehr {

void TrainConfig::validate() const {
  if (!(learning_rate > 0 && beta1 > 0 && beta2 > 0 && epsilon > 0 && l2 >= 0))
    throw Error("train config: rates must be positive");
  if (beta1 >= 1 || beta2 >= 1) throw Error("train config: Adam betas must be < 1");
  if (batch_size < 1 || max_epochs < 1 || patience < 0) throw Error("train config: batch size and epochs must be >= 1");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1},         {"beta2", c.beta2},
          {"epsilon", c.epsilon},             {"l2", c.l2},               {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},       {"patience", c.patience},   {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.l2 = j.value("l2", c.l2);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  return c;
}

double l2_penalty(const Parameters& params) {
  double total = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (Parameters::is_weight(params[i])) total += params[i].matrix().squaredNorm();
  return total;
}

Var loss(Var logits, const Tensor& labels, const ParamVars& vars, const Parameters& params, double lambda) {
  Var total = bce_with_logits(logits, labels);
  if (lambda == 0.0) return total;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!Parameters::is_weight(params[i])) continue;
    total = add(total, scale(sum(mul(vars[i], vars[i])), lambda));
  }
  return total;
}

void adam_step(Parameters& params, const std::vector<Tensor>& grads, AdamState& state, const TrainConfig& config) {
  if (grads.size() != params.size()) throw Error("adam_step: gradient count mismatch");
  if (state.m.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m.push_back(MatrixXd::Zero(params[i].rows(), params[i].cols()));
      state.v.push_back(MatrixXd::Zero(params[i].rows(), params[i].cols()));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const MatrixXd& g = grads[i].matrix();
    if (g.rows() != params[i].rows() || g.cols() != params[i].cols())
      throw ShapeError("adam_step", grads[i].shape(), params[i].shape());
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g.cwiseAbs2();
    params[i].matrix().array() -=
        config.learning_rate * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + config.epsilon);
  }
}

double accumulate_episode_gradients(const Model& model, const EpisodeTensors& episode, double weight,
                                    std::vector<Tensor>& grads) {
  Tape tape;
  const ParamVars p(tape, model.params());
  const EpisodeVars in{tape.constant(Tensor::from_matrix(episode.notes)), tape.constant(Tensor::from_matrix(episode.ts)),
                       &episode.presence};
  const Var z = model.logit(p, in);
  const Var bce = bce_with_logits(z, Tensor({1, 1}, std::vector<double>{static_cast<double>(episode.label)}));
  const Gradients g = tape.backward(bce);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (g.has(p[i])) grads[i].matrix() += weight * g[p[i]].matrix();
  return bce.value().item();
}

std::vector<double> predict_all(const Model& model, const std::vector<EpisodeTensors>& episodes) {
  std::vector<double> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) out.push_back(model.predict(e.notes, e.presence, e.ts));
  return out;
}

TrainResult train(ModelKind kind, const ModelConfig& model_config, const std::vector<EpisodeTensors>& train_set,
                  const std::vector<EpisodeTensors>& validation_set, const TrainConfig& config,
                  const std::function<void(const nlohmann::json&)>& on_event) {
  config.validate();
  if (train_set.empty() || validation_set.empty()) throw Error("train: empty train or validation split");
  const std::vector<int> val_labels = labels_of(validation_set);
  if (std::count(val_labels.begin(), val_labels.end(), 1) == 0)
    throw Error("train: validation split has no positive episodes (AUCPR undefined)");

  std::vector<nlohmann::json> log;
  std::optional<Checkpoint> best;
  EvalResult best_validation;
  Index best_epoch = 0;
  Index epochs_run = 0;
  const auto emit = [&](nlohmann::json event) {
    if (on_event) on_event(event);
    log.push_back(std::move(event));
  };
  emit({{"event", "config"},
        {"seed", config.seed},
        {"model", model_kind_name(kind)},
        {"model_config", model_config_to_json(model_config)},
        {"train_config", train_config_to_json(config)}});

  Model model = Model::initialize(kind, model_config, config.seed);
  AdamState adam;
  Rng shuffle_rng = Rng::substream(config.seed, "shuffle");
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  const auto make_metric = [&](Index epoch, const char* split, const char* metric, double value) {
    return nlohmann::json{{"epoch", epoch}, {"split", split}, {"metric", metric}, {"value", value}, {"seed", config.seed}};
  };

  Index since_best = 0;
  for (Index epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double weight = 1.0 / static_cast<double>(end - start);
      std::vector<Tensor> grads;
      for (std::size_t i = 0; i < model.params().size(); ++i) grads.push_back(Tensor::zeros_like(model.params()[i]));
      double batch_bce = 0.0;
      try {
        for (std::size_t k = start; k < end; ++k)
          batch_bce += accumulate_episode_gradients(model, train_set[order[k]], weight, grads);
      } catch (const NonFiniteError& ex) {
        throw TrainingDiverged("train: non-finite value at epoch " + std::to_string(epoch) + " (" + ex.what() + ")");
      }
      if (config.l2 > 0.0)
        for (std::size_t i = 0; i < model.params().size(); ++i)
          if (Parameters::is_weight(model.params()[i]))
            grads[i].matrix() += 2.0 * config.l2 * model.params()[i].matrix();
      const double batch_loss = batch_bce * weight + config.l2 * l2_penalty(model.params());
      if (!std::isfinite(batch_loss))
        throw TrainingDiverged("train: non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += batch_loss * static_cast<double>(end - start);
      adam_step(model.params(), grads, adam, config);
    }
    epoch_loss /= static_cast<double>(train_set.size());
    emit(make_metric(epoch, "train", "loss", epoch_loss));

    const std::vector<double> scores = predict_all(model, validation_set);
    EvalResult val;
    val.aucpr = aucpr(scores, val_labels);
    val.f1 = f1(scores, val_labels);
    val.counts = confusion(scores, val_labels);
    const bool two_classes = std::count(val_labels.begin(), val_labels.end(), 0) > 0;
    if (two_classes) val.aucroc = auroc(scores, val_labels);
    emit(make_metric(epoch, "validation", "aucpr", val.aucpr));
    if (two_classes) emit(make_metric(epoch, "validation", "aucroc", val.aucroc));
    emit(make_metric(epoch, "validation", "f1", val.f1));
    epochs_run = epoch;

    if (!best || val.aucpr > best_validation.aucpr) {
      since_best = 0;
      best_validation = val;
      best_epoch = epoch;
      best = Checkpoint{model, config.seed, adam.step,
                        {{"best_epoch", epoch}, {"train_config", train_config_to_json(config)}}};
    } else {
      ++since_best;
    }
    if (since_best >= config.patience) break;
  }
  emit({{"event", "done"},
        {"seed", config.seed},
        {"epochs", epochs_run},
        {"best_epoch", best_epoch},
        {"best_validation", eval_to_json(best_validation)}});
  return TrainResult{std::move(*best), best_validation, best_epoch, epochs_run, std::move(log)};
}

std::vector<TrainResult> train_seeds(ModelKind kind, const ModelConfig& model_config,
                                     const std::vector<EpisodeTensors>& train_set,
                                     const std::vector<EpisodeTensors>& validation_set, const TrainConfig& config,
                                     const std::vector<std::uint64_t>& seeds, unsigned jobs) {
  std::vector<std::optional<TrainResult>> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        TrainConfig c = config;
        c.seed = seeds[i];
        results[i] = train(kind, model_config, train_set, validation_set, c);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(seeds.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::vector<TrainResult> out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*results[i]));
  }
  return out;
}

}  // namespace mmehr
