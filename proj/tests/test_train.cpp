#include "helpers.hpp"

#include "mmehr/train.hpp"

#include <doctest.h>

#include <limits>

using namespace mmehr;
using namespace mmehr::testing;

namespace {

ModelConfig toy_config() {
  ModelConfig c = tiny_config();
  c.hours = 4;
  c.notes_dim = 8;
  c.ts_dim = 6;
  c.ts_out = 8;
  c.mm_out = 8;
  c.heads = 2;
  c.ff_dim = 8;
  return c;
}

// Label 1 shifts the first notes channel and the first series channel.
std::vector<EpisodeTensors> toy_set(Index n, std::uint64_t seed) {
  Rng rng(seed);
  const ModelConfig c = toy_config();
  std::vector<EpisodeTensors> out;
  for (Index i = 0; i < n; ++i) {
    EpisodeTensors e;
    e.id = "toy" + std::to_string(i);
    e.label = i % 3 == 0 ? 1 : 0;
    e.notes = random_matrix(rng, c.hours, c.notes_dim, 0.5);
    e.ts = random_matrix(rng, c.hours, c.ts_dim, 0.5);
    e.notes.col(0).array() += 2.0 * e.label - 1.0;
    e.ts.col(0).array() += 2.0 * e.label - 1.0;
    e.presence = Eigen::VectorXd::Ones(c.hours);
    out.push_back(std::move(e));
  }
  return out;
}

TrainConfig quick(Index epochs) {
  TrainConfig t;
  t.learning_rate = 1e-2;
  t.batch_size = 8;
  t.max_epochs = epochs;
  t.patience = epochs;
  return t;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("every model learns a separable toy problem") {
    const auto tr = toy_set(60, 1), va = toy_set(30, 2);
    for (ModelKind k : {ModelKind::kFusion, ModelKind::kLstmVars, ModelKind::kTransformerVars, ModelKind::kNotesOnly,
                        ModelKind::kLstmFusion}) {
      CAPTURE(model_kind_name(k));
      const TrainResult r = train(k, toy_config(), tr, va, quick(20));
      CHECK(r.best_validation.aucpr > 0.95);
      const auto scores = predict_all(r.best.model, va);
      CHECK(auroc(scores, labels_of(va)) > 0.95);
    }
  }

  TEST_CASE("training loss decreases") {
    const auto tr = toy_set(60, 3), va = toy_set(30, 4);
    const TrainResult r = train(ModelKind::kNotesOnly, toy_config(), tr, va, quick(5));
    std::vector<double> losses;
    for (const auto& e : r.log)
      if (e.value("metric", "") == "loss") losses.push_back(e["value"].get<double>());
    REQUIRE(losses.size() == 5);
    CHECK(losses.back() < losses.front());
  }

  TEST_CASE("patience zero stops after one epoch") {
    const auto tr = toy_set(20, 5), va = toy_set(12, 6);
    TrainConfig t = quick(10);
    t.patience = 0;
    const TrainResult r = train(ModelKind::kNotesOnly, toy_config(), tr, va, t);
    CHECK(r.epochs_run == 1);
    CHECK(r.best_epoch == 1);
  }

  TEST_CASE("early stopping keeps the best epoch") {
    const auto tr = toy_set(30, 7), va = toy_set(12, 8);
    TrainConfig t = quick(30);
    t.patience = 2;
    const TrainResult r = train(ModelKind::kNotesOnly, toy_config(), tr, va, t);
    CHECK(r.epochs_run <= 30);
    CHECK(r.best_epoch <= r.epochs_run);
    if (r.epochs_run < 30) CHECK(r.epochs_run == r.best_epoch + 2);
    const auto scores = predict_all(r.best.model, va);
    CHECK(aucpr(scores, labels_of(va)) == doctest::Approx(r.best_validation.aucpr).epsilon(1e-12));
  }

  TEST_CASE("training is deterministic per seed and parallel runs match serial ones") {
    const auto tr = toy_set(24, 9), va = toy_set(12, 10);
    const TrainConfig t = quick(3);
    const auto serial = train_seeds(ModelKind::kFusion, toy_config(), tr, va, t, {1, 2}, 1);
    const auto parallel = train_seeds(ModelKind::kFusion, toy_config(), tr, va, t, {1, 2}, 2);
    for (std::size_t s = 0; s < 2; ++s)
      CHECK(serialize_checkpoint(serial[s].best) == serialize_checkpoint(parallel[s].best));
    CHECK(serialize_checkpoint(serial[0].best) != serialize_checkpoint(serial[1].best));
  }

  TEST_CASE("bad inputs are rejected") {
    auto tr = toy_set(12, 11), va = toy_set(6, 12);
    for (auto& e : va) e.label = 0;
    CHECK_THROWS_AS(train(ModelKind::kNotesOnly, toy_config(), tr, va, quick(1)), Error);
    TrainConfig t = quick(1);
    t.learning_rate = 0.0;
    CHECK_THROWS_AS(t.validate(), Error);
    t = quick(1);
    t.batch_size = 0;
    CHECK_THROWS_AS(t.validate(), Error);
  }

  TEST_CASE("divergence is reported") {
    auto tr = toy_set(12, 13), va = toy_set(6, 14);
    tr[0].notes(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(train(ModelKind::kNotesOnly, toy_config(), tr, va, quick(2)), TrainingDiverged);
  }

  TEST_CASE("one Adam step by hand") {
    Parameters p;
    p.add("w", Tensor({1, 2}, std::vector<double>{1.0, -1.0}));
    AdamState s;
    TrainConfig t;
    t.learning_rate = 0.1;
    adam_step(p, {Tensor({1, 2}, std::vector<double>{0.5, -2.0})}, s, t);
    // After one bias-corrected step the update is lr * g / (|g| + eps').
    CHECK(p[0][0] == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(p[0][1] == doctest::Approx(-0.9).epsilon(1e-7));
    CHECK(s.step == 1);
    CHECK_THROWS_AS(adam_step(p, {}, s, t), Error);
  }

  TEST_CASE("l2 covers weight matrices only") {
    Parameters p;
    p.add("w", Tensor({1, 2}, std::vector<double>{1.0, 2.0}));
    p.add("b", Tensor({2}, std::vector<double>{3.0, 4.0}));
    CHECK(l2_penalty(p) == 5.0);
  }

  TEST_CASE("episode gradients match the loss on the tape") {
    const auto tr = toy_set(2, 15);
    const Model m = Model::initialize(ModelKind::kFusion, toy_config(), 0);
    std::vector<Tensor> grads;
    for (std::size_t i = 0; i < m.params().size(); ++i) grads.push_back(Tensor::zeros_like(m.params()[i]));
    const double bce = accumulate_episode_gradients(m, tr[0], 1.0, grads);
    const double p = m.predict(tr[0].notes, tr[0].presence, tr[0].ts);
    CHECK(bce == doctest::Approx(tr[0].label ? -std::log(p) : -std::log(1 - p)).epsilon(1e-10));
    const auto r = grad_check(model_loss(m, tr[0].presence, tr[0].label), model_inputs(m, tr[0].notes, tr[0].ts));
    CHECK(r.max_rel_error < 1e-5);
    double norm = 0.0;
    for (const auto& g : grads) norm += g.matrix().squaredNorm();
    CHECK(norm > 0.0);
  }
}
