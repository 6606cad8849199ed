#pragma once

#include "mmehr/model.hpp"
#include "mmehr/random.hpp"

namespace mmehr::testing {

inline Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = scale * rng.normal();
  return t;
}

inline MatrixXd random_matrix(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  MatrixXd m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

/// Entries bounded away from zero, so ReLU kinks stay out of finite-difference reach.
inline Tensor away_from_zero(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) {
    const double v = rng.uniform(0.2, 2.0);
    t.data()[i] = rng.bernoulli(0.5) ? v : -v;
  }
  return t;
}

/// Small fusion configuration used by gradient checks.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.hours = 8;
  c.notes_dim = 16;
  c.ts_dim = 76;
  c.notes_out = 8;
  c.ts_out = 8;
  c.mm_out = 32;
  c.layers = 1;
  c.heads = 4;
  c.ff_dim = 32;
  c.head_hidden = {8};
  c.lstm_hidden = 6;
  return c;
}

inline Eigen::VectorXd presence_of(Rng& rng, Index hours) {
  Eigen::VectorXd p(hours);
  for (Index t = 0; t < hours; ++t) p(t) = rng.bernoulli(0.6) ? 1.0 : 0.0;
  p(0) = 1.0;
  return p;
}

/// Sum of (probability-logit) BCE over one episode, with every parameter and
/// both inputs as differentiable leaves.
inline ScalarFn model_loss(const Model& model, const Eigen::VectorXd& presence, int label) {
  return [&model, &presence, label](Tape&, std::span<const Var> v) {
    const std::size_t n = model.params().size();
    const ParamVars p(model.params(), std::vector<Var>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n)));
    const EpisodeVars in{v[n], v[n + 1], &presence};
    return bce_with_logits(model.logit(p, in), Tensor({1, 1}, std::vector<double>{static_cast<double>(label)}));
  };
}

inline std::vector<Tensor> model_inputs(const Model& model, const MatrixXd& notes, const MatrixXd& ts) {
  std::vector<Tensor> xs;
  for (std::size_t i = 0; i < model.params().size(); ++i) xs.push_back(model.params()[i]);
  xs.push_back(Tensor::from_matrix(notes));
  xs.push_back(Tensor::from_matrix(ts));
  return xs;
}

}  // namespace mmehr::testing
