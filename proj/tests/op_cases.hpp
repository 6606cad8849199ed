#pragma once

#include "helpers.hpp"

#include <functional>
#include <utility>

namespace mmehr::testing {

inline Tensor row(std::vector<double> v) {
  const Index n = static_cast<Index>(v.size());
  return Tensor({1, n}, std::move(v));
}

// Projects a tensor-valued op onto a scalar with fixed random weights so every
// output entry contributes a distinct gradient.
inline Var project(Tape& tape, Var y, std::uint64_t seed) {
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  return sum(mul(y, tape.constant(random_tensor(rng, y.shape()))));
}

struct OpCase {
  const char* name;
  std::function<std::pair<ScalarFn, std::vector<Tensor>>(Rng&, std::uint64_t)> make;
};

inline std::vector<OpCase> op_cases() {
  const auto dim = [](Rng& rng) { return static_cast<Index>(rng.integer(1, 5)); };
  std::vector<OpCase> cases;
  cases.push_back({"matmul", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng), k = dim(rng), n = dim(rng);
                     ScalarFn f = [s](Tape& t, std::span<const Var> v) { return project(t, matmul(v[0], v[1]), s); };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, k}), random_tensor(rng, {k, n})}};
                   }});
  cases.push_back({"add_broadcast", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng), n = dim(rng);
                     ScalarFn f = [s](Tape& t, std::span<const Var> v) { return project(t, add(v[0], v[1]), s); };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, n}), random_tensor(rng, {n})}};
                   }});
  cases.push_back({"sub", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng), n = dim(rng);
                     ScalarFn f = [s](Tape& t, std::span<const Var> v) { return project(t, sub(v[0], v[1]), s); };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, n}), random_tensor(rng, {m, n})}};
                   }});
  cases.push_back({"mul_broadcast", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng), n = dim(rng);
                     ScalarFn f = [s](Tape& t, std::span<const Var> v) { return project(t, mul(v[0], v[1]), s); };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, n}), random_tensor(rng, {n})}};
                   }});
  cases.push_back({"scale", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng), n = dim(rng);
                     ScalarFn f = [s](Tape& t, std::span<const Var> v) { return project(t, scale(v[0], -1.7), s); };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, n})}};
                   }});
  cases.push_back({"concat", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng), a = dim(rng), b = dim(rng);
                     ScalarFn f = [s](Tape& t, std::span<const Var> v) {
                       const Var parts[] = {v[0], v[1]};
                       const Var rows[] = {concat(parts, -1), concat(parts, -1)};
                       return project(t, concat(rows, 0), s);
                     };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, a}), random_tensor(rng, {m, b})}};
                   }});
  cases.push_back({"slice", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng) + 1, n = dim(rng) + 1;
                     ScalarFn f = [s, n](Tape& t, std::span<const Var> v) {
                       return project(t, slice(slice(v[0], 1, 1, n - 1), 0, 0, 1), s);
                     };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, n})}};
                   }});
  cases.push_back({"transpose", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng), n = dim(rng);
                     ScalarFn f = [s](Tape& t, std::span<const Var> v) { return project(t, transpose(v[0]), s); };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, n})}};
                   }});
  cases.push_back({"reshape", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng), n = dim(rng);
                     ScalarFn f = [s, m, n](Tape& t, std::span<const Var> v) {
                       return project(t, reshape(v[0], {n, m}), s);
                     };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, n})}};
                   }});
  cases.push_back({"relu", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng), n = dim(rng);
                     ScalarFn f = [s](Tape& t, std::span<const Var> v) { return project(t, relu(v[0]), s); };
                     return std::pair{f, std::vector<Tensor>{away_from_zero(rng, {m, n})}};
                   }});
  cases.push_back({"sigmoid", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng), n = dim(rng);
                     ScalarFn f = [s](Tape& t, std::span<const Var> v) { return project(t, sigmoid(v[0]), s); };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, n}, 3.0)}};
                   }});
  cases.push_back({"tanh", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng), n = dim(rng);
                     ScalarFn f = [s](Tape& t, std::span<const Var> v) { return project(t, tanh(v[0]), s); };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, n})}};
                   }});
  cases.push_back({"softmax", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng), n = dim(rng) + 1;
                     ScalarFn f = [s](Tape& t, std::span<const Var> v) { return project(t, softmax(v[0]), s); };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, n}, 2.0)}};
                   }});
  cases.push_back({"layer_norm", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng), n = dim(rng) + 1;
                     ScalarFn f = [s](Tape& t, std::span<const Var> v) {
                       return project(t, layer_norm(v[0], v[1], v[2]), s);
                     };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, n}), random_tensor(rng, {n}),
                                                             random_tensor(rng, {n})}};
                   }});
  cases.push_back({"gather_rows", [dim](Rng& rng, std::uint64_t s) {
                     const Index v = dim(rng) + 1, d = dim(rng);
                     std::vector<Index> idx;
                     for (int i = 0; i < 5; ++i) idx.push_back(static_cast<Index>(rng.index(static_cast<std::size_t>(v))));
                     ScalarFn f = [s, idx](Tape& t, std::span<const Var> x) { return project(t, gather_rows(x[0], idx), s); };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {v, d})}};
                   }});
  cases.push_back({"mean", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng), n = dim(rng);
                     ScalarFn f = [s](Tape& t, std::span<const Var> v) {
                       return add(project(t, mean(v[0], 0), s), project(t, mean(v[0], 1), s + 1));
                     };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, n})}};
                   }});
  cases.push_back({"sum", [dim](Rng& rng, std::uint64_t) {
                     const Index m = dim(rng), n = dim(rng);
                     ScalarFn f = [](Tape&, std::span<const Var> v) { return sum(mul(v[0], v[0])); };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, n})}};
                   }});
  cases.push_back({"bce_with_logits", [dim](Rng& rng, std::uint64_t) {
                     const Index m = dim(rng);
                     Tensor labels({m, 1});
                     for (Index i = 0; i < m; ++i) labels[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
                     ScalarFn f = [labels](Tape&, std::span<const Var> v) { return bce_with_logits(v[0], labels); };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, 1}, 3.0)}};
                   }});
  cases.push_back({"custom", [dim](Rng& rng, std::uint64_t s) {
                     const Index m = dim(rng), n = dim(rng);
                     ScalarFn f = [s](Tape& t, std::span<const Var> v) {
                       Tensor cube(v[0].shape(), MatrixXd(v[0].value().matrix().array().cube()));
                       const Var y = t.custom(v.first(1), std::move(cube),
                                              [](const Tensor& g, std::span<const Tensor* const> in, const Tensor&) {
                                                MatrixXd d = 3.0 * in[0]->matrix().array().square() * g.matrix().array();
                                                return std::vector<Tensor>{Tensor(in[0]->shape(), std::move(d))};
                                              });
                       return project(t, y, s);
                     };
                     return std::pair{f, std::vector<Tensor>{random_tensor(rng, {m, n})}};
                   }});
  return cases;
}


}  // namespace mmehr::testing
