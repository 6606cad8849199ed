#include "mmehr/attribution.hpp"
#include "mmehr/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_map>

namespace mmehr {

IGResult integrated_gradients(const DifferentiableFn& f, const Tensor& x, const Tensor& baseline, Index steps) {
  if (steps < 1) throw Error("integrated_gradients: steps must be >= 1");
  if (x.shape() != baseline.shape()) throw ShapeError("integrated_gradients", x.shape(), baseline.shape());
  const auto evaluate = [&](const Tensor& at) {
    Tape tape;
    return f(tape, tape.constant(at)).value().item();
  };

  IGResult out;
  const MatrixXd delta = x.matrix() - baseline.matrix();
  MatrixXd total = MatrixXd::Zero(x.rows(), x.cols());
  for (Index k = 1; k <= steps; ++k) {
    const double alpha = (static_cast<double>(k) - 0.5) / static_cast<double>(steps);
    Tape tape;
    const Var point = tape.leaf(Tensor(x.shape(), MatrixXd(baseline.matrix() + alpha * delta)));
    const Var y = f(tape, point);
    const Gradients g = tape.backward(y);
    const MatrixXd& grad = g[point].matrix();
    if (!grad.allFinite()) throw NonFiniteError("integrated_gradients");
    total += grad;
  }
  total /= static_cast<double>(steps);
  out.mean_gradient = Tensor(x.shape(), total);
  out.attributions = Tensor(x.shape(), MatrixXd(delta.cwiseProduct(total)));
  out.output = evaluate(x);
  out.baseline_output = evaluate(baseline);
  out.residual = std::abs(out.attributions.matrix().sum() - (out.output - out.baseline_output));
  return out;
}

DifferentiableFn notes_probability(const Model& model, const EpisodeTensors& episode) {
  return [&model, &episode](Tape& tape, Var notes) {
    const ParamVars p(tape, model.params(), false);
    const EpisodeVars in{notes, tape.constant(Tensor::from_matrix(episode.ts)), &episode.presence};
    return sigmoid(model.logit(p, in));
  };
}

namespace {

IGResult notes_ig(const Model& model, const EpisodeTensors& episode, const IGConfig& config) {
  if (config.steps < 8) throw Error("IG config: steps must be >= 8, got " + std::to_string(config.steps));
  const Tensor x = Tensor::from_matrix(episode.notes);
  return integrated_gradients(notes_probability(model, episode), x, Tensor::zeros_like(x), config.steps);
}

TokenAttribution hour_attribution(const EpisodeTensors& episode, const IGResult& ig, Index steps) {
  TokenAttribution out;
  out.episode_id = episode.id;
  out.steps = steps;
  out.output = ig.output;
  out.baseline_output = ig.baseline_output;
  out.residual = ig.residual;
  const MatrixXd& a = ig.attributions.matrix();
  for (Index h = 0; h < a.rows(); ++h) out.hour_scores.push_back(a.row(h).sum());
  return out;
}

}  // namespace

TokenAttribution attribute_note_hours(const Model& model, const EpisodeTensors& episode, const IGConfig& config) {
  TokenAttribution out = hour_attribution(episode, notes_ig(model, episode, config), config.steps);
  out.token_level = false;
  return out;
}

TokenAttribution attribute_note_tokens(const Model& model, const EpisodeTensors& episode,
                                       const std::vector<NoteEvent>& note_events, const EmbeddingSource& source,
                                       const IGConfig& config) {
  const auto* hash = std::get_if<HashEmbedder>(&source);
  if (!hash) throw GranularityUnavailable();
  const IGResult ig = notes_ig(model, episode, config);
  TokenAttribution out = hour_attribution(episode, ig, config.steps);

  const auto by_hour = tokens_by_hour(note_events, episode.notes.rows());
  const MatrixXd& g = ig.mean_gradient.matrix();
  for (std::size_t n = 0; n < note_events.size(); ++n) {
    const NoteEvent& note = note_events[n];
    const double count = static_cast<double>(by_hour[static_cast<std::size_t>(note.hour)].size());
    for (std::size_t i = 0; i < note.tokens.size(); ++i) {
      const Eigen::VectorXd v = hash_token_vector(note.tokens[i], hash->dim, hash->seed);
      // Zero baseline, so IG of the row is row .* g and splits over its mean terms.
      const double score = v.dot(g.row(note.hour).transpose()) / count;
      out.tokens.push_back({static_cast<Index>(n), note.hour, static_cast<Index>(i), note.tokens[i], score});
    }
  }
  return out;
}

bool is_separator(std::string_view token) {
  static const std::set<std::string, std::less<>> kSeparators = {
      ".", ",", ";", ":", "-", "--", "/", "(", ")", "[", "]", "*", "#", "+", "=", "|", "\n", "<br>", "[NEWLINE]"};
  if (kSeparators.count(token)) return true;
  return !token.empty() && std::all_of(token.begin(), token.end(), [](unsigned char c) {
    return std::ispunct(c) || std::isspace(c);
  });
}

bool is_numeric(std::string_view token) {
  bool digit = false;
  for (unsigned char c : token) {
    if (std::isdigit(c)) {
      digit = true;
    } else if (c != '.' && c != ',' && c != '-' && c != '+' && c != '%') {
      return false;
    }
  }
  return digit;
}

namespace {

bool better(const RankedWord& a, const RankedWord& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.word < b.word;
}

}  // namespace

std::vector<RankedWord> postprocess_tokens(const std::vector<TokenScore>& note_tokens) {
  std::vector<RankedWord> merged;
  bool open = false;  // whether the last word may take continuation pieces
  for (const TokenScore& t : note_tokens) {
    const bool continuation = t.token.size() > 2 && t.token.compare(0, 2, "##") == 0;
    if (continuation && open) {
      merged.back().word += t.token.substr(2);
      merged.back().score += t.score;
      merged.back().pieces.push_back(t.token);
      continue;
    }
    RankedWord w{continuation ? t.token.substr(2) : t.token, t.score, {t.token}};
    open = !is_separator(w.word);
    merged.push_back(std::move(w));
  }
  std::vector<RankedWord> kept;
  for (RankedWord& w : merged) {
    if (is_separator(w.word) || is_numeric(w.word) || w.word.size() <= 2) continue;
    kept.push_back(std::move(w));
  }
  std::stable_sort(kept.begin(), kept.end(), better);
  return kept;
}

std::vector<std::vector<TokenScore>> tokens_by_note(const TokenAttribution& attribution) {
  std::vector<std::vector<TokenScore>> notes;
  for (const TokenScore& t : attribution.tokens) {
    if (t.note < 0) throw Error("tokens_by_note: negative note index");
    if (static_cast<std::size_t>(t.note) >= notes.size()) notes.resize(static_cast<std::size_t>(t.note) + 1);
    notes[static_cast<std::size_t>(t.note)].push_back(t);
  }
  return notes;
}

std::map<std::string, Index> top_word_frequency(const std::vector<std::vector<RankedWord>>& note_rankings, Index k) {
  if (k < 1) throw Error("top_word_frequency: k must be >= 1");
  std::map<std::string, Index> counts;
  for (const auto& ranking : note_rankings) {
    // Best score per distinct word, then the top k of those.
    std::map<std::string, double> best;
    for (const RankedWord& w : ranking) {
      auto [it, inserted] = best.emplace(w.word, w.score);
      if (!inserted) it->second = std::max(it->second, w.score);
    }
    std::vector<RankedWord> distinct;
    for (const auto& [word, score] : best) distinct.push_back({word, score, {}});
    std::stable_sort(distinct.begin(), distinct.end(), better);
    const std::size_t take = std::min(distinct.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < take; ++i) ++counts[distinct[i].word];
  }
  return counts;
}

std::vector<WordStat> mean_word_scores(const std::vector<std::vector<RankedWord>>& note_rankings) {
  std::map<std::string, std::pair<double, Index>> acc;
  for (const auto& ranking : note_rankings)
    for (const RankedWord& w : ranking) {
      auto& [total, n] = acc[w.word];
      total += w.score;
      ++n;
    }
  std::vector<WordStat> out;
  for (const auto& [word, a] : acc) out.push_back({word, a.first / static_cast<double>(a.second), a.second});
  std::stable_sort(out.begin(), out.end(), [](const WordStat& a, const WordStat& b) {
    if (a.mean_score != b.mean_score) return a.mean_score > b.mean_score;
    return a.word < b.word;
  });
  return out;
}

std::vector<double> shapley_exact(const CoalitionValue& value, int n) {
  if (n < 1) throw Error("shapley_exact: need at least one player");
  if (n > kMaxExactPlayers)
    throw Error("shapley_exact: " + std::to_string(n) + " players exceeds the exact limit of " +
                std::to_string(kMaxExactPlayers) + "; use the sampled estimator");
  const std::uint64_t full = std::uint64_t{1} << n;
  std::vector<double> v(full);
  for (std::uint64_t s = 0; s < full; ++s) v[s] = value(s);

  // w(s) = s!(n-s-1)!/n! = 1 / (n * C(n-1, s))
  std::vector<double> weight(static_cast<std::size_t>(n));
  double binom = 1.0;
  for (int s = 0; s < n; ++s) {
    weight[static_cast<std::size_t>(s)] = 1.0 / (static_cast<double>(n) * binom);
    binom = binom * static_cast<double>(n - 1 - s) / static_cast<double>(s + 1);
  }
  std::vector<double> phi(static_cast<std::size_t>(n), 0.0);
  for (std::uint64_t s = 0; s < full; ++s) {
    const double w = weight[static_cast<std::size_t>(std::popcount(s))];
    for (int i = 0; i < n; ++i) {
      const std::uint64_t bit = std::uint64_t{1} << i;
      if (s & bit) continue;
      phi[static_cast<std::size_t>(i)] += w * (v[s | bit] - v[s]);
    }
  }
  return phi;
}

SampledShapley shapley_sampled(const CoalitionValue& value, int n, Index permutations, std::uint64_t seed) {
  if (n < 1 || n > 63) throw Error("shapley_sampled: player count must be in [1, 63]");
  if (permutations < 1) throw Error("shapley_sampled: need at least one permutation");
  Rng rng = Rng::substream(seed, "shapley");
  std::unordered_map<std::uint64_t, double> cache;
  const auto v = [&](std::uint64_t s) {
    auto it = cache.find(s);
    if (it != cache.end()) return it->second;
    const double r = value(s);
    cache.emplace(s, r);
    return r;
  };

  const auto un = static_cast<std::size_t>(n);
  std::vector<double> mean(un, 0.0), m2(un, 0.0);
  std::vector<int> order(un);
  for (std::size_t i = 0; i < un; ++i) order[i] = static_cast<int>(i);
  for (Index k = 1; k <= permutations; ++k) {
    rng.shuffle(order);
    std::uint64_t s = 0;
    double previous = v(s);
    for (int i : order) {
      s |= std::uint64_t{1} << i;
      const double current = v(s);
      const double x = current - previous;
      previous = current;
      auto& mu = mean[static_cast<std::size_t>(i)];
      const double d = x - mu;
      mu += d / static_cast<double>(k);
      m2[static_cast<std::size_t>(i)] += d * (x - mu);
    }
  }
  SampledShapley out;
  out.values = mean;
  out.permutations = permutations;
  out.standard_errors.resize(un, 0.0);
  if (permutations > 1)
    for (std::size_t i = 0; i < un; ++i)
      out.standard_errors[i] =
          std::sqrt(m2[i] / static_cast<double>(permutations - 1) / static_cast<double>(permutations));
  return out;
}

std::vector<std::size_t> ShapleyReport::ranking() const {
  std::vector<std::size_t> idx(variables.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return variables[a].mean_abs > variables[b].mean_abs; });
  return idx;
}

ShapleyReport variable_shapley(const Model& model, const std::vector<EpisodeTensors>& episodes,
                               const VariableSchema& schema, const ShapleyEstimator& estimator, bool trained) {
  if (episodes.empty()) throw Error("variable_shapley: no episodes");
  if (model.kind() == ModelKind::kNotesOnly) throw Error("variable_shapley: notes_only model has no variable input");
  const int n = static_cast<int>(schema.size());
  ShapleyReport report;
  report.estimator = estimator.kind == ShapleyEstimator::Kind::kExact ? "exact" : "sampled";
  report.permutations = estimator.kind == ShapleyEstimator::Kind::kExact ? 0 : estimator.permutations;
  if (!trained) report.warnings.push_back("model is untrained; attributions reflect initial weights");

  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const EpisodeTensors& ep = episodes[e];
    const CoalitionValue value = [&](std::uint64_t present) {
      MatrixXd ts = ep.ts;
      for (int v = 0; v < n; ++v)
        if (!(present & (std::uint64_t{1} << v))) clear_variable(ts, schema, v);
      return model.predict(ep.notes, ep.presence, ts);
    };
    EpisodeShapley row;
    row.episode_id = ep.id;
    if (estimator.kind == ShapleyEstimator::Kind::kExact) {
      row.values = shapley_exact(value, n);
      row.standard_errors.assign(row.values.size(), 0.0);
    } else {
      // Each episode gets its own permutation stream.
      SampledShapley s = shapley_sampled(value, n, estimator.permutations, estimator.seed + e);
      row.values = std::move(s.values);
      row.standard_errors = std::move(s.standard_errors);
    }
    row.output = value((std::uint64_t{1} << n) - 1);
    row.absent_output = value(0);
    report.episodes.push_back(std::move(row));
  }

  const double count = static_cast<double>(report.episodes.size());
  for (int v = 0; v < n; ++v) {
    VariableShapley s;
    s.variable = schema.variable(v).name;
    for (const auto& r : report.episodes) {
      s.mean_abs += std::abs(r.values[static_cast<std::size_t>(v)]);
      s.mean_signed += r.values[static_cast<std::size_t>(v)];
    }
    s.mean_abs /= count;
    s.mean_signed /= count;
    if (report.episodes.size() > 1) {
      double ss = 0.0;
      for (const auto& r : report.episodes) {
        const double d = r.values[static_cast<std::size_t>(v)] - s.mean_signed;
        ss += d * d;
      }
      s.standard_error = std::sqrt(ss / (count - 1.0) / count);
    }
    report.variables.push_back(std::move(s));
  }
  return report;
}

}  // namespace mmehr
