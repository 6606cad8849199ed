#pragma once

#include "mmehr/dataset.hpp"
#include "mmehr/model.hpp"

#include <cstdint>
#include <functional>
#include <map>

namespace mmehr {

// ---------------------------------------------------------------------------
// Integrated Gradients

struct IGConfig {
  /// Midpoint Riemann steps along the straight path from the baseline.
  Index steps = 256;
  // Baseline is the all-zero notes matrix (no notes); the target is the
  // predicted probability.
};

struct IGResult {
  Tensor attributions;    // same shape as the input
  Tensor mean_gradient;   // path-averaged gradient
  double output = 0.0;    // F(x)
  double baseline_output = 0.0;  // F(x')
  /// |sum(attributions) - (F(x) - F(x'))|
  double residual = 0.0;
};

using DifferentiableFn = std::function<Var(Tape&, Var)>;

/// IG_i = (x_i - x'_i) * (1/m) * sum_k dF/dx_i at x' + (k - 0.5)/m * (x - x').
IGResult integrated_gradients(const DifferentiableFn& f, const Tensor& x, const Tensor& baseline, Index steps);

/// The model's probability as a function of the notes matrix, with the time
/// series and presence mask of `episode` held fixed.
DifferentiableFn notes_probability(const Model& model, const EpisodeTensors& episode);

class GranularityUnavailable : public Error {
 public:
  GranularityUnavailable()
      : Error("granularity unavailable: token-level attribution needs per-token embeddings; "
              "precomputed embedding files only support per-hour attribution") {}
};

struct TokenScore {
  Index note = 0;      // index into the episode's note events
  Index hour = 0;
  Index position = 0;  // position within the note
  std::string token;
  double score = 0.0;
};

struct TokenAttribution {
  std::string episode_id;
  bool token_level = true;
  Index steps = 0;
  std::vector<TokenScore> tokens;
  std::vector<double> hour_scores;  // sum of IG over each hour's row
  double output = 0.0;
  double baseline_output = 0.0;
  double residual = 0.0;
};

/// Token scores from the hash-embedding path: an hour row is the mean of its
/// token vectors, so a token's score is its share of the row's IG,
/// v_token . g_hour / n_hour, and the scores of an hour sum to the row's IG.
/// Throws GranularityUnavailable for file-backed embeddings.
TokenAttribution attribute_note_tokens(const Model& model, const EpisodeTensors& episode,
                                       const std::vector<NoteEvent>& note_events, const EmbeddingSource& source,
                                       const IGConfig& config = {});

/// Per-hour attribution only (the fallback for opaque embeddings).
TokenAttribution attribute_note_hours(const Model& model, const EpisodeTensors& episode, const IGConfig& config = {});

struct RankedWord {
  std::string word;  // display form, subword pieces merged
  double score = 0.0;
  std::vector<std::string> pieces;
};

/// Merges "##" continuation pieces into their word (scores summed), then drops
/// purely numeric words, words of at most two characters, and separators.
/// Result is sorted by descending score, ties by word.
std::vector<RankedWord> postprocess_tokens(const std::vector<TokenScore>& note_tokens);

bool is_separator(std::string_view token);
bool is_numeric(std::string_view token);

/// Splits token scores into per-note ordered sequences.
std::vector<std::vector<TokenScore>> tokens_by_note(const TokenAttribution& attribution);

/// How often each word is among the top `k` of a note; a word counts at most
/// once per note. Ties at rank k are broken lexicographically.
std::map<std::string, Index> top_word_frequency(const std::vector<std::vector<RankedWord>>& note_rankings, Index k = 10);

struct WordStat {
  std::string word;
  double mean_score = 0.0;
  Index occurrences = 0;
};

/// Mean post-filtered word score over all notes, descending.
std::vector<WordStat> mean_word_scores(const std::vector<std::vector<RankedWord>>& note_rankings);

// ---------------------------------------------------------------------------
// Shapley values

/// Coalition value; bit i of the mask set means player i is present.
using CoalitionValue = std::function<double(std::uint64_t)>;

inline constexpr int kMaxExactPlayers = 20;

/// Exact enumeration over all 2^n coalitions. Throws for n > 20.
std::vector<double> shapley_exact(const CoalitionValue& value, int n);

struct SampledShapley {
  std::vector<double> values;
  std::vector<double> standard_errors;
  Index permutations = 0;
};

/// Mean marginal contribution over `permutations` uniformly random orderings.
SampledShapley shapley_sampled(const CoalitionValue& value, int n, Index permutations, std::uint64_t seed);

struct ShapleyEstimator {
  enum class Kind { kExact, kSampled };
  Kind kind = Kind::kSampled;
  Index permutations = 64;
  std::uint64_t seed = 0;
};

struct EpisodeShapley {
  std::string episode_id;
  std::vector<double> values;           // one per clinical variable
  std::vector<double> standard_errors;  // zero for the exact estimator
  double output = 0.0;                  // F(x)
  double absent_output = 0.0;           // F(all variables absent)
};

struct VariableShapley {
  std::string variable;
  double mean_abs = 0.0;
  double mean_signed = 0.0;
  double standard_error = 0.0;  // of mean_signed across episodes
};

struct ShapleyReport {
  std::string estimator;  // "exact" or "sampled"
  Index permutations = 0;
  std::vector<EpisodeShapley> episodes;
  std::vector<VariableShapley> variables;  // schema order
  std::vector<std::string> warnings;

  /// Variable indices by descending mean |phi|.
  std::vector<std::size_t> ranking() const;
};

/// Shapley values over the clinical variables. A variable is absent when all
/// of its channels hold the never-observed encoding (defaults, mask 0) over
/// every hour.
ShapleyReport variable_shapley(const Model& model, const std::vector<EpisodeTensors>& episodes,
                               const VariableSchema& schema, const ShapleyEstimator& estimator, bool trained = true);

}  // namespace mmehr
