#pragma once

#include "mmehr/episode.hpp"

#include <cstdint>
#include <unordered_map>

namespace mmehr {

/// Planted signals behind synthetic labels. The label score is
///
///   trend_weight * slope + severity_weight * severe + interaction_weight * (token AND condition)
///   + noise_scale * logistic noise
///
/// and the top `prevalence` fraction of scores are labelled positive. The
/// interaction term needs both modalities: the token lives in the notes, the
/// condition (a shift of `condition_variable`) in the time series.
struct SignalConfig {
  std::string trend_variable = "Heart Rate";
  double trend_weight = 2.0;
  /// Total drift across 48 hours, in standard deviations per unit slope.
  double trend_amplitude = 2.0;

  std::string severity_variable = "Glascow coma scale total";
  std::vector<std::string> severe_categories = {"3", "4", "5", "6", "7", "8"};
  double severe_rate = 0.25;
  double severity_weight = 1.0;

  std::string token = "hypoxemic";
  double token_rate = 0.25;
  /// Chance the token also appears in each further note of a token episode.
  double token_recurrence = 0.5;
  std::string condition_variable = "Oxygen saturation";
  double condition_rate = 0.3;
  /// Mean shift of the condition variable, in standard deviations.
  double condition_shift = -1.5;
  double interaction_weight = 6.0;

  double noise_scale = 1.0;
  double prevalence = 0.132;
};

nlohmann::json signal_config_to_json(const SignalConfig& c);
SignalConfig signal_config_from_json(const nlohmann::json& j);

/// Generating features of one episode, kept for oracle tests.
struct LatentFeatures {
  double slope = 0.0;
  bool severe = false;
  bool token = false;
  bool condition = false;
};

struct SyntheticDataset {
  DatasetSplit split;
  std::unordered_map<std::string, LatentFeatures> latent;
};

/// Deterministic per seed; 70/15/15 split stratified by label; every episode has at
/// least one note.
SyntheticDataset generate_synthetic(Index n_episodes, std::uint64_t seed, const SignalConfig& config = {},
                                    const VariableSchema& schema = default_schema());

}  // namespace mmehr
