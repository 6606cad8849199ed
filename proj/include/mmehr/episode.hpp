#pragma once

#include "mmehr/schema.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace mmehr {

/// Continuous variables carry a number, categorical ones a category label.
using RawValue = std::variant<double, std::string>;

struct Observation {
  int hour = 0;
  Index variable = 0;
  RawValue value;
};

struct NoteEvent {
  int hour = 0;
  std::vector<std::string> tokens;
};

/// One ICU stay: mortality label, timed variable observations and
/// hour-stamped note token streams over the first 48 hours.
struct ClinicalEpisode {
  std::string id;
  int label = 0;
  std::vector<Observation> observations;
  std::vector<NoteEvent> note_events;
};

struct DatasetSplit {
  std::vector<ClinicalEpisode> train;
  std::vector<ClinicalEpisode> validation;
  std::vector<ClinicalEpisode> test;
};

/// Throws naming the offending variable/label/hour.
void validate(const ClinicalEpisode& episode, const VariableSchema& schema);

double prevalence(const std::vector<ClinicalEpisode>& episodes);

struct SplitStats {
  Index episodes = 0;
  Index positives = 0;
  double prevalence = 0.0;
};

SplitStats split_stats(const std::vector<ClinicalEpisode>& episodes);

/// Throws if any episode id appears in more than one split (or twice in one).
void check_disjoint(const DatasetSplit& split);

// Episode file: one JSON object per line, observations as [hour, variable_name,
// value] and note_events as [hour, [tokens]].
nlohmann::json episode_to_json(const ClinicalEpisode& episode, const VariableSchema& schema);
ClinicalEpisode episode_from_json(const nlohmann::json& j, const VariableSchema& schema);

void write_episodes(std::ostream& os, const std::vector<ClinicalEpisode>& episodes, const VariableSchema& schema);
std::vector<ClinicalEpisode> read_episodes(std::istream& is, const VariableSchema& schema);

void write_episodes(const std::filesystem::path& path, const std::vector<ClinicalEpisode>& episodes,
                    const VariableSchema& schema);
std::vector<ClinicalEpisode> read_episodes(const std::filesystem::path& path, const VariableSchema& schema);

}  // namespace mmehr
