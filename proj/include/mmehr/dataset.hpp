#pragma once

#include "mmehr/encoding.hpp"
#include "mmehr/notes_embedding.hpp"

#include <variant>

namespace mmehr {

/// Model-ready tensors of one episode.
struct EpisodeTensors {
  std::string id;
  int label = 0;
  MatrixXd notes;             // L x D1
  Eigen::VectorXd presence;   // L
  MatrixXd ts;                // L x D2
  /// Concatenated tokens per hour; empty when embeddings came from a file.
  std::vector<std::vector<std::string>> hour_tokens;
};

/// Where note embeddings come from: the in-process hash embedder, or a
/// precomputed EmbeddingFile (per-hour granularity only).
using EmbeddingSource = std::variant<HashEmbedder, const EmbeddingMap*>;

Index embedding_dim(const EmbeddingSource& source);
bool token_granular(const EmbeddingSource& source);

struct PreparedSplit {
  std::vector<EpisodeTensors> episodes;
  /// Ids dropped for having no notes at all.
  std::vector<std::string> dropped;
};

/// Encodes variables and embeds notes. Episodes without any note are dropped;
/// a file source missing an episode id is an error.
PreparedSplit prepare_episodes(const std::vector<ClinicalEpisode>& episodes, const VariableSchema& schema,
                               const EmbeddingSource& source);

std::vector<int> labels_of(const std::vector<EpisodeTensors>& episodes);

}  // namespace mmehr
