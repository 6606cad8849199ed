#pragma once

#include "mmehr/episode.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string_view>

namespace mmehr {

/// Per-hour note embeddings; rows of hours without notes are zero.
struct NotesEmbeddingSequence {
  MatrixXd rows;          // L x D1
  Eigen::VectorXd presence;  // L, 1 iff any note exists that hour

  Index hours() const { return rows.rows(); }
  Index dim() const { return rows.cols(); }
};

using EmbeddingMap = std::map<std::string, NotesEmbeddingSequence>;

// EmbeddingFile, little-endian:
//   "EHRE" | version u32 | episode count u32 | D1 u32
//   per episode: id length u32 | id bytes (UTF-8) | L u32 | presence bitmap ceil(L/8) bytes
//                (hour t -> byte t/8, bit t%8) | one f32 row of D1 per present hour, ascending
inline constexpr std::uint32_t kEmbeddingFileVersion = 1;

std::string serialize_embeddings(const EmbeddingMap& embeddings);
EmbeddingMap parse_embeddings(std::string_view bytes);

void write_embeddings(const std::filesystem::path& path, const EmbeddingMap& embeddings);
/// Widens stored 32-bit floats to 64-bit; absent hours are zero rows with presence 0.
EmbeddingMap load_embeddings(const std::filesystem::path& path);

/// Unit-variance pseudo-random vector of a token string, uniform on
/// [-sqrt(3), sqrt(3)] per component. Depends only on (token, dim, seed).
Eigen::VectorXd hash_token_vector(std::string_view token, Index dim, std::uint64_t seed);

/// Mean of the token vectors; zero vector for an empty list. Requires dim >= 8.
Eigen::VectorXd hash_embed(const std::vector<std::string>& tokens, Index dim, std::uint64_t seed);

using TokenEmbedder = std::function<Eigen::VectorXd(const std::vector<std::string>&)>;

struct HashEmbedder {
  Index dim = 32;
  std::uint64_t seed = 0;

  Eigen::VectorXd operator()(const std::vector<std::string>& tokens) const { return hash_embed(tokens, dim, seed); }
};

/// Concatenated tokens of each hour, in event order.
std::vector<std::vector<std::string>> tokens_by_hour(const std::vector<NoteEvent>& note_events, Index hours);

NotesEmbeddingSequence align_to_hours(const std::vector<NoteEvent>& note_events, Index hours, Index dim,
                                      const TokenEmbedder& embedder);

}  // namespace mmehr
