#include "helpers.hpp"

#include "mmehr/io.hpp"
#include "mmehr/notes_embedding.hpp"

#include <doctest.h>

#include <filesystem>

using namespace mmehr;
using namespace mmehr::testing;

namespace {

NotesEmbeddingSequence random_sequence(Rng& rng, Index hours, Index dim) {
  NotesEmbeddingSequence s{MatrixXd::Zero(hours, dim), Eigen::VectorXd::Zero(hours)};
  for (Index t = 0; t < hours; ++t) {
    if (!rng.bernoulli(0.4)) continue;
    s.presence(t) = 1.0;
    // f32-representable so the round trip is exact
    for (Index j = 0; j < dim; ++j) s.rows(t, j) = static_cast<float>(rng.normal());
  }
  return s;
}

std::string message_of(std::string_view bytes) {
  try {
    parse_embeddings(bytes);
  } catch (const Error& ex) {
    return ex.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("notes_embedding") {
  TEST_CASE("embedding file round trip") {
    Rng rng(3);
    EmbeddingMap m;
    m["a"] = random_sequence(rng, 48, 12);
    m["episode/ü"] = random_sequence(rng, 48, 12);
    m["c"] = random_sequence(rng, 10, 12);
    const EmbeddingMap back = parse_embeddings(serialize_embeddings(m));
    REQUIRE(back.size() == 3);
    for (const auto& [id, seq] : m) {
      CHECK(back.at(id).rows == seq.rows);
      CHECK(back.at(id).presence == seq.presence);
    }
    const auto path = std::filesystem::temp_directory_path() / "mmehr_test_embeddings.bin";
    write_embeddings(path, m);
    CHECK(serialize_embeddings(load_embeddings(path)) == serialize_embeddings(m));
    std::filesystem::remove(path);
  }

  TEST_CASE("empty embedding file") {
    const std::string bytes = serialize_embeddings({});
    CHECK(bytes.substr(0, 4) == "EHRE");
    CHECK(parse_embeddings(bytes).empty());
  }

  TEST_CASE("header layout is little endian") {
    EmbeddingMap m;
    m["x"] = NotesEmbeddingSequence{MatrixXd::Zero(9, 8), Eigen::VectorXd::Zero(9)};
    m["x"].presence(8) = 1.0;
    m["x"].rows(8, 0) = 1.0;
    const std::string b = serialize_embeddings(m);
    std::string expect = "EHRE";
    put_le<std::uint32_t>(expect, 1);
    put_le<std::uint32_t>(expect, 1);
    put_le<std::uint32_t>(expect, 8);
    put_le<std::uint32_t>(expect, 1);
    expect += "x";
    put_le<std::uint32_t>(expect, 9);
    expect.push_back('\0');
    expect.push_back('\1');
    put_le<float>(expect, 1.0f);
    for (int j = 1; j < 8; ++j) put_le<float>(expect, 0.0f);
    CHECK(b == expect);
  }

  TEST_CASE("corrupt embedding files are rejected with a reason") {
    Rng rng(9);
    EmbeddingMap m;
    m["a"] = random_sequence(rng, 16, 8);
    m["a"].presence(0) = 1.0;
    const std::string good = serialize_embeddings(m);

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    CHECK(message_of(bad_magic).find("magic") != std::string::npos);

    CHECK(message_of(good.substr(0, good.size() - 3)).find("truncated") != std::string::npos);
    CHECK(message_of(good + std::string(32, '\0')).find("trailing") != std::string::npos);

    // Episode count says two, but the second record is a copy of the first.
    std::string dup = good;
    dup[8] = 2;
    dup += good.substr(16);
    CHECK(message_of(dup).find("duplicate") != std::string::npos);

    // Clearing a presence bit leaves one row too many.
    std::string fewer_bits = good;
    const std::size_t bitmap = 16 + 4 + 1 + 4;
    fewer_bits[bitmap] = static_cast<char>(fewer_bits[bitmap] & ~1);
    CHECK_FALSE(message_of(fewer_bits).empty());
  }

  TEST_CASE("hash embedding of an empty note is zero") {
    CHECK(hash_embed({}, 32, 0).isZero());
  }

  TEST_CASE("hash embedding is the mean of token vectors") {
    const Eigen::VectorXd a = hash_token_vector("pain", 16, 4);
    const Eigen::VectorXd b = hash_token_vector("##ated", 16, 4);
    CHECK(hash_embed({"pain", "##ated", "pain"}, 16, 4).isApprox((2 * a + b) / 3.0, 1e-14));
    CHECK(hash_token_vector("pain", 16, 4) == a);
    CHECK(hash_token_vector("pain", 16, 5) != a);
    CHECK(hash_token_vector("Pain", 16, 4) != a);
    CHECK_THROWS_AS(hash_embed({"x"}, 4, 0), Error);
  }

  TEST_CASE("hash token vectors have zero mean and unit variance") {
    const Index dim = 8, n = 10000;
    double s = 0.0, s2 = 0.0, bound = 0.0;
    for (Index i = 0; i < n; ++i) {
      const Eigen::VectorXd v = hash_token_vector("tok" + std::to_string(i), dim, 0);
      s += v.sum();
      s2 += v.squaredNorm();
      bound = std::max(bound, v.cwiseAbs().maxCoeff());
    }
    const double count = static_cast<double>(n * dim);
    CHECK(std::abs(s / count) < 0.02);
    CHECK(s2 / count == doctest::Approx(1.0).epsilon(0.03));
    CHECK(bound <= std::sqrt(3.0));
  }

  TEST_CASE("notes are aligned to their hour") {
    const std::vector<NoteEvent> notes = {{0, {"a", "b"}}, {2, {"c"}}, {2, {"d"}}, {47, {}}};
    const HashEmbedder e{8, 1};
    const NotesEmbeddingSequence s = align_to_hours(notes, 48, 8, e);
    CHECK(s.hours() == 48);
    CHECK(s.dim() == 8);
    CHECK(s.presence(0) == 1.0);
    CHECK(s.presence(1) == 0.0);
    CHECK(s.presence(2) == 1.0);
    CHECK(s.presence(47) == 0.0);
    CHECK(s.rows.row(1).isZero());
    CHECK(s.rows.row(0).transpose().isApprox(e({"a", "b"})));
    CHECK(s.rows.row(2).transpose().isApprox(e({"c", "d"})));
    const auto by_hour = tokens_by_hour(notes, 48);
    CHECK(by_hour[2] == std::vector<std::string>{"c", "d"});
    CHECK(by_hour[1].empty());
  }

  TEST_CASE("notes past the window are rejected") {
    const HashEmbedder e{8, 1};
    CHECK_THROWS_AS(align_to_hours({{48, {"x"}}}, 48, 8, e), Error);
  }
}
