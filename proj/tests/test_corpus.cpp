#include "tae/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "doctest.h"
#include "tae/rng.hpp"

using namespace tae;

namespace {

std::filesystem::path write_temp(const std::string& name,
                                 const std::string& contents) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << contents;
  return path;
}

}  // namespace

TEST_SUITE_BEGIN("corpus");

TEST_CASE("load_embeddings parses the text format") {
  auto path = write_temp("tae_emb_ok.txt", "a 1 0\nb 0 1\n");
  EmbeddingTable table = load_embeddings(path);
  CHECK(table.dimension() == 2);
  CHECK(table.size() == 2);
  auto a = table.lookup("a");
  REQUIRE(a.has_value());
  CHECK((*a)[0] == 1.0);
  CHECK((*a)[1] == 0.0);
  CHECK(!table.lookup("zzz").has_value());
  CHECK(table.warnings().empty());
  std::filesystem::remove(path);
}

TEST_CASE("load_embeddings rejects arity mismatches with the line number") {
  auto path = write_temp("tae_emb_bad.txt", "a 1 0\nb 0\n");
  CHECK_THROWS_WITH_AS(load_embeddings(path), doctest::Contains("line 2"),
                       std::runtime_error);
  std::filesystem::remove(path);

  auto empty = write_temp("tae_emb_empty.txt", "");
  CHECK_THROWS_AS(load_embeddings(empty), std::runtime_error);
  std::filesystem::remove(empty);
}

TEST_CASE("duplicate words keep the first vector and record a warning") {
  auto path = write_temp("tae_emb_dup.txt", "a 1 0\na 9 9\n");
  EmbeddingTable table = load_embeddings(path);
  CHECK(table.size() == 1);
  auto a = table.lookup("a");
  REQUIRE(a.has_value());
  CHECK((*a)[0] == 1.0);
  CHECK((*a)[1] == 0.0);
  REQUIRE(table.warnings().size() == 1);
  CHECK(table.warnings()[0].find("a") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("load_corpus parses JSON lines") {
  auto path = write_temp(
      "tae_corpus_ok.jsonl",
      R"({"id":"d1","edus":[["good","food"],["bad","service"]]})" "\n");
  auto docs = load_corpus(path);
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].doc_id == "d1");
  REQUIRE(docs[0].edus.size() == 2);
  CHECK(docs[0].edus[0] == std::vector<std::string>{"good", "food"});
  CHECK(docs[0].edus[1] == std::vector<std::string>{"bad", "service"});
  std::filesystem::remove(path);
}

TEST_CASE("load_corpus enforces document invariants") {
  auto no_edus = write_temp("tae_corpus_noedus.jsonl",
                            R"({"id":"d1","edus":[]})" "\n");
  CHECK_THROWS_WITH_AS(load_corpus(no_edus), doctest::Contains("line 1"),
                       std::runtime_error);
  std::filesystem::remove(no_edus);

  auto empty_edu = write_temp(
      "tae_corpus_emptyedu.jsonl",
      R"({"id":"d1","edus":[["ok"],[]]})" "\n");
  CHECK_THROWS_AS(load_corpus(empty_edu), std::runtime_error);
  std::filesystem::remove(empty_edu);

  auto garbage = write_temp("tae_corpus_garbage.jsonl",
                            R"({"id":"d1","edus":[["ok"]]})" "\nnot json\n");
  CHECK_THROWS_WITH_AS(load_corpus(garbage), doctest::Contains("line 2"),
                       std::runtime_error);
  std::filesystem::remove(garbage);

  auto empty = write_temp("tae_corpus_empty.jsonl", "");
  CHECK(load_corpus(empty).empty());
  std::filesystem::remove(empty);
}

TEST_CASE("corpus round trips exactly") {
  std::vector<EduDocument> docs;
  docs.push_back({"d1", {{"good", "food"}, {"bad", "service"}}});
  docs.push_back({"d 2 — weird id", {{"a"}, {"b", "c", "d"}, {"e"}}});
  auto path = std::filesystem::temp_directory_path() / "tae_corpus_rt.jsonl";
  save_corpus(path, docs);
  auto loaded = load_corpus(path);
  REQUIRE(loaded.size() == docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    CHECK(loaded[i].doc_id == docs[i].doc_id);
    CHECK(loaded[i].edus == docs[i].edus);
  }
  std::filesystem::remove(path);
}

TEST_CASE("edu_embedding averages in-vocabulary vectors") {
  EmbeddingTable table(2);
  table.add("a", {1, 0});
  table.add("b", {0, 1});

  CHECK(edu_embedding({"a"}, table) == std::vector<double>{1, 0});
  CHECK(edu_embedding({"a", "b"}, table) == std::vector<double>{0.5, 0.5});

  OovStats stats;
  CHECK(edu_embedding({"zzz"}, table, &stats) == std::vector<double>{0, 0});
  CHECK(stats.all_oov_edus == 1);
  CHECK(stats.oov_tokens == 1);

  CHECK(edu_embedding({"a", "qqq"}, table, &stats) ==
        std::vector<double>{1, 0});
  CHECK(stats.oov_tokens == 2);
  CHECK(stats.all_oov_edus == 1);

  CHECK_THROWS_AS(edu_embedding({}, table), std::invalid_argument);
}

TEST_CASE("edu_embedding is permutation invariant and bounded") {
  Rng rng(31);
  EmbeddingTable table(4);
  std::vector<std::string> vocab;
  for (int w = 0; w < 12; ++w) {
    std::string word = "w" + std::to_string(w);
    std::vector<double> vec(4);
    for (double& v : vec) {
      v = rng.uniform(-1.0, 1.0);
    }
    table.add(word, vec);
    vocab.push_back(word);
  }
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> tokens;
    const std::size_t len = 1 + rng.below(6);
    for (std::size_t i = 0; i < len; ++i) {
      tokens.push_back(vocab[rng.below(vocab.size())]);
    }
    auto mean = edu_embedding(tokens, table);

    std::vector<std::string> shuffled = tokens;
    for (std::size_t i = shuffled.size(); i > 1; --i) {
      std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
    }
    CHECK(edu_embedding(shuffled, table) == mean);

    for (std::size_t k = 0; k < 4; ++k) {
      double lo = 1e9, hi = -1e9;
      for (const auto& tok : tokens) {
        auto vec = table.lookup(tok);
        lo = std::min(lo, (*vec)[k]);
        hi = std::max(hi, (*vec)[k]);
      }
      CHECK(mean[k] >= lo - 1e-12);
      CHECK(mean[k] <= hi + 1e-12);
    }
  }
}

TEST_SUITE_END();
