#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tae {

// Frozen word-vector table, all entries of one dimension. Lookup of an absent
// word returns nullopt, distinguishable from a stored zero vector.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dimension);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return index_.size(); }

  // First occurrence wins; a duplicate is dropped and recorded as a warning.
  void add(std::string word, std::vector<double> vector);

  std::optional<std::span<const double>> lookup(std::string_view word) const;

  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::size_t dimension_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> storage_;  // d-strided rows
  std::vector<std::string> warnings_;
};

// GloVe text convention: one "word v1 ... vd" per line, d fixed by the first
// line.
EmbeddingTable load_embeddings(const std::filesystem::path& path);

// Ordered EDU-segmented document; tokens are pre-tokenized and taken as-is.
struct EduDocument {
  std::string doc_id;
  std::vector<std::vector<std::string>> edus;
};

// Corpus file: one JSON record per line, {"id": "...", "edus": [["tok", ...],
// ...]}. Every document needs at least one EDU and every EDU at least one
// token.
std::vector<EduDocument> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path,
                 const std::vector<EduDocument>& docs);

struct OovStats {
  std::size_t oov_tokens = 0;
  std::size_t all_oov_edus = 0;
};

// Mean of the in-vocabulary token vectors; an all-OOV EDU maps to the zero
// vector and bumps the counter.
std::vector<double> edu_embedding(const std::vector<std::string>& tokens,
                                  const EmbeddingTable& table,
                                  OovStats* stats = nullptr);

}  // namespace tae
