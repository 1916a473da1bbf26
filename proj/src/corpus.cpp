#include "tae/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace tae {

EmbeddingTable::EmbeddingTable(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) {
    throw std::invalid_argument("embedding dimension must be positive");
  }
}

void EmbeddingTable::add(std::string word, std::vector<double> vector) {
  if (vector.size() != dimension_) {
    throw std::invalid_argument("embedding for '" + word + "' has " +
                                std::to_string(vector.size()) +
                                " components, expected " +
                                std::to_string(dimension_));
  }
  if (index_.count(word)) {
    warnings_.push_back("duplicate word '" + word + "' ignored (first wins)");
    return;
  }
  index_.emplace(std::move(word), storage_.size());
  storage_.insert(storage_.end(), vector.begin(), vector.end());
}

std::optional<std::span<const double>> EmbeddingTable::lookup(
    std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) {
    return std::nullopt;
  }
  return std::span<const double>(storage_.data() + it->second, dimension_);
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open embedding file: " + path.string());
  }
  std::string line;
  std::size_t line_no = 0;
  std::optional<EmbeddingTable> table;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) {
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(line_no) + ": empty line");
    }
    std::vector<double> vec;
    double v;
    while (fields >> v) {
      vec.push_back(v);
    }
    if (!fields.eof()) {
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(line_no) +
                               ": non-numeric vector component");
    }
    if (vec.empty()) {
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(line_no) +
                               ": no vector components");
    }
    if (!table) {
      table.emplace(vec.size());
    } else if (vec.size() != table->dimension()) {
      throw std::runtime_error(
          path.string() + ": line " + std::to_string(line_no) + ": expected " +
          std::to_string(table->dimension()) + " components, got " +
          std::to_string(vec.size()));
    }
    table->add(std::move(word), std::move(vec));
  }
  if (!table) {
    throw std::runtime_error(path.string() + ": empty embedding file");
  }
  return std::move(*table);
}

std::vector<EduDocument> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open corpus file: " + path.string());
  }
  std::vector<EduDocument> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where =
        path.string() + ": line " + std::to_string(line_no);
    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw std::runtime_error(where + ": malformed record");
    }
    if (!record.contains("id") || !record["id"].is_string()) {
      throw std::runtime_error(where + ": missing string field \"id\"");
    }
    if (!record.contains("edus") || !record["edus"].is_array()) {
      throw std::runtime_error(where + ": missing array field \"edus\"");
    }
    EduDocument doc;
    doc.doc_id = record["id"].get<std::string>();
    for (const auto& edu : record["edus"]) {
      if (!edu.is_array() || edu.empty()) {
        throw std::runtime_error(where + ": every EDU needs at least 1 token");
      }
      std::vector<std::string> tokens;
      for (const auto& tok : edu) {
        if (!tok.is_string()) {
          throw std::runtime_error(where + ": tokens must be strings");
        }
        tokens.push_back(tok.get<std::string>());
      }
      doc.edus.push_back(std::move(tokens));
    }
    if (doc.edus.empty()) {
      throw std::runtime_error(where + ": document needs at least 1 EDU");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

void save_corpus(const std::filesystem::path& path,
                 const std::vector<EduDocument>& docs) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write corpus file: " + path.string());
  }
  for (const EduDocument& doc : docs) {
    nlohmann::json record;
    record["id"] = doc.doc_id;
    record["edus"] = doc.edus;
    out << record.dump() << '\n';
  }
  if (!out) {
    throw std::runtime_error("error writing corpus file: " + path.string());
  }
}

std::vector<double> edu_embedding(const std::vector<std::string>& tokens,
                                  const EmbeddingTable& table,
                                  OovStats* stats) {
  if (tokens.empty()) {
    throw std::invalid_argument("edu_embedding: token sequence is empty");
  }
  // Summed in sorted token order so the mean is bit-stable under token
  // permutation.
  std::vector<std::string_view> in_vocab_tokens;
  for (const std::string& tok : tokens) {
    if (table.lookup(tok)) {
      in_vocab_tokens.push_back(tok);
    } else if (stats) {
      ++stats->oov_tokens;
    }
  }
  std::sort(in_vocab_tokens.begin(), in_vocab_tokens.end());

  std::vector<double> mean(table.dimension(), 0.0);
  const std::size_t in_vocab = in_vocab_tokens.size();
  for (std::string_view tok : in_vocab_tokens) {
    auto vec = table.lookup(tok);
    for (std::size_t i = 0; i < mean.size(); ++i) {
      mean[i] += (*vec)[i];
    }
  }
  if (in_vocab == 0) {
    if (stats) {
      ++stats->all_oov_edus;
    }
    return mean;  // all-OOV EDUs map to the zero vector
  }
  for (double& v : mean) {
    v /= static_cast<double>(in_vocab);
  }
  return mean;
}

}  // namespace tae
