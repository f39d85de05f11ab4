#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <spdlog/spdlog.h>

#include "capsre/data.hpp"

namespace capsre::data {

EmbeddingTable::EmbeddingTable(std::vector<std::string> tokens, Tensor rows)
    : tokens_(std::move(tokens)), rows_(std::move(rows)) {
  if (rows_.rank() != 2 || rows_.dim(0) != tokens_.size()) {
    throw ContractViolation("embedding table: " + std::to_string(tokens_.size()) +
                            " tokens vs rows " + rows_.shape().str());
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = i;
}

std::optional<std::size_t> EmbeddingTable::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> EmbeddingTable::row(std::size_t i) const {
  const std::size_t d = dim();
  return rows_.data().subspan(i * d, d);
}

std::int64_t WordVocab::id(const std::string& token) const {
  auto found = table.find(token);
  return static_cast<std::int64_t>(found ? *found : unk);
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path,
                                    std::size_t expected_dim) {
  std::ifstream in(path);
  if (!in) throw CheckedFailure("cannot open embedding file " + path.string());

  std::vector<std::string> tokens;
  std::vector<std::vector<double>> rows;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t dim = expected_dim;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::vector<double> values;
    std::string field;
    while (ss >> field) {
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != field.size() || !std::isfinite(v)) {
        throw CheckedFailure(path.string() + ":" + std::to_string(lineno) +
                             ": bad number '" + field + "'");
      }
      values.push_back(v);
    }
    if (dim == 0) dim = values.size();
    if (values.size() != dim || dim == 0) {
      throw CheckedFailure(path.string() + ":" + std::to_string(lineno) +
                           ": expected " + std::to_string(dim) + " values, got " +
                           std::to_string(values.size()));
    }
    auto it = seen.find(token);
    if (it != seen.end()) {
      spdlog::warn("{}:{}: duplicate token '{}', keeping the last row",
                   path.string(), lineno, token);
      rows[it->second] = std::move(values);
      continue;
    }
    seen.emplace(token, tokens.size());
    tokens.push_back(std::move(token));
    rows.push_back(std::move(values));
  }
  Tensor table(Shape{tokens.size(), dim});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(rows[r].begin(), rows[r].end(), table.data().begin() + r * dim);
  }
  return EmbeddingTable(std::move(tokens), std::move(table));
}

WordVocab load_word_vocab(const std::filesystem::path& path,
                          std::size_t expected_dim) {
  EmbeddingTable loaded = load_embedding_table(path, expected_dim);
  const std::size_t n = loaded.size();
  const std::size_t d = loaded.dim() ? loaded.dim() : expected_dim;
  if (loaded.find(kUnkToken)) {
    throw CheckedFailure(path.string() + ": token '" + std::string(kUnkToken) +
                         "' is reserved");
  }
  Tensor rows(Shape{n + 1, d});
  auto dst = rows.data();
  auto src = loaded.rows().data();
  std::copy(src.begin(), src.end(), dst.begin());
  if (n > 0) {
    for (std::size_t c = 0; c < d; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += src[r * d + c];
      dst[n * d + c] = s / static_cast<double>(n);
    }
  }
  std::vector<std::string> tokens = loaded.tokens();
  tokens.emplace_back(kUnkToken);
  WordVocab vocab;
  vocab.table = EmbeddingTable(std::move(tokens), std::move(rows));
  vocab.unk = n;
  return vocab;
}

EmbeddingStore load_embeddings(const std::filesystem::path& word_path,
                               const std::filesystem::path& entity_path,
                               const std::filesystem::path& relation_path,
                               std::size_t word_dim,
                               const std::vector<std::string>& relation_names) {
  EmbeddingStore store;
  store.words = load_word_vocab(word_path, word_dim);
  if (!entity_path.empty()) store.entities = load_embedding_table(entity_path, 0);
  if (!relation_path.empty()) {
    EmbeddingTable raw = load_embedding_table(relation_path, store.entities.dim());
    const std::size_t d = raw.dim();
    Tensor rows(Shape{relation_names.size(), d});
    for (std::size_t r = 0; r < relation_names.size(); ++r) {
      auto found = raw.find(relation_names[r]);
      if (!found) {
        throw CheckedFailure(relation_path.string() + ": no embedding for relation '" +
                             relation_names[r] + "'");
      }
      auto src = raw.row(*found);
      std::copy(src.begin(), src.end(), rows.data().begin() + r * d);
    }
    store.relations = EmbeddingTable(relation_names, std::move(rows));
  }
  return store;
}

void write_embedding_table(const std::filesystem::path& path,
                           const std::vector<std::string>& tokens,
                           const Tensor& rows) {
  std::ofstream out(path);
  if (!out) throw CheckedFailure("cannot write " + path.string());
  const std::size_t d = rows.cols();
  out << std::setprecision(17);
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    out << tokens[r];
    for (std::size_t c = 0; c < d; ++c) out << ' ' << rows.at(r, c);
    out << '\n';
  }
}

}  // namespace capsre::data
