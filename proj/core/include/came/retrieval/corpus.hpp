#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace came::retrieval {

struct Document {
  std::string id;
  std::string text;
};

/// Documents in insertion order with unique ids and non-empty texts.
class Corpus {
 public:
  void add(std::string id, std::string text);
  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }
  const std::vector<Document>& docs() const { return docs_; }
  const Document& operator[](std::size_t i) const { return docs_[i]; }
  std::optional<std::size_t> find(std::string_view id) const;
  /// Throws std::out_of_range for unknown ids.
  const std::string& text(std::string_view id) const;

  /// JSON lines, one {"id": ..., "text": ...} object per line.
  static Corpus load_jsonl(const std::filesystem::path& path);
  std::string to_jsonl() const;

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Query {
  std::string id;
  std::string text;
};

/// Tab-separated `qid<TAB>text` lines.
std::vector<Query> load_queries_tsv(const std::filesystem::path& path);
std::string queries_to_tsv(const std::vector<Query>& queries);

}  // namespace came::retrieval
