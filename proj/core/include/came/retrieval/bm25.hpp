#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "came/ranked_list.hpp"
#include "came/retrieval/corpus.hpp"

namespace came::retrieval {

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
};

/// Okapi BM25 over the corpus' lowercased words:
///   sum over distinct query terms t of idf(t) * tf (k1 + 1) / (tf + k1 (1 - b + b |d| / avgdl))
/// with idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)).
class Bm25Index {
 public:
  explicit Bm25Index(const Corpus& corpus, Bm25Params params = {});

  /// Only documents sharing at least one term are returned; a query with no
  /// corpus terms gives an empty list.
  RankedList topk(std::string_view query_id, std::string_view query_text, std::size_t k) const;
  double idf(std::string_view term) const;
  double score(std::string_view query_text, std::size_t doc) const;

 private:
  struct Posting {
    std::size_t doc;
    std::size_t tf;
  };
  std::vector<std::string> query_terms(std::string_view text) const;

  const Corpus& corpus_;
  Bm25Params params_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::vector<std::size_t> doc_len_;
  double avgdl_ = 0.0;
};

}  // namespace came::retrieval
