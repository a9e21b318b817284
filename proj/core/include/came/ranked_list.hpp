#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace came {

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;

  friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// Results for one query, best first. Ties are ordered by ascending doc id.
struct RankedList {
  std::string query_id;
  std::vector<ScoredDoc> entries;
  std::size_t k = 0;
  /// Score of the K-th entry, or of the last one when fewer than K exist; 0 when empty.
  double kth_score = 0.0;

  friend bool operator==(const RankedList&, const RankedList&) = default;
};

/// Deterministic ranking order: higher score first, then ascending doc id.
inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

/// Sorts, truncates to k and fills in kth_score. Throws std::invalid_argument for k == 0.
RankedList make_ranked_list(std::string query_id, std::vector<ScoredDoc> candidates, std::size_t k);

}  // namespace came
