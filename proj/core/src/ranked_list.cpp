#include "came/ranked_list.hpp"

#include <algorithm>
#include <stdexcept>

namespace came {

RankedList make_ranked_list(std::string query_id, std::vector<ScoredDoc> candidates, std::size_t k) {
  if (k == 0) throw std::invalid_argument("ranked list: K must be positive");
  if (candidates.size() > k) {
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(),
                      ranks_before);
    candidates.resize(k);
  } else {
    std::sort(candidates.begin(), candidates.end(), ranks_before);
  }
  RankedList out{std::move(query_id), std::move(candidates), k, 0.0};
  if (!out.entries.empty()) out.kth_score = out.entries.back().score;
  return out;
}

}  // namespace came
