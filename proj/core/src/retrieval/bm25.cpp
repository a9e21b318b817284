#include "came/retrieval/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "came/encoder/vocab.hpp"

namespace came::retrieval {

Bm25Index::Bm25Index(const Corpus& corpus, Bm25Params params) : corpus_(corpus), params_(params) {
  if (corpus.empty()) throw std::invalid_argument("bm25: empty corpus");
  doc_len_.resize(corpus.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::map<std::string, std::size_t> tf;
    const auto words = encoder::split_words(corpus[i].text);
    for (const auto& w : words) ++tf[w];
    doc_len_[i] = words.size();
    total += words.size();
    for (auto& [term, n] : tf) postings_[term].push_back({i, n});
  }
  avgdl_ = static_cast<double>(total) / static_cast<double>(corpus.size());
}

double Bm25Index::idf(std::string_view term) const {
  const auto it = postings_.find(std::string(term));
  if (it == postings_.end()) return 0.0;
  const double n = static_cast<double>(corpus_.size());
  const double df = static_cast<double>(it->second.size());
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<std::string> Bm25Index::query_terms(std::string_view text) const {
  auto words = encoder::split_words(text);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  std::erase_if(words, [&](const std::string& w) { return postings_.count(w) == 0; });
  return words;
}

double Bm25Index::score(std::string_view query_text, std::size_t doc) const {
  double s = 0.0;
  for (const auto& t : query_terms(query_text)) {
    const auto& plist = postings_.at(t);
    const auto it = std::lower_bound(plist.begin(), plist.end(), doc,
                                     [](const Posting& p, std::size_t d) { return p.doc < d; });
    if (it == plist.end() || it->doc != doc) continue;
    const double tf = static_cast<double>(it->tf);
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(doc_len_[doc]) / avgdl_);
    s += idf(t) * tf * (params_.k1 + 1.0) / (tf + norm);
  }
  return s;
}

RankedList Bm25Index::topk(std::string_view query_id, std::string_view query_text, std::size_t k) const {
  if (k == 0) throw std::invalid_argument("bm25: K must be positive");
  std::vector<double> acc(corpus_.size(), 0.0);
  std::vector<std::uint8_t> hit(corpus_.size(), 0);
  for (const auto& t : query_terms(query_text)) {
    const double w = idf(t);
    for (const Posting& p : postings_.at(t)) {
      const double tf = static_cast<double>(p.tf);
      const double norm =
          params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(doc_len_[p.doc]) / avgdl_);
      acc[p.doc] += w * tf * (params_.k1 + 1.0) / (tf + norm);
      hit[p.doc] = 1;
    }
  }
  std::vector<ScoredDoc> cands;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (hit[i] != 0) cands.push_back({corpus_[i].id, acc[i]});
  }
  return make_ranked_list(std::string(query_id), std::move(cands), k);
}

}  // namespace came::retrieval
