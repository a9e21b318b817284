#pragma once

#include <span>
#include <string>
#include <vector>

#include "came/eval/qrels.hpp"
#include "came/ranked_list.hpp"
#include "came/retrieval/corpus.hpp"

namespace came::eval {

struct MetricReport {
  std::string metric;
  std::size_t cutoff = 0;
  std::vector<std::pair<std::string, double>> per_query;
  double mean = 0.0;
  /// Queries left out, with the reason; callers decide how to surface them.
  std::vector<std::string> warnings;
};

/// Reciprocal rank of the first relevant (grade > 0) document within the top k.
MetricReport mrr_at_k(std::span<const RankedList> run, const Qrels& qrels, std::size_t k = 10);
/// Fraction of a query's relevant documents found in the top k.
MetricReport recall_at_k(std::span<const RankedList> run, const Qrels& qrels, std::size_t k);
/// Gain 2^rel - 1, discount log2(rank + 1), normalized by the ideal DCG at k.
MetricReport ndcg_at_k(std::span<const RankedList> run, const Qrels& qrels, std::size_t k = 10);
/// 1 when any of the top n documents contains any answer (case-insensitive substring).
MetricReport top_n_hit(std::span<const RankedList> run, const Answers& answers, const retrieval::Corpus& corpus,
                       std::size_t n);

/// Extrapolated rank-biased overlap of two rankings with persistence p.
/// Lists of unequal length use the uneven-length extrapolation. Either list
/// empty gives 0.
double rbo(std::span<const std::string> a, std::span<const std::string> b, double p = 0.9);
std::vector<std::string> doc_ids(const RankedList& list, std::size_t depth = static_cast<std::size_t>(-1));

/// Columns: metric, cutoff, qid, value; the macro mean uses qid "all".
std::string reports_to_csv(std::span<const MetricReport> reports, bool per_query = true);
/// Fixed-width table of macro means.
std::string reports_to_table(std::span<const MetricReport> reports);

}  // namespace came::eval
