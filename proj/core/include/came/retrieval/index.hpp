#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "came/encoder/model.hpp"
#include "came/encoder/vocab.hpp"
#include "came/experts/experts.hpp"
#include "came/ranked_list.hpp"
#include "came/retrieval/corpus.hpp"

namespace came::retrieval {

struct LexicalPosting {
  std::uint32_t doc = 0;  // position in doc_ids
  double weight = 0.0;

  friend bool operator==(const LexicalPosting&, const LexicalPosting&) = default;
};

/// Exhaustive per-expert document store. Documents keep corpus order; the
/// lexical inverted lists are sorted by that position.
class ExpertIndex {
 public:
  ExpertIndex() = default;
  ExpertIndex(ExpertId expert, std::uint64_t checkpoint_hash, std::vector<std::string> doc_ids,
              const std::vector<experts::ExpertReps>& reps, std::size_t vocab_size);

  ExpertId expert() const { return expert_; }
  std::uint64_t checkpoint_hash() const { return hash_; }
  std::size_t size() const { return doc_ids_.size(); }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }

  /// Exact scores of every document against a query representation, in doc order.
  /// Lexical queries with an empty representation return an empty vector.
  std::vector<double> score_all(const experts::ExpertReps& query) const;

  /// The stored representation of document i, in the form the scorer consumes.
  experts::ExpertReps doc_rep(std::size_t i) const;

  std::string serialize() const;
  /// Rejects files whose stamp differs from `expected_hash`.
  static ExpertIndex deserialize(std::string_view bytes, std::uint64_t expected_hash);
  void save(const std::filesystem::path& path) const;
  static ExpertIndex load(const std::filesystem::path& path, std::uint64_t expected_hash);

  friend bool operator==(const ExpertIndex&, const ExpertIndex&) = default;

 private:
  ExpertId expert_ = ExpertId::kLex;
  std::uint64_t hash_ = 0;
  std::vector<std::string> doc_ids_;
  std::size_t vocab_size_ = 0;
  std::vector<std::vector<LexicalPosting>> postings_;  // by term id; lex only
  std::vector<diff::NumArray> local_;                  // loc only
  std::vector<experts::GlobalVec> global_;             // glob only

  // Local vectors regrouped for blocked scoring: per block of documents, all
  // their rows transposed into one (d_local x rows) matrix.
  struct LocalBlock {
    std::size_t first_doc = 0;
    std::vector<std::size_t> row_offsets;  // per document in the block, plus the end
    std::vector<double> transposed;

    friend bool operator==(const LocalBlock&, const LocalBlock&) = default;
  };
  void pack_local();
  std::vector<LocalBlock> local_blocks_;
};

/// Encodes every document once (shared stack reused by all three experts).
std::array<ExpertIndex, kNumExperts> build_indexes(const Corpus& corpus, const encoder::ModelParams& params,
                                                   const encoder::Vocab& vocab, std::size_t batch_size = 32);
ExpertIndex build_index(ExpertId expert, const Corpus& corpus, const encoder::ModelParams& params,
                        const encoder::Vocab& vocab);

std::filesystem::path index_path(const std::filesystem::path& dir, ExpertId expert);

/// Top-K of one expert for an already-encoded query.
RankedList expert_topk(const ExpertIndex& index, const std::string& query_id, const experts::ExpertReps& query,
                       std::size_t k);

/// Query-time entry point bound to one checkpoint; construction verifies that
/// every index carries the checkpoint's hash.
class Searcher {
 public:
  Searcher(const encoder::ModelParams& params, const encoder::Vocab& vocab,
           const std::array<ExpertIndex, kNumExperts>& indexes);

  std::array<RankedList, kNumExperts> search(const Query& query, std::size_t k) const;
  /// Batched form; query encoding is packed the same way as documents.
  std::vector<std::array<RankedList, kNumExperts>> search_all(const std::vector<Query>& queries, std::size_t k) const;
  RankedList search_one(ExpertId expert, const Query& query, std::size_t k) const;

 private:
  const encoder::ModelParams& params_;
  const encoder::Vocab& vocab_;
  const std::array<ExpertIndex, kNumExperts>& indexes_;
};

}  // namespace came::retrieval
