#include "came/retrieval/index.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "came/encoder/fingerprint.hpp"
#include "came/util/binary_io.hpp"
#include "came/util/rng.hpp"

namespace came::retrieval {

namespace {
constexpr std::string_view kIndexMagic = "CAMEIDX1";
constexpr std::size_t kLocalBlockDocs = 128;
}  // namespace

void ExpertIndex::pack_local() {
  local_blocks_.clear();
  for (std::size_t first = 0; first < local_.size(); first += kLocalBlockDocs) {
    const std::size_t last = std::min(local_.size(), first + kLocalBlockDocs);
    LocalBlock b;
    b.first_doc = first;
    b.row_offsets.push_back(0);
    for (std::size_t i = first; i < last; ++i) b.row_offsets.push_back(b.row_offsets.back() + local_[i].rows());
    const std::size_t width = b.row_offsets.back();
    const std::size_t dl = local_[first].cols();
    b.transposed.assign(dl * width, 0.0);
    for (std::size_t i = first; i < last; ++i) {
      const auto& m = local_[i];
      if (m.cols() != dl) throw std::invalid_argument("index: local vectors of differing width");
      const std::size_t off = b.row_offsets[i - first];
      for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t p = 0; p < dl; ++p) b.transposed[p * width + off + r] = m.data()[r * dl + p];
      }
    }
    local_blocks_.push_back(std::move(b));
  }
}

ExpertIndex::ExpertIndex(ExpertId expert, std::uint64_t checkpoint_hash, std::vector<std::string> doc_ids,
                         const std::vector<experts::ExpertReps>& reps, std::size_t vocab_size)
    : expert_(expert), hash_(checkpoint_hash), doc_ids_(std::move(doc_ids)), vocab_size_(vocab_size) {
  if (reps.size() != doc_ids_.size()) throw std::invalid_argument("index: one representation per document required");
  switch (expert_) {
    case ExpertId::kLex:
      postings_.resize(vocab_size_);
      for (std::size_t i = 0; i < reps.size(); ++i) {
        for (const auto& [term, w] : reps[i].lex.entries()) {
          postings_.at(static_cast<std::size_t>(term)).push_back({static_cast<std::uint32_t>(i), w});
        }
      }
      break;
    case ExpertId::kLoc:
      for (const auto& r : reps) local_.push_back(r.loc);
      pack_local();
      break;
    case ExpertId::kGlob:
      for (const auto& r : reps) global_.push_back(r.glob);
      break;
  }
}

std::vector<double> ExpertIndex::score_all(const experts::ExpertReps& query) const {
  std::vector<double> scores;
  switch (expert_) {
    case ExpertId::kLex: {
      if (query.lex.empty()) return scores;
      scores.assign(doc_ids_.size(), 0.0);
      // Ascending term order per document matches the merge-join of lexical_score.
      for (const auto& [term, qw] : query.lex.entries()) {
        if (static_cast<std::size_t>(term) >= postings_.size()) continue;
        for (const LexicalPosting& p : postings_[static_cast<std::size_t>(term)]) scores[p.doc] += qw * p.weight;
      }
      break;
    }
    case ExpertId::kLoc: {
      // Blocked form of local_score: every similarity is accumulated in the
      // same order as the scalar dot product, so scores agree bit for bit.
      const auto& q = query.loc;
      if (local_.empty()) break;
      if (q.rank() != 2 || q.cols() != local_.front().cols()) {
        throw diff::ShapeError("local_score", q.shape(), local_.front().shape());
      }
      if (q.rows() == 0) throw std::invalid_argument("local_score: empty representation");
      scores.reserve(local_.size());
      std::vector<double> sims;
      for (const auto& b : local_blocks_) {
        const std::size_t width = b.row_offsets.back();
        sims.assign(q.rows() * width, 0.0);
        diff::kernels::gemm_nn(q.rows(), q.cols(), width, q.data(), b.transposed.data(), sims.data(), false);
        for (std::size_t j = 0; j + 1 < b.row_offsets.size(); ++j) {
          double total = 0.0;
          for (std::size_t i = 0; i < q.rows(); ++i) {
            const double* row = sims.data() + i * width;
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t c = b.row_offsets[j]; c < b.row_offsets[j + 1]; ++c) best = std::max(best, row[c]);
            total += best;
          }
          scores.push_back(total);
        }
      }
      break;
    }
    case ExpertId::kGlob:
      scores.reserve(global_.size());
      for (const auto& d : global_) scores.push_back(experts::global_score(query.glob, d));
      break;
  }
  return scores;
}

experts::ExpertReps ExpertIndex::doc_rep(std::size_t i) const {
  if (i >= doc_ids_.size()) throw std::out_of_range("index: document position out of range");
  experts::ExpertReps r;
  switch (expert_) {
    case ExpertId::kLex: {
      std::vector<std::pair<encoder::TokenId, double>> entries;
      for (std::size_t t = 0; t < postings_.size(); ++t) {
        for (const auto& p : postings_[t]) {
          if (p.doc == i) entries.emplace_back(static_cast<encoder::TokenId>(t), p.weight);
        }
      }
      r.lex = experts::LexicalVec(std::move(entries), vocab_size_);
      break;
    }
    case ExpertId::kLoc: r.loc = local_[i]; break;
    case ExpertId::kGlob: r.glob = global_[i]; break;
  }
  return r;
}

std::string ExpertIndex::serialize() const {
  ByteWriter w;
  w.put_raw(kIndexMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(index_of(expert_)));
  w.put_u64(hash_);
  w.put_u64(vocab_size_);
  w.put_u64(doc_ids_.size());
  for (const auto& id : doc_ids_) w.put_string(id);
  switch (expert_) {
    case ExpertId::kLex:
      for (const auto& plist : postings_) {
        w.put_u64(plist.size());
        for (const auto& p : plist) {
          w.put(p.doc);
          w.put(p.weight);
        }
      }
      break;
    case ExpertId::kLoc:
      for (const auto& m : local_) {
        w.put_u64(m.rows());
        w.put_u64(m.cols());
        w.put_doubles(m.values());
      }
      break;
    case ExpertId::kGlob:
      for (const auto& g : global_) w.put_doubles(g);
      break;
  }
  return w.take();
}

ExpertIndex ExpertIndex::deserialize(std::string_view bytes, std::uint64_t expected_hash) {
  ByteReader r(bytes, "index");
  r.expect_raw(kIndexMagic);
  ExpertIndex idx;
  const auto e = r.get<std::uint32_t>();
  if (e >= kNumExperts) r.fail("unknown expert " + std::to_string(e));
  idx.expert_ = kAllExperts[e];
  idx.hash_ = r.get_u64();
  if (idx.hash_ != expected_hash) {
    throw std::runtime_error("index: checkpoint hash mismatch (index " + to_hex(idx.hash_) + ", checkpoint " +
                             to_hex(expected_hash) + ")");
  }
  idx.vocab_size_ = r.get_u64();
  const std::uint64_t n = r.get_u64();
  for (std::uint64_t i = 0; i < n; ++i) idx.doc_ids_.push_back(r.get_string());
  switch (idx.expert_) {
    case ExpertId::kLex:
      idx.postings_.resize(idx.vocab_size_);
      for (auto& plist : idx.postings_) {
        const std::uint64_t m = r.get_u64();
        for (std::uint64_t j = 0; j < m; ++j) {
          LexicalPosting p;
          p.doc = r.get<std::uint32_t>();
          p.weight = r.get<double>();
          if (p.doc >= n) r.fail("posting refers to a missing document");
          plist.push_back(p);
        }
      }
      break;
    case ExpertId::kLoc:
      for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t rows = r.get_u64(), cols = r.get_u64();
        auto vals = r.get_doubles();
        if (vals.size() != rows * cols) r.fail("local matrix size mismatch");
        idx.local_.emplace_back(diff::Shape{rows, cols}, std::move(vals));
      }
      idx.pack_local();
      break;
    case ExpertId::kGlob:
      for (std::uint64_t i = 0; i < n; ++i) idx.global_.push_back(r.get_doubles());
      break;
  }
  r.expect_done();
  return idx;
}

void ExpertIndex::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

ExpertIndex ExpertIndex::load(const std::filesystem::path& path, std::uint64_t expected_hash) {
  try {
    return deserialize(read_file(path), expected_hash);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::array<ExpertIndex, kNumExperts> build_indexes(const Corpus& corpus, const encoder::ModelParams& params,
                                                   const encoder::Vocab& vocab, std::size_t batch_size) {
  const std::uint64_t hash = encoder::fingerprint(params, vocab);
  std::vector<std::string> ids, texts;
  for (const auto& d : corpus.docs()) {
    ids.push_back(d.id);
    texts.push_back(d.text);
  }
  std::vector<experts::ExpertReps> reps;
  try {
    reps = experts::encode_texts(params, vocab, texts, params.config.max_d_len, batch_size);
  } catch (const std::exception& e) {
    // Re-encode one by one to name the offending document.
    for (std::size_t i = 0; i < texts.size(); ++i) {
      try {
        experts::encode_texts(params, vocab, std::span<const std::string>(&texts[i], 1), params.config.max_d_len, 1);
      } catch (const std::exception& inner) {
        throw std::runtime_error("index: cannot encode document '" + ids[i] + "': " + inner.what());
      }
    }
    throw;
  }
  std::array<ExpertIndex, kNumExperts> out;
  for (ExpertId e : kAllExperts) out[index_of(e)] = ExpertIndex(e, hash, ids, reps, params.config.vocab_size);
  return out;
}

ExpertIndex build_index(ExpertId expert, const Corpus& corpus, const encoder::ModelParams& params,
                        const encoder::Vocab& vocab) {
  auto all = build_indexes(corpus, params, vocab);
  return std::move(all[index_of(expert)]);
}

std::filesystem::path index_path(const std::filesystem::path& dir, ExpertId expert) {
  return dir / (std::string(to_string(expert)) + ".idx");
}

RankedList expert_topk(const ExpertIndex& index, const std::string& query_id, const experts::ExpertReps& query,
                       std::size_t k) {
  if (k == 0) throw std::invalid_argument("expert_topk: K must be positive");
  const std::vector<double> scores = index.score_all(query);
  std::vector<ScoredDoc> cands;
  cands.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) cands.push_back({index.doc_ids()[i], scores[i]});
  return make_ranked_list(query_id, std::move(cands), k);
}

Searcher::Searcher(const encoder::ModelParams& params, const encoder::Vocab& vocab,
                   const std::array<ExpertIndex, kNumExperts>& indexes)
    : params_(params), vocab_(vocab), indexes_(indexes) {
  const std::uint64_t hash = encoder::fingerprint(params, vocab);
  for (ExpertId e : kAllExperts) {
    const ExpertIndex& idx = indexes_[index_of(e)];
    if (idx.expert() != e) throw std::invalid_argument("searcher: index slot holds the wrong expert");
    if (idx.checkpoint_hash() != hash) {
      throw std::runtime_error("searcher: " + std::string(to_string(e)) + " index was built from checkpoint " +
                               to_hex(idx.checkpoint_hash()) + ", not " + to_hex(hash));
    }
  }
}

std::vector<std::array<RankedList, kNumExperts>> Searcher::search_all(const std::vector<Query>& queries,
                                                                      std::size_t k) const {
  std::vector<std::string> texts;
  for (const auto& q : queries) texts.push_back(q.text);
  const auto reps = experts::encode_texts(params_, vocab_, texts, params_.config.max_q_len);
  std::vector<std::array<RankedList, kNumExperts>> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    for (ExpertId e : kAllExperts) out[i][index_of(e)] = expert_topk(indexes_[index_of(e)], queries[i].id, reps[i], k);
  }
  return out;
}

std::array<RankedList, kNumExperts> Searcher::search(const Query& query, std::size_t k) const {
  return search_all({query}, k).front();
}

RankedList Searcher::search_one(ExpertId expert, const Query& query, std::size_t k) const {
  return search(query, k)[index_of(expert)];
}

}  // namespace came::retrieval
