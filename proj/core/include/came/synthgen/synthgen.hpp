#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "came/eval/qrels.hpp"
#include "came/retrieval/corpus.hpp"

namespace came::synthgen {

/// Relevance pattern planted for a query.
enum class Family { kExact, kScope, kVerbosity };
inline constexpr std::array<Family, 3> kAllFamilies = {Family::kExact, Family::kScope, Family::kVerbosity};

std::string_view to_string(Family f);
Family parse_family(std::string_view name);

struct LengthRange {
  std::size_t min = 0;
  std::size_t max = 0;
};

struct GenSpec {
  std::uint64_t seed = 7;
  /// Upper bound on distinct generated words; generation fails when the
  /// topics, synonym forms, rare terms and answer tokens would not fit.
  std::size_t vocab_size = 4000;
  std::size_t topic_count = 6;
  std::size_t concepts_per_topic = 20;
  /// Distinct concepts in one single-topic span; longer spans repeat them.
  std::size_t span_concepts = 6;
  /// Surface forms per concept (a, b, ...). Paraphrase needs at least 2.
  std::size_t synonym_set_size = 2;
  std::size_t docs_per_family = 1000;
  /// Train + test queries per family; `test_fraction` of them are held out.
  std::size_t queries_per_family = 250;
  double test_fraction = 0.2;
  /// Extra labelled queries per family for tuning (not part of train or test).
  std::size_t dev_queries_per_family = 25;
  /// Content-word counts of the documents of each family.
  LengthRange exact_doc_len{14, 22};
  LengthRange scope_doc_len{18, 26};
  LengthRange verbosity_doc_len{14, 22};
  /// Share of each family's non-relevant documents that are unrelated
  /// distractors rather than decoys built around that family's queries.
  double distractor_ratio = 0.3;
  /// Probability of a stopword before each content word.
  double stopword_rate = 0.1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct Dataset {
  retrieval::Corpus corpus;
  std::vector<retrieval::Query> train, dev, test;
  eval::Qrels qrels;
  eval::Answers answers;
  std::map<std::string, Family> families;
};

/// Deterministic in `spec.seed`. Throws std::invalid_argument when a
/// construction constraint cannot be met, naming it.
Dataset generate(const GenSpec& spec);

/// Independent post-hoc validation of the construction constraints; returns
/// one message per violation (empty when valid).
std::vector<std::string> check(const Dataset& data, const GenSpec& spec);

/// Writes corpus.jsonl, queries.{train,dev,test}.tsv, qrels.txt, answers.tsv
/// and meta.tsv into `dir` (atomically per file).
void write_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

/// `key = value` lines with the GenSpec field names; unknown keys are rejected.
GenSpec parse_spec(std::string_view text, std::string_view source = "spec");

}  // namespace came::synthgen
