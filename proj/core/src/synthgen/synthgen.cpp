#include "came/synthgen/synthgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "came/util/binary_io.hpp"
#include "came/util/rng.hpp"

namespace came::synthgen {

namespace {

const std::vector<std::string> kStopwords = {"the", "of",   "and",  "to",   "in", "for", "on", "with",
                                             "by",  "at",   "from", "as",   "is", "are", "was", "that"};

std::string concept_word(std::size_t topic, std::size_t concept_id, std::size_t form) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "t%02zuc%02zu%c", topic, concept_id, static_cast<char>('a' + form));
  return buf;
}

std::string rare_word(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "rx%04zu", i);
  return buf;
}

std::string answer_word(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "ans%02zu", i);
  return buf;
}

constexpr std::size_t kAnswerTokens = 60;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t in_range(std::mt19937_64& rng, LengthRange r) { return r.min + uniform_index(rng, r.max - r.min + 1); }

using ConceptSet = std::set<std::size_t>;

struct Planned {
  Family family;
  std::size_t topic;
  std::vector<std::size_t> concepts;  // query concepts
  std::vector<std::string> rare;      // exact family only
  std::string answer;
  std::string text;
};

// Draws topic spans while keeping every non-relevant document clear of the
// concept sets of scope and verbosity queries, so relevance labels stay
// complete.
class Builder {
 public:
  Builder(const GenSpec& spec, std::mt19937_64& rng) : spec_(spec), rng_(rng), reserved_(spec.topic_count) {}

  std::mt19937_64& rng() { return rng_; }

  void reserve(std::size_t topic, const std::vector<std::size_t>& concepts) {
    reserved_[topic].emplace_back(concepts.begin(), concepts.end());
  }

  std::size_t form() { return uniform_index(rng_, spec_.synonym_set_size); }

  // `len` words of one topic in one surface form: `required` concepts plus
  // extras up to span_concepts distinct ones, repeated to fill the length.
  // `own` is a reserved set the span may cover (the query it was built for).
  std::vector<std::string> span(std::size_t topic, const std::vector<std::size_t>& required, std::size_t len,
                                std::size_t form, const ConceptSet* own = nullptr, const ConceptSet& banned = {},
                                std::size_t repeat_required = 1) {
    const std::size_t distinct = std::max(required.size(), std::min(len, spec_.span_concepts));
    const std::size_t n_extra = distinct - required.size();
    ConceptSet excluded = banned;
    excluded.insert(required.begin(), required.end());
    std::vector<std::size_t> pool;
    for (std::size_t c = 0; c < spec_.concepts_per_topic; ++c) {
      if (excluded.count(c) == 0) pool.push_back(c);
    }
    if (pool.size() < n_extra) throw std::invalid_argument("synthgen: concepts_per_topic too small for span_concepts");
    std::vector<std::size_t> chosen;
    for (int attempt = 0;; ++attempt) {
      if (attempt == 1000) {
        throw std::invalid_argument(
            "synthgen: cannot keep documents clear of query concept sets; raise concepts_per_topic");
      }
      shuffle(std::span<std::size_t>(pool), rng_);
      chosen = required;
      chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_extra));
      if (!covers_reserved(topic, chosen, own)) break;
    }
    std::vector<std::size_t> ids = chosen;
    for (std::size_t r = 1; r < repeat_required; ++r) ids.insert(ids.end(), required.begin(), required.end());
    while (ids.size() < len) ids.push_back(chosen[uniform_index(rng_, chosen.size())]);
    std::vector<std::string> words;
    for (std::size_t c : ids) words.push_back(concept_word(topic, c, form));
    shuffle(std::span<std::string>(words), rng_);
    return words;
  }

  // Spans from `count` distinct topics other than `avoid`, `total` words overall.
  std::vector<std::vector<std::string>> off_topic_spans(std::size_t avoid, std::size_t count, std::size_t total) {
    std::vector<std::size_t> topics;
    for (std::size_t t = 0; t < spec_.topic_count; ++t) {
      if (t != avoid) topics.push_back(t);
    }
    shuffle(std::span<std::size_t>(topics), rng_);
    std::vector<std::vector<std::string>> spans;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t len = std::max<std::size_t>(1, total / count + (i < total % count ? 1 : 0));
      spans.push_back(span(topics[i], {}, len, form()));
    }
    return spans;
  }

  // Content words with stopwords sprinkled in front of them.
  std::string render(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
      if (uniform01(rng_) < spec_.stopword_rate) {
        out += kStopwords[uniform_index(rng_, kStopwords.size())];
        out += ' ';
      }
      out += w;
      out += ' ';
    }
    if (!out.empty()) out.pop_back();
    return out;
  }

  std::string render_spans(const std::vector<std::vector<std::string>>& spans) {
    std::vector<std::string> flat;
    for (const auto& s : spans) flat.insert(flat.end(), s.begin(), s.end());
    return render(flat);
  }

 private:
  bool covers_reserved(std::size_t topic, const std::vector<std::size_t>& concepts, const ConceptSet* own) const {
    const ConceptSet have(concepts.begin(), concepts.end());
    for (const auto& r : reserved_[topic]) {
      if (own != nullptr && r == *own) continue;
      if (std::includes(have.begin(), have.end(), r.begin(), r.end())) return true;
    }
    return false;
  }

  const GenSpec& spec_;
  std::mt19937_64& rng_;
  std::vector<std::vector<ConceptSet>> reserved_;
};

// Insert an answer string at a random word boundary.
std::string plant(std::string text, const std::string& answer, std::mt19937_64& rng) {
  std::vector<std::size_t> cuts = {0};
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == ' ') cuts.push_back(i + 1);
  }
  const std::size_t at = cuts[uniform_index(rng, cuts.size())];
  text.insert(at, answer + " ");
  return text;
}

}  // namespace

std::string_view to_string(Family f) {
  switch (f) {
    case Family::kExact: return "exact";
    case Family::kScope: return "scope";
    case Family::kVerbosity: return "verbosity";
  }
  throw std::invalid_argument("unknown family");
}

Family parse_family(std::string_view name) {
  for (Family f : kAllFamilies) {
    if (to_string(f) == name) return f;
  }
  throw std::invalid_argument("unknown family '" + std::string(name) + "'");
}

void GenSpec::validate() const {
  const auto bad = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("gen spec: " + field + " " + why);
  };
  if (topic_count < 5 || topic_count > 100) bad("topic_count", "must lie in [5, 100] (scope documents need 3 off-topic spans)");
  if (concepts_per_topic < 8 || concepts_per_topic > 100) bad("concepts_per_topic", "must lie in [8, 100]");
  if (span_concepts < 3 || span_concepts + 3 > concepts_per_topic) {
    bad("span_concepts", "must lie in [3, concepts_per_topic - 3]");
  }
  if (synonym_set_size < 2 || synonym_set_size > 26) bad("synonym_set_size", "must lie in [2, 26]");
  if (docs_per_family == 0) bad("docs_per_family", "must be >= 1");
  if (queries_per_family == 0) bad("queries_per_family", "must be >= 1");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) bad("test_fraction", "must lie in [0, 1)");
  if (!(distractor_ratio >= 0.0 && distractor_ratio <= 1.0)) bad("distractor_ratio", "must lie in [0, 1]");
  if (!(stopword_rate >= 0.0 && stopword_rate < 1.0)) bad("stopword_rate", "must lie in [0, 1)");
  for (const auto& [name, r] : {std::pair{"exact_doc_len", exact_doc_len}, std::pair{"scope_doc_len", scope_doc_len},
                                std::pair{"verbosity_doc_len", verbosity_doc_len}}) {
    if (r.min == 0 || r.min > r.max) bad(name, "must be a non-empty range of positive lengths");
  }
  if (exact_doc_len.min < 6) bad("exact_doc_len", "min must be >= 6 (two concepts, two rare terms, context)");
  if (scope_doc_len.min < 8) bad("scope_doc_len", "min must be >= 8 (one on-topic and three off-topic spans)");
  if (verbosity_doc_len.min < 6) bad("verbosity_doc_len", "min must be >= 6 (query concepts twice)");
  const std::size_t per_family = queries_per_family + dev_queries_per_family;
  if (docs_per_family < per_family) bad("docs_per_family", "must be >= the family's queries (one relevant each)");
  const std::size_t needed = kStopwords.size() + topic_count * concepts_per_topic * synonym_set_size +
                             2 * per_family + kAnswerTokens;
  if (vocab_size < needed) {
    bad("vocab_size", "is " + std::to_string(vocab_size) + " but term-disjointness needs " + std::to_string(needed) +
                          " distinct words (stopwords, synonym forms, unique rare terms, answer tokens)");
  }
  if (kAnswerTokens * (kAnswerTokens - 1) < 3 * docs_per_family) {
    bad("docs_per_family", "exceeds the number of distinct answer strings");
  }
}

Dataset generate(const GenSpec& spec) {
  spec.validate();
  auto rng = make_stream(spec.seed, "synthgen");
  Builder b(spec, rng);
  const std::size_t per_family = spec.queries_per_family + spec.dev_queries_per_family;

  // Distinct answer bigrams for every document.
  std::vector<std::string> answers;
  for (std::size_t i = 0; i < kAnswerTokens; ++i) {
    for (std::size_t j = 0; j < kAnswerTokens; ++j) {
      if (i != j) answers.push_back(answer_word(i) + " " + answer_word(j));
    }
  }
  shuffle(std::span<std::string>(answers), rng);
  std::size_t next_answer = 0;

  // Plan every query first so all concept sets are reserved before any
  // document is drawn. Concept sets are distinct within a topic.
  std::vector<std::size_t> all_concepts(spec.concepts_per_topic);
  for (std::size_t c = 0; c < all_concepts.size(); ++c) all_concepts[c] = c;
  std::vector<Planned> planned;
  std::set<std::pair<std::size_t, ConceptSet>> used_sets;
  for (Family f : kAllFamilies) {
    for (std::size_t i = 0; i < per_family; ++i) {
      Planned p;
      p.family = f;
      p.topic = uniform_index(rng, spec.topic_count);
      const std::size_t n = f == Family::kExact ? 2 : 3;
      for (int attempt = 0;; ++attempt) {
        if (attempt == 1000) throw std::invalid_argument("synthgen: concepts_per_topic too small for distinct queries");
        shuffle(std::span<std::size_t>(all_concepts), rng);
        p.concepts.assign(all_concepts.begin(), all_concepts.begin() + static_cast<std::ptrdiff_t>(n));
        if (used_sets.insert({p.topic, ConceptSet(p.concepts.begin(), p.concepts.end())}).second) break;
      }
      if (f != Family::kExact) b.reserve(p.topic, p.concepts);
      p.answer = answers[next_answer++];
      planned.push_back(std::move(p));
    }
  }

  std::vector<std::string> docs;
  std::vector<std::size_t> rel_doc(planned.size());
  std::size_t next_rare = 0;
  for (std::size_t qi = 0; qi < planned.size(); ++qi) {
    Planned& p = planned[qi];
    const ConceptSet own(p.concepts.begin(), p.concepts.end());
    std::vector<std::string> qwords;
    std::string doc;
    switch (p.family) {
      case Family::kExact: {
        const std::size_t nrare = 1 + uniform_index(rng, 2);
        for (std::size_t r = 0; r < nrare; ++r) p.rare.push_back(rare_word(next_rare++));
        qwords = b.span(p.topic, p.concepts, p.concepts.size(), 0, &own);
        qwords.insert(qwords.end(), p.rare.begin(), p.rare.end());
        const std::size_t len = in_range(rng, spec.exact_doc_len);
        auto words = b.span(p.topic, p.concepts, len - nrare, 0);
        words.insert(words.end(), p.rare.begin(), p.rare.end());
        shuffle(std::span<std::string>(words), rng);
        doc = b.render(words);
        break;
      }
      case Family::kScope: {
        // Query in the second form; one short first-form span answers it,
        // surrounded by three off-topic spans.
        qwords = b.span(p.topic, p.concepts, p.concepts.size(), 1, &own);
        const std::size_t len = in_range(rng, spec.scope_doc_len);
        const std::size_t span_len = std::max<std::size_t>(p.concepts.size() + 1, len / 4);
        auto spans = b.off_topic_spans(p.topic, 3, len - std::min(len, span_len));
        const auto at = static_cast<std::ptrdiff_t>(uniform_index(rng, spans.size() + 1));
        spans.insert(spans.begin() + at, b.span(p.topic, p.concepts, span_len, 0, &own));
        doc = b.render_spans(spans);
        break;
      }
      case Family::kVerbosity: {
        // Query in the first form; the document stays on topic throughout in
        // the second form, mentioning each query concept twice.
        qwords = b.span(p.topic, p.concepts, p.concepts.size(), 0, &own);
        const std::size_t len = in_range(rng, spec.verbosity_doc_len);
        doc = b.render(b.span(p.topic, p.concepts, len, 1, &own, {}, 2));
        break;
      }
    }
    shuffle(std::span<std::string>(qwords), rng);
    p.text = b.render(qwords);
    rel_doc[qi] = docs.size();
    docs.push_back(plant(doc, p.answer, rng));
  }

  // Per family: decoys built around that family's queries, then distractors.
  for (Family f : kAllFamilies) {
    std::vector<std::size_t> mine;
    for (std::size_t qi = 0; qi < planned.size(); ++qi) {
      if (planned[qi].family == f) mine.push_back(qi);
    }
    const std::size_t others = spec.docs_per_family - mine.size();
    const auto n_distractors =
        static_cast<std::size_t>(std::llround(spec.distractor_ratio * static_cast<double>(others)));
    const std::size_t n_decoys = others - n_distractors;
    const LengthRange range = f == Family::kExact   ? spec.exact_doc_len
                              : f == Family::kScope ? spec.scope_doc_len
                                                    : spec.verbosity_doc_len;
    for (std::size_t k = 0; k < n_decoys; ++k) {
      const Planned& p = planned[mine[k % mine.size()]];
      const ConceptSet own(p.concepts.begin(), p.concepts.end());
      const std::size_t len = in_range(rng, range);
      std::string doc;
      switch (f) {
        case Family::kExact:
          // Same topic and query concepts, no rare terms.
          doc = b.render(b.span(p.topic, p.concepts, len, 0));
          break;
        case Family::kScope:
          // Wholly on the query's topic, without its concepts.
          doc = b.render(b.span(p.topic, {}, len, 0, nullptr, own));
          break;
        case Family::kVerbosity: {
          // The query's exact words inside mostly off-topic text.
          auto spans = b.off_topic_spans(p.topic, 3, len - std::min(len, p.concepts.size()));
          const auto at = static_cast<std::ptrdiff_t>(uniform_index(rng, spans.size() + 1));
          spans.insert(spans.begin() + at, b.span(p.topic, p.concepts, p.concepts.size(), 0, &own));
          doc = b.render_spans(spans);
          break;
        }
      }
      docs.push_back(plant(doc, answers[next_answer++], rng));
    }
    for (std::size_t k = 0; k < n_distractors; ++k) {
      const std::size_t len = in_range(rng, range);
      docs.push_back(plant(b.render_spans(b.off_topic_spans(spec.topic_count, 2, len)), answers[next_answer++], rng));
    }
  }

  // Shuffle documents so ids carry no family or role information.
  std::vector<std::size_t> order(docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(std::span<std::size_t>(order), rng);
  std::vector<std::string> doc_id(docs.size());
  Dataset out;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "d%05zu", rank);
    doc_id[order[rank]] = buf;
  }
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "d%05zu", rank);
    out.corpus.add(buf, docs[order[rank]]);
  }

  // Queries: per family the first dev_queries_per_family go to dev, the rest
  // are split into test and train.
  std::vector<std::size_t> qorder(planned.size());
  for (std::size_t i = 0; i < qorder.size(); ++i) qorder[i] = i;
  shuffle(std::span<std::size_t>(qorder), rng);
  std::map<Family, std::size_t> seen;
  const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(spec.queries_per_family)));
  std::size_t qn = 0;
  for (std::size_t qi : qorder) {
    const Planned& p = planned[qi];
    char buf[24];
    std::snprintf(buf, sizeof(buf), "q%04zu", qn++);
    const std::string qid = buf;
    const std::size_t k = seen[p.family]++;
    retrieval::Query q{qid, p.text};
    if (k < spec.dev_queries_per_family) {
      out.dev.push_back(q);
    } else if (k < spec.dev_queries_per_family + n_test) {
      out.test.push_back(q);
    } else {
      out.train.push_back(q);
    }
    out.qrels[qid][doc_id[rel_doc[qi]]] = 1;
    out.answers[qid].push_back(p.answer);
    out.families[qid] = p.family;
  }
  return out;
}

namespace {

bool is_stopword(const std::string& w) { return std::find(kStopwords.begin(), kStopwords.end(), w) != kStopwords.end(); }
bool is_rare(const std::string& w) { return w.size() == 6 && w.rfind("rx", 0) == 0; }
bool is_concept(const std::string& w) { return w.size() == 7 && w[0] == 't' && w[3] == 'c'; }

std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace

std::vector<std::string> check(const Dataset& data, const GenSpec& spec) {
  std::vector<std::string> errors;
  std::map<std::string, std::vector<std::string>> rare_queries;  // rare term -> queries
  std::map<std::string, std::vector<std::string>> rare_docs;     // rare term -> docs
  for (const auto& d : data.corpus.docs()) {
    for (const auto& w : words_of(d.text)) {
      if (is_rare(w)) rare_docs[w].push_back(d.id);
    }
  }
  const auto all_queries = [&] {
    std::vector<retrieval::Query> q = data.train;
    q.insert(q.end(), data.dev.begin(), data.dev.end());
    q.insert(q.end(), data.test.begin(), data.test.end());
    return q;
  }();
  std::map<Family, std::size_t> counts;
  for (const auto& q : all_queries) {
    const auto fam = data.families.find(q.id);
    if (fam == data.families.end()) {
      errors.push_back(q.id + ": no family label");
      continue;
    }
    ++counts[fam->second];
    const auto rel = data.qrels.find(q.id);
    if (rel == data.qrels.end() || rel->second.empty()) {
      errors.push_back(q.id + ": no relevant document");
      continue;
    }
    const auto ans = data.answers.find(q.id);
    bool planted = false;
    for (const auto& [doc, g] : rel->second) {
      if (!data.corpus.find(doc)) errors.push_back(q.id + ": relevant document " + doc + " missing from corpus");
      if (ans != data.answers.end()) {
        for (const auto& a : ans->second) planted = planted || data.corpus.text(doc).find(a) != std::string::npos;
      }
    }
    if (!planted) errors.push_back(q.id + ": answer string not found in a relevant document");
    const auto qwords = words_of(q.text);
    const std::string& rel_id = rel->second.begin()->first;
    const auto dwords = words_of(data.corpus.text(rel_id));
    switch (fam->second) {
      case Family::kExact: {
        std::size_t nrare = 0;
        for (const auto& w : qwords) {
          if (!is_rare(w)) continue;
          ++nrare;
          rare_queries[w].push_back(q.id);
          const auto& holders = rare_docs[w];
          if (holders.size() != 1 || holders.front() != rel_id) {
            errors.push_back(q.id + ": rare term " + w + " must occur in the relevant document only");
          }
        }
        if (nrare < 1 || nrare > 2) errors.push_back(q.id + ": exact query needs 1-2 rare terms");
        break;
      }
      case Family::kVerbosity: {
        const std::set<std::string> dset(dwords.begin(), dwords.end());
        for (const auto& w : qwords) {
          if (!is_stopword(w) && dset.count(w) != 0) {
            errors.push_back(q.id + ": verbosity query shares content term " + w + " with its relevant document");
          }
        }
        break;
      }
      case Family::kScope: {
        // Topic of the query; the document must hold exactly one contiguous run
        // of that topic and content from at least three other topics.
        const auto first = std::find_if(qwords.begin(), qwords.end(), is_concept);
        const std::string topic = first == qwords.end() ? "" : first->substr(0, 3);
        std::set<std::string> other_topics;
        std::size_t runs = 0;
        bool in_run = false;
        for (const auto& w : dwords) {
          if (is_stopword(w) || !is_concept(w)) continue;
          const bool on = w.substr(0, 3) == topic;
          if (on && !in_run) ++runs;
          in_run = on;
          if (!on) other_topics.insert(w.substr(0, 3));
        }
        if (runs != 1) errors.push_back(q.id + ": scope document must hold one on-topic span, found " + std::to_string(runs));
        if (other_topics.size() < 3) errors.push_back(q.id + ": scope document needs >= 3 off-topic spans");
        for (const auto& w : qwords) {
          if (!is_concept(w)) continue;
          const std::string stem = w.substr(0, 6);
          const bool present = std::any_of(dwords.begin(), dwords.end(), [&](const std::string& d) {
            return is_concept(d) && d.substr(0, 6) == stem;
          });
          if (!present) errors.push_back(q.id + ": scope span lacks a paraphrase of " + w);
        }
        break;
      }
    }
  }
  for (const auto& [w, qs] : rare_queries) {
    if (qs.size() != 1) errors.push_back("rare term " + w + " is shared by " + std::to_string(qs.size()) + " queries");
  }
  for (Family f : kAllFamilies) {
    if (counts[f] != spec.queries_per_family + spec.dev_queries_per_family) {
      errors.push_back(std::string(to_string(f)) + ": expected " +
                       std::to_string(spec.queries_per_family + spec.dev_queries_per_family) + " queries, found " +
                       std::to_string(counts[f]));
    }
  }
  if (data.corpus.size() != 3 * spec.docs_per_family) {
    errors.push_back("corpus has " + std::to_string(data.corpus.size()) + " documents, expected " +
                     std::to_string(3 * spec.docs_per_family));
  }
  return errors;
}

void write_dataset(const Dataset& data, const std::filesystem::path& dir) {
  write_file_atomic(dir / "corpus.jsonl", data.corpus.to_jsonl());
  write_file_atomic(dir / "queries.train.tsv", retrieval::queries_to_tsv(data.train));
  write_file_atomic(dir / "queries.dev.tsv", retrieval::queries_to_tsv(data.dev));
  write_file_atomic(dir / "queries.test.tsv", retrieval::queries_to_tsv(data.test));
  write_file_atomic(dir / "qrels.txt", eval::qrels_to_string(data.qrels));
  write_file_atomic(dir / "answers.tsv", eval::answers_to_string(data.answers));
  std::string meta;
  for (const auto& [qid, f] : data.families) meta += qid + '\t' + std::string(to_string(f)) + '\n';
  write_file_atomic(dir / "meta.tsv", meta);
}

Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.corpus = retrieval::Corpus::load_jsonl(dir / "corpus.jsonl");
  d.train = retrieval::load_queries_tsv(dir / "queries.train.tsv");
  d.dev = retrieval::load_queries_tsv(dir / "queries.dev.tsv");
  d.test = retrieval::load_queries_tsv(dir / "queries.test.tsv");
  d.qrels = eval::load_qrels(dir / "qrels.txt");
  d.answers = eval::load_answers(dir / "answers.tsv");
  std::ifstream in(dir / "meta.tsv");
  if (!in) throw std::runtime_error("cannot open " + (dir / "meta.tsv").string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("meta.tsv: expected qid<TAB>family");
    d.families[line.substr(0, tab)] = parse_family(line.substr(tab + 1));
  }
  return d;
}

GenSpec parse_spec(std::string_view text, std::string_view source) {
  GenSpec spec;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = std::string(source) + ":" + std::to_string(lineno) + ": ";
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(where + "expected 'key = value'");
    const auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t\r");
      const auto e = v.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw std::invalid_argument(where + "duplicate key '" + key + "'");
    const auto fail = [&](const std::string& why) { throw std::invalid_argument(where + key + ": " + why); };
    const auto as_count = [&]() -> std::size_t {
      std::size_t pos = 0;
      unsigned long long v = 0;
      try {
        if (value.empty() || value[0] == '-') throw std::invalid_argument("negative");
        v = std::stoull(value, &pos);
      } catch (const std::exception&) {
        fail("expected a non-negative integer, got '" + value + "'");
      }
      if (pos != value.size()) fail("expected a non-negative integer, got '" + value + "'");
      return static_cast<std::size_t>(v);
    };
    const auto as_real = [&]() -> double {
      std::size_t pos = 0;
      double v = 0;
      try {
        v = std::stod(value, &pos);
      } catch (const std::exception&) {
        fail("expected a number, got '" + value + "'");
      }
      if (pos != value.size()) fail("expected a number, got '" + value + "'");
      return v;
    };
    const auto as_range = [&]() -> LengthRange {
      const auto dash = value.find('-');
      if (dash == std::string::npos) fail("expected 'min-max', got '" + value + "'");
      try {
        std::size_t p1 = 0, p2 = 0;
        const std::string a = trim(value.substr(0, dash)), b = trim(value.substr(dash + 1));
        LengthRange r{std::stoul(a, &p1), std::stoul(b, &p2)};
        if (p1 == a.size() && p2 == b.size()) return r;
      } catch (const std::exception&) {
      }
      fail("expected 'min-max', got '" + value + "'");
      return {};
    };
    if (key == "seed") spec.seed = as_count();
    else if (key == "vocab_size") spec.vocab_size = as_count();
    else if (key == "topic_count") spec.topic_count = as_count();
    else if (key == "concepts_per_topic") spec.concepts_per_topic = as_count();
    else if (key == "span_concepts") spec.span_concepts = as_count();
    else if (key == "synonym_set_size") spec.synonym_set_size = as_count();
    else if (key == "docs_per_family") spec.docs_per_family = as_count();
    else if (key == "queries_per_family") spec.queries_per_family = as_count();
    else if (key == "dev_queries_per_family") spec.dev_queries_per_family = as_count();
    else if (key == "test_fraction") spec.test_fraction = as_real();
    else if (key == "distractor_ratio") spec.distractor_ratio = as_real();
    else if (key == "stopword_rate") spec.stopword_rate = as_real();
    else if (key == "exact_doc_len") spec.exact_doc_len = as_range();
    else if (key == "scope_doc_len") spec.scope_doc_len = as_range();
    else if (key == "verbosity_doc_len") spec.verbosity_doc_len = as_range();
    else throw std::invalid_argument(where + "unknown key '" + key + "'");
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string(source) + ": " + e.what());
  }
  return spec;
}

}  // namespace came::synthgen
