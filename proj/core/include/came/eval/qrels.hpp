#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace came::eval {

/// query id -> (doc id -> graded relevance >= 0)
using Qrels = std::map<std::string, std::map<std::string, int>>;

/// TREC `qid 0 docid rel` lines. Negative grades are rejected.
Qrels load_qrels(const std::filesystem::path& path);
Qrels parse_qrels(std::string_view text, std::string_view source = "qrels");
std::string qrels_to_string(const Qrels& qrels);

/// query id -> acceptable answer strings.
using Answers = std::map<std::string, std::vector<std::string>>;
/// `qid<TAB>answer` lines; a query may repeat for several answers.
Answers load_answers(const std::filesystem::path& path);
std::string answers_to_string(const Answers& answers);

}  // namespace came::eval
