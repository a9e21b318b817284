#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "came/ranked_list.hpp"

namespace came::retrieval {

/// TREC six-column lines `qid Q0 docid rank score tag`, scores with six decimals.
std::string format_run(std::span<const RankedList> lists, std::string_view tag);
/// Lists come back in file order of first appearance; `k` is set to the list length.
std::vector<RankedList> parse_run(std::string_view text, std::string_view source = "run");

/// `qid<TAB>s_K` lines, exact to the last bit.
std::string format_kth_sidecar(std::span<const RankedList> lists);
/// Applies the sidecar's K-th scores to `lists`; every list needs a row.
void apply_kth_sidecar(std::vector<RankedList>& lists, std::string_view text, std::string_view source = "sidecar");

/// `qid<TAB>docid<TAB>score` lines with round-trippable scores. The six-decimal
/// run file cannot carry exact scores, and file-mediated fusion must agree with
/// in-memory fusion bit for bit.
std::string format_exact_scores(std::span<const RankedList> lists);
void apply_exact_scores(std::vector<RankedList>& lists, std::string_view text, std::string_view source = "scores");

std::string run_tag(std::string_view what, std::string_view hash8);

/// Sidecar paths next to a run file.
std::filesystem::path kth_sidecar_path(const std::filesystem::path& run);
std::filesystem::path exact_scores_path(const std::filesystem::path& run);

/// Writes the run file plus both sidecars atomically.
void write_run_files(const std::filesystem::path& run, std::span<const RankedList> lists, std::string_view tag);
/// Reads a run file and, when present, its sidecars.
std::vector<RankedList> read_run_files(const std::filesystem::path& run);

}  // namespace came::retrieval
