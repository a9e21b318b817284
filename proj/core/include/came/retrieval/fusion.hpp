#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "came/eval/qrels.hpp"
#include "came/expert_id.hpp"
#include "came/ranked_list.hpp"

namespace came::retrieval {

using ExpertLists = std::array<RankedList, kNumExperts>;
using FusionWeights = std::array<double, kNumExperts>;

enum class FusionMethod { kSum, kNormSum, kNormMax, kSumRR, kMaxRR, kLinear };

std::string_view to_string(FusionMethod m);
/// Accepts sum, normsum, normmax, sumrr, maxrr, linear (case-insensitive).
FusionMethod parse_fusion_method(std::string_view name);

/// Sum of expert scores over the union of the three lists. A document missing
/// from an expert's list contributes that list's K-th score.
RankedList fuse_sum(const ExpertLists& lists, std::size_t k);

/// Any fusion method. kLinear requires `weights` and uses the K-th-score
/// fallback like fuse_sum; the normalized variants give fallback documents 0
/// and a constant list 0.5; the reciprocal-rank variants give fallback 0.
RankedList fuse(FusionMethod method, const ExpertLists& lists, std::size_t k,
                const std::optional<FusionWeights>& weights = std::nullopt);

/// Simplex weights (step 0.01, full enumeration) maximizing dev MRR@10 of the
/// linear fusion. Ties go to the point nearest the uniform mix, then to the
/// first enumerated.
FusionWeights fit_linear_fusion(std::span<const ExpertLists> dev, const eval::Qrels& qrels);

}  // namespace came::retrieval
