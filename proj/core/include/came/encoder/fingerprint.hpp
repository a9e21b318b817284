#pragma once

#include <cstdint>
#include <string>

#include "came/encoder/model.hpp"
#include "came/encoder/vocab.hpp"

namespace came::encoder {

/// FNV-1a over the config, every parameter's name and raw bytes, and the vocab.
/// Indexes and run files carry it so artifacts from different checkpoints never mix.
std::uint64_t fingerprint(const ModelParams& params, const Vocab& vocab);

/// First 8 hex digits of the fingerprint.
std::string fingerprint8(std::uint64_t fp);

}  // namespace came::encoder
