#pragma once

#include <cstdint>
#include <string>

#include "csifb/models.hpp"

namespace csifb {

/// FNV-1a over a config dump; stored in checkpoint headers for provenance.
std::uint64_t config_hash(const std::string& text);

/// Checkpoint files: text key-value header (kind, dims, CR pair, format
/// version, creation config hash, block table) followed by the named
/// parameter blocks as little-endian float64 arrays in header order.
/// Round trips are bit-exact.
void save_csinet(const CsiNetParams& p, const std::string& path,
                 const std::string& creation_config = "");
CsiNetParams load_csinet(const std::string& path);

void save_csinet_lstm(const CsiNetLstmParams& p, const std::string& path,
                      const std::string& creation_config = "");
CsiNetLstmParams load_csinet_lstm(const std::string& path);

/// Peeks at the header to distinguish csinet / csinet_lstm checkpoints.
std::string checkpoint_kind(const std::string& path);

}  // namespace csifb
