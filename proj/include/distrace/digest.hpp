#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace distrace {

/// SHA-256 digest as a 64-character lowercase hex string.
std::string sha256_hex(std::string_view data);

/// Digest of a file's raw bytes. Throws std::runtime_error if unreadable.
std::string sha256_file(const std::string& path);

/// First 8 bytes of sha256(data), big-endian. Stable sub-seed derivation.
uint64_t sha256_prefix64(std::string_view data);

}  // namespace distrace
