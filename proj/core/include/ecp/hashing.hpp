#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ecp {

// Incremental SHA-256. Used for request fingerprints, cache keys and image
// content hashes, all of which must be stable across machines.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::span<const std::uint8_t> bytes);
  Sha256& update(std::string_view text);
  std::vector<std::uint8_t> digest();
  std::string hex_digest();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view text);
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> sha256_bytes(std::string_view text);

std::string to_hex(std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws ErrorCode::kDecode on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace ecp
