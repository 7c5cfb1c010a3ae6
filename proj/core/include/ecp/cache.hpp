#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "ecp/backend.hpp"

namespace ecp {

struct CacheEntry {
  std::string key;
  std::string raw_text;
  Usage usage;
  double latency_ms = 0.0;
  std::string created_at;  // UTC, ISO-8601
  std::string backend;
  std::string model_id;
};

// Content-addressed store of raw model replies, one file per key under
// <dir>/<key[0:2]>/<key>.json. Writes go to a temporary file that is then
// renamed over the target, so concurrent writers of one key (threads or
// processes) leave exactly one complete entry and readers never see a
// partial one.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<CacheEntry> get(const std::string& key) const;
  void put(const CacheEntry& entry) const;

  struct Stats {
    std::size_t entries = 0;
    std::uintmax_t bytes = 0;
  };
  Stats stats() const;
  // Returns the number of entries removed.
  std::size_t clear() const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path entry_path(const std::string& key) const;

  std::filesystem::path dir_;
};

// Hash of (backend kind and identity, model_id, template hash, instruction,
// image labels/formats/content hashes, expected output, decoding params).
std::string cache_key(const ModelBackend& backend, const ChatRequest& req);

// Routes calls through a ResponseCache. Only cache misses reach `inner`.
class CachedBackend final : public ModelBackend {
 public:
  CachedBackend(std::shared_ptr<ModelBackend> inner, std::shared_ptr<const ResponseCache> cache);

  RawReply call(const ChatRequest& req) override;
  std::string identity() const override { return inner_->identity(); }
  BackendKind kind() const override { return inner_->kind(); }

  std::uint64_t hits() const { return hits_.load(); }
  std::uint64_t misses() const { return misses_.load(); }

 private:
  std::shared_ptr<ModelBackend> inner_;
  std::shared_ptr<const ResponseCache> cache_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
};

// Captures fingerprint -> reply for every call so a run against a live or
// synthetic backend can be replayed later by a scripted backend.
class FixtureRecorder final : public ModelBackend {
 public:
  explicit FixtureRecorder(std::shared_ptr<ModelBackend> inner);

  RawReply call(const ChatRequest& req) override;
  std::string identity() const override { return inner_->identity(); }
  BackendKind kind() const override { return inner_->kind(); }

  std::map<std::string, std::string> recorded() const;
  // Merges into an existing fixtures file (new replies win) and rewrites it
  // with sorted keys.
  void save(const std::filesystem::path& path) const;

 private:
  std::shared_ptr<ModelBackend> inner_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> replies_;
};

}  // namespace ecp
