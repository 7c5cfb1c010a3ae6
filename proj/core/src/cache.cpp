#include "ecp/cache.hpp"

#include <unistd.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ecp/error.hpp"
#include "ecp/hashing.hpp"

namespace ecp {
namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_entry_file(const std::filesystem::directory_entry& e) {
  return e.is_regular_file() && e.path().extension() == ".json" &&
         e.path().filename().string().front() != '.';
}

std::atomic<std::uint64_t> g_tmp_counter{0};

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create cache directory " + dir_.string());
}

std::filesystem::path ResponseCache::entry_path(const std::string& key) const {
  if (key.size() < 3) throw Error(ErrorCode::kInvalidArgument, "cache key too short");
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<CacheEntry> ResponseCache::get(const std::string& key) const {
  const std::string text = read_text(entry_path(key));
  if (text.empty()) return std::nullopt;
  const nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || doc.value("key", "") != key ||
      !doc.contains("reply") || !doc["reply"].is_string()) {
    return std::nullopt;
  }
  CacheEntry e;
  e.key = key;
  e.raw_text = doc["reply"].get<std::string>();
  if (doc.contains("usage") && doc["usage"].is_object()) {
    e.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
    e.usage.completion_tokens = doc["usage"].value("completion_tokens", 0);
  }
  e.latency_ms = doc.value("latency_ms", 0.0);
  e.created_at = doc.value("created_at", "");
  e.backend = doc.value("backend", "");
  e.model_id = doc.value("model_id", "");
  return e;
}

void ResponseCache::put(const CacheEntry& entry) const {
  const std::filesystem::path target = entry_path(entry.key);
  std::error_code ec;
  std::filesystem::create_directories(target.parent_path(), ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + target.parent_path().string());

  const nlohmann::json doc = {
      {"key", entry.key},
      {"reply", entry.raw_text},
      {"usage",
       {{"prompt_tokens", entry.usage.prompt_tokens},
        {"completion_tokens", entry.usage.completion_tokens}}},
      {"latency_ms", entry.latency_ms},
      {"created_at", entry.created_at.empty() ? utc_timestamp() : entry.created_at},
      {"backend", entry.backend},
      {"model_id", entry.model_id},
  };
  const std::string tmp_name =
      "." + entry.key + "." + std::to_string(::getpid()) + "." +
      std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "." +
      std::to_string(g_tmp_counter.fetch_add(1)) + ".tmp";
  const std::filesystem::path tmp = target.parent_path() / tmp_name;
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::kIo, "cannot write cache entry " + tmp.string());
  }
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot publish cache entry " + target.string());
  }
}

ResponseCache::Stats ResponseCache::stats() const {
  Stats s;
  std::error_code ec;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir_, ec)) {
    if (!is_entry_file(e)) continue;
    ++s.entries;
    s.bytes += e.file_size();
  }
  return s;
}

std::size_t ResponseCache::clear() const {
  std::size_t removed = 0;
  std::error_code ec;
  for (const auto& shard : std::filesystem::directory_iterator(dir_, ec)) {
    if (!shard.is_directory()) continue;
    for (const auto& e : std::filesystem::directory_iterator(shard.path(), ec)) {
      if (is_entry_file(e)) ++removed;
    }
    std::filesystem::remove_all(shard.path(), ec);
  }
  return removed;
}

std::string cache_key(const ModelBackend& backend, const ChatRequest& req) {
  std::string pre = "ecp-cache-v1\n";
  auto field = [&pre](std::string_view name, std::string_view value) {
    pre += name;
    pre += ':';
    pre += std::to_string(value.size());
    pre += ':';
    pre += value;
    pre += '\n';
  };
  field("backend", to_string(backend.kind()));
  field("identity", backend.identity());
  field("model_id", req.model_id);
  field("template", req.template_hash);
  field("instruction", req.instruction);
  field("expected", to_string(req.expected));
  field("n_choices", std::to_string(req.n_choices));
  field("temperature", std::to_string(req.temperature));
  field("max_tokens", std::to_string(req.max_tokens));
  for (const ImagePart& img : req.images) {
    field("image_label", img.label);
    field("image_format", mime_type(img.format));
    field("image", img.content_hash);
  }
  return sha256_hex(pre);
}

CachedBackend::CachedBackend(std::shared_ptr<ModelBackend> inner,
                             std::shared_ptr<const ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

RawReply CachedBackend::call(const ChatRequest& req) {
  const std::string key = cache_key(*inner_, req);
  if (auto hit = cache_->get(key)) {
    ++hits_;
    return {std::move(hit->raw_text), hit->usage, hit->latency_ms, true};
  }
  ++misses_;
  RawReply reply = inner_->call(req);
  CacheEntry entry;
  entry.key = key;
  entry.raw_text = reply.text;
  entry.usage = reply.usage;
  entry.latency_ms = reply.latency_ms;
  entry.backend = std::string(to_string(inner_->kind()));
  entry.model_id = req.model_id;
  cache_->put(entry);
  return reply;
}

FixtureRecorder::FixtureRecorder(std::shared_ptr<ModelBackend> inner) : inner_(std::move(inner)) {}

RawReply FixtureRecorder::call(const ChatRequest& req) {
  RawReply reply = inner_->call(req);
  std::lock_guard lock(mu_);
  replies_[fingerprint(req)] = reply.text;
  return reply;
}

std::map<std::string, std::string> FixtureRecorder::recorded() const {
  std::lock_guard lock(mu_);
  return replies_;
}

void FixtureRecorder::save(const std::filesystem::path& path) const {
  std::map<std::string, std::string> merged;
  const std::string existing = read_text(path);
  if (!existing.empty()) {
    const nlohmann::json doc = nlohmann::json::parse(existing, nullptr, false);
    if (doc.is_object()) {
      for (const auto& [k, v] : doc.items()) {
        if (v.is_string()) merged[k] = v.get<std::string>();
      }
    }
  }
  for (const auto& [k, v] : recorded()) merged[k] = v;
  nlohmann::json out(merged);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << out.dump(2) << '\n';
  if (!f) throw Error(ErrorCode::kIo, "cannot write fixtures file " + path.string());
}

}  // namespace ecp
