#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <string>

#include "ecp/backend.hpp"
#include "ecp/imaging.hpp"

namespace ecp::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Backend whose replies come from a function of the request. Used to author
// scripted fixtures programmatically and to inject failures.
class FnBackend final : public ModelBackend {
 public:
  using Fn = std::function<std::string(const ChatRequest&)>;
  explicit FnBackend(Fn fn, std::string id = "fn") : fn_(std::move(fn)), id_(std::move(id)) {}

  RawReply call(const ChatRequest& req) override {
    ++calls_;
    return {fn_(req), {}, 0.0, false};
  }
  std::string identity() const override { return id_; }
  BackendKind kind() const override { return BackendKind::kScripted; }
  std::size_t calls() const { return calls_.load(); }

 private:
  Fn fn_;
  std::string id_;
  std::atomic<std::size_t> calls_{0};
};

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);
void write_fixtures(const std::filesystem::path& path,
                    const std::map<std::string, std::string>& replies);

// Flat grey canvas with one filled rectangle.
ImageBuffer make_scene(Dims dims, int x, int y, int w, int h, Rgb color);

// Deterministic pseudo-random pixels.
ImageBuffer random_image(Dims dims, std::uint64_t seed);

}  // namespace ecp::testing
