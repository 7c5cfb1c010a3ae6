#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ecp/error.hpp"
#include "ecp/geometry.hpp"

namespace ecp {

enum class Task { kGrounding, kMultipleChoice };

std::string_view to_string(Task task);
Task task_from_string(std::string_view name);

enum class GroundingCategory { kDev, kCre, kCad, kSci, kOffice, kOs, kOther };
enum class McCategory { kFsp, kFcp };
enum class McSubset { kFourK, kEightK, kOther };

std::string_view to_string(GroundingCategory c);
std::string_view to_string(McCategory c);
std::string_view to_string(McSubset s);

struct GroundingSample {
  std::string id;
  std::filesystem::path image;  // relative to the manifest's image root
  Dims image_dims;
  std::string instruction;
  FramedBox gt_box;  // full-resolution frame of the image
  GroundingCategory category = GroundingCategory::kOther;

  friend bool operator==(const GroundingSample&, const GroundingSample&) = default;
};

struct McSample {
  std::string id;
  std::filesystem::path image;
  Dims image_dims;
  std::string question;
  std::vector<std::string> choices;  // 2..8 entries
  int answer_index = 0;
  McCategory category = McCategory::kFsp;
  McSubset subset = McSubset::kOther;

  friend bool operator==(const McSample&, const McSample&) = default;
};

inline constexpr std::string_view kManifestSchemaVersion = "1";

// JSON-lines file: a header object {"schema_version", "task", "image_root"}
// followed by one sample object per line. See docs/formats.md.
struct Manifest {
  Task task = Task::kGrounding;
  std::filesystem::path image_root;  // as written in the header
  std::filesystem::path source_dir;  // directory the manifest was loaded from
  std::vector<GroundingSample> grounding;
  std::vector<McSample> mc;

  std::size_t size() const {
    return task == Task::kGrounding ? grounding.size() : mc.size();
  }
  std::filesystem::path resolve_image(const std::filesystem::path& image) const;

  // Compares content; source_dir is where the file happened to live.
  friend bool operator==(const Manifest& a, const Manifest& b) {
    return a.task == b.task && a.image_root == b.image_root && a.grounding == b.grounding &&
           a.mc == b.mc;
  }
};

struct ManifestIssue {
  std::size_t line = 0;  // 1-based; the header is line 1
  ErrorCode code = ErrorCode::kSchema;
  std::string message;
};

// Thrown by load_manifest with every problem found, not just the first.
// code() is that of the first issue.
class ManifestError : public Error {
 public:
  ManifestError(std::filesystem::path path, std::vector<ManifestIssue> issues);

  const std::vector<ManifestIssue>& issues() const { return issues_; }

 private:
  std::vector<ManifestIssue> issues_;
};

struct ManifestLoadOptions {
  bool check_images_exist = true;
  // Decode image headers and check declared dims and boxes against them.
  bool validate_image_dims = false;
};

Manifest load_manifest(const std::filesystem::path& path, const ManifestLoadOptions& opts = {});
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

struct SyntheticGroundingOptions {
  std::size_t n = 10;
  Dims image_dims{3840, 2160};
  Dims target_dims{24, 24};
  std::uint64_t seed = 1;
};

struct SyntheticMcOptions {
  std::size_t n = 10;
  Dims image_dims{3840, 2160};
  std::uint64_t seed = 1;
  int block_px = 4;  // glyph block size; the tile is 7x9 blocks
};

// Both write <out_dir>/manifest.jsonl and <out_dir>/images/*.png and return
// the manifest. Output is a pure function of the options.
Manifest generate_synthetic_grounding(const SyntheticGroundingOptions& opts,
                                      const std::filesystem::path& out_dir);
Manifest generate_synthetic_mc(const SyntheticMcOptions& opts,
                               const std::filesystem::path& out_dir);

}  // namespace ecp
