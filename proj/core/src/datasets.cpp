#include "ecp/datasets.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "ecp/imaging.hpp"
#include "ecp/synthetic.hpp"

namespace ecp {
namespace {

using nlohmann::json;

constexpr std::array<GroundingCategory, 7> kGroundingCategories = {
    GroundingCategory::kDev,    GroundingCategory::kCre, GroundingCategory::kCad,
    GroundingCategory::kSci,    GroundingCategory::kOffice, GroundingCategory::kOs,
    GroundingCategory::kOther};

struct LineError {
  ErrorCode code;
  std::string message;
};

[[noreturn]] void fail(std::string message, ErrorCode code = ErrorCode::kSchema) {
  throw LineError{code, std::move(message)};
}

const json& require(const json& obj, const char* field) {
  if (!obj.contains(field)) fail(std::string("missing field '") + field + "'");
  return obj[field];
}

std::string require_string(const json& obj, const char* field) {
  const json& v = require(obj, field);
  if (!v.is_string() || v.get<std::string>().empty()) {
    fail(std::string("field '") + field + "' must be a non-empty string");
  }
  return v.get<std::string>();
}

Dims require_dims(const json& obj) {
  const json& v = require(obj, "image_size");
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer() ||
      v[0].get<int>() < 1 || v[1].get<int>() < 1) {
    fail("field 'image_size' must be [width, height] with positive integers");
  }
  return {v[0].get<int>(), v[1].get<int>()};
}

GroundingCategory grounding_category_from(const std::string& s) {
  for (GroundingCategory c : kGroundingCategories) {
    if (to_string(c) == s) return c;
  }
  fail("unknown grounding category '" + s + "'");
}

McCategory mc_category_from(const std::string& s) {
  if (s == "FSP") return McCategory::kFsp;
  if (s == "FCP") return McCategory::kFcp;
  fail("unknown multiple-choice category '" + s + "'");
}

McSubset mc_subset_from(const std::string& s) {
  if (s == "4K") return McSubset::kFourK;
  if (s == "8K") return McSubset::kEightK;
  if (s == "Other") return McSubset::kOther;
  fail("unknown subset '" + s + "'");
}

GroundingSample parse_grounding(const json& obj) {
  GroundingSample s;
  s.id = require_string(obj, "id");
  s.image = require_string(obj, "image");
  s.image_dims = require_dims(obj);
  s.instruction = require_string(obj, "instruction");
  const json& box = require(obj, "gt_box");
  if (!box.is_array() || box.size() != 4 ||
      !std::all_of(box.begin(), box.end(), [](const json& v) { return v.is_number(); })) {
    fail("field 'gt_box' must be [x1, y1, x2, y2]");
  }
  s.gt_box = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
              box[3].get<double>(), full_res_frame(s.image_dims)};
  if (!is_valid(s.gt_box)) fail("gt_box is inverted or outside the image");
  s.category = grounding_category_from(require_string(obj, "category"));
  return s;
}

McSample parse_mc(const json& obj) {
  McSample s;
  s.id = require_string(obj, "id");
  s.image = require_string(obj, "image");
  s.image_dims = require_dims(obj);
  s.question = require_string(obj, "question");
  const json& choices = require(obj, "choices");
  if (!choices.is_array() || choices.size() < 2 || choices.size() > 8) {
    fail("field 'choices' must be an array of 2 to 8 strings");
  }
  for (const json& c : choices) {
    if (!c.is_string()) fail("field 'choices' must contain only strings");
    s.choices.push_back(c.get<std::string>());
  }
  const json& answer = require(obj, "answer_index");
  if (!answer.is_number_integer()) fail("field 'answer_index' must be an integer");
  s.answer_index = answer.get<int>();
  if (s.answer_index < 0 || s.answer_index >= static_cast<int>(s.choices.size())) {
    fail("answer_index " + std::to_string(s.answer_index) + " out of range for " +
         std::to_string(s.choices.size()) + " choices");
  }
  s.category = mc_category_from(require_string(obj, "category"));
  s.subset = obj.contains("subset") ? mc_subset_from(require_string(obj, "subset"))
                                    : McSubset::kOther;
  return s;
}

json to_json(const GroundingSample& s) {
  return {{"id", s.id},
          {"image", s.image.generic_string()},
          {"image_size", {s.image_dims.width, s.image_dims.height}},
          {"instruction", s.instruction},
          {"gt_box", {s.gt_box.x1, s.gt_box.y1, s.gt_box.x2, s.gt_box.y2}},
          {"category", to_string(s.category)}};
}

json to_json(const McSample& s) {
  return {{"id", s.id},
          {"image", s.image.generic_string()},
          {"image_size", {s.image_dims.width, s.image_dims.height}},
          {"question", s.question},
          {"choices", s.choices},
          {"answer_index", s.answer_index},
          {"category", to_string(s.category)},
          {"subset", to_string(s.subset)}};
}

std::string sample_id(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%05zu", prefix, i);
  return buf;
}

// Seeded integer in [0, n). Modulo bias is irrelevant at these ranges and
// avoids the implementation-defined std distributions.
std::uint64_t draw(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

void prepare_out_dir(const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + (out_dir / "images").string());
}

McSubset subset_for(Dims d) {
  const int longest = std::max(d.width, d.height);
  if (longest >= 7680) return McSubset::kEightK;
  if (longest >= 3840) return McSubset::kFourK;
  return McSubset::kOther;
}

// Top-left corner for an object of `size` centred on a random pixel,
// clamped so the object lies inside the image.
int place(std::mt19937_64& rng, int image_side, int size) {
  const int centre = static_cast<int>(draw(rng, static_cast<std::uint64_t>(image_side)));
  return std::clamp(centre - size / 2, 0, image_side - size);
}

}  // namespace

std::string_view to_string(Task task) {
  return task == Task::kGrounding ? "grounding" : "multiple_choice";
}

Task task_from_string(std::string_view name) {
  if (name == "grounding") return Task::kGrounding;
  if (name == "multiple_choice" || name == "mc") return Task::kMultipleChoice;
  throw Error(ErrorCode::kConfig, "unknown task '" + std::string(name) +
                                      "' (expected grounding or multiple_choice)");
}

std::string_view to_string(GroundingCategory c) {
  switch (c) {
    case GroundingCategory::kDev: return "Dev";
    case GroundingCategory::kCre: return "Cre";
    case GroundingCategory::kCad: return "CAD";
    case GroundingCategory::kSci: return "Sci";
    case GroundingCategory::kOffice: return "Office";
    case GroundingCategory::kOs: return "OS";
    case GroundingCategory::kOther: return "Other";
  }
  return "Other";
}

std::string_view to_string(McCategory c) { return c == McCategory::kFsp ? "FSP" : "FCP"; }

std::string_view to_string(McSubset s) {
  switch (s) {
    case McSubset::kFourK: return "4K";
    case McSubset::kEightK: return "8K";
    case McSubset::kOther: return "Other";
  }
  return "Other";
}

std::filesystem::path Manifest::resolve_image(const std::filesystem::path& image) const {
  const std::filesystem::path root =
      image_root.is_absolute() ? image_root : source_dir / image_root;
  return root / image;
}

namespace {

std::string summarize(const std::filesystem::path& path, const std::vector<ManifestIssue>& issues) {
  std::string msg = "manifest " + path.string() + " has " + std::to_string(issues.size()) +
                    " problem(s):";
  for (const ManifestIssue& i : issues) {
    msg += "\n  line " + std::to_string(i.line) + " [" + std::string(to_string(i.code)) + "] " +
           i.message;
  }
  return msg;
}

}  // namespace

ManifestError::ManifestError(std::filesystem::path path, std::vector<ManifestIssue> issues)
    : Error(issues.empty() ? ErrorCode::kSchema : issues.front().code, summarize(path, issues)),
      issues_(std::move(issues)) {}

Manifest load_manifest(const std::filesystem::path& path, const ManifestLoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "manifest not found: " + path.string());

  Manifest m;
  m.source_dir = path.parent_path();
  std::vector<ManifestIssue> issues;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json obj = json::parse(line, nullptr, false);
    try {
      if (obj.is_discarded() || !obj.is_object()) fail("not a JSON object");
      if (!have_header) {
        const std::string version = require_string(obj, "schema_version");
        if (version != kManifestSchemaVersion) {
          fail("unsupported schema_version '" + version + "'");
        }
        try {
          m.task = task_from_string(require_string(obj, "task"));
        } catch (const Error& e) {
          fail(e.what());
        }
        m.image_root = obj.contains("image_root") ? require_string(obj, "image_root") : ".";
        have_header = true;
        continue;
      }
      std::string id;
      Dims dims;
      std::filesystem::path image;
      if (m.task == Task::kGrounding) {
        GroundingSample s = parse_grounding(obj);
        id = s.id;
        dims = s.image_dims;
        image = s.image;
        m.grounding.push_back(std::move(s));
      } else {
        McSample s = parse_mc(obj);
        id = s.id;
        dims = s.image_dims;
        image = s.image;
        m.mc.push_back(std::move(s));
      }
      if (!ids.insert(id).second) fail("duplicate id '" + id + "'", ErrorCode::kDuplicateId);
      if (opts.check_images_exist || opts.validate_image_dims) {
        const std::filesystem::path full = m.resolve_image(image);
        std::error_code ec;
        if (!std::filesystem::is_regular_file(full, ec)) {
          fail("image not found: " + full.string(), ErrorCode::kMissingImage);
        }
        if (opts.validate_image_dims) {
          const Dims actual = read_image_dims(full);
          if (!(actual == dims)) {
            fail("image_size " + std::to_string(dims.width) + "x" + std::to_string(dims.height) +
                 " does not match decoded " + std::to_string(actual.width) + "x" +
                 std::to_string(actual.height));
          }
        }
      }
    } catch (const LineError& e) {
      issues.push_back({line_no, e.code, e.message});
      if (!have_header) break;
    } catch (const Error& e) {
      issues.push_back({line_no, e.code(), e.what()});
    }
  }
  if (!have_header && issues.empty()) {
    issues.push_back({1, ErrorCode::kSchema, "missing header line"});
  }
  if (!issues.empty()) throw ManifestError(path, std::move(issues));
  return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write manifest " + path.string());
  const json header = {{"schema_version", kManifestSchemaVersion},
                       {"task", to_string(manifest.task)},
                       {"image_root", manifest.image_root.generic_string()}};
  out << header.dump() << '\n';
  if (manifest.task == Task::kGrounding) {
    for (const GroundingSample& s : manifest.grounding) out << to_json(s).dump() << '\n';
  } else {
    for (const McSample& s : manifest.mc) out << to_json(s).dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "cannot write manifest " + path.string());
}

Manifest generate_synthetic_grounding(const SyntheticGroundingOptions& opts,
                                      const std::filesystem::path& out_dir) {
  const Dims img = make_dims(opts.image_dims.width, opts.image_dims.height);
  const Dims target = make_dims(opts.target_dims.width, opts.target_dims.height);
  if (target.width >= img.width || target.height >= img.height) {
    throw Error(ErrorCode::kInvalidArgument, "target must be strictly smaller than the image");
  }
  prepare_out_dir(out_dir);
  std::mt19937_64 rng(opts.seed);
  const auto colors = synthetic::palette();

  Manifest m;
  m.task = Task::kGrounding;
  m.image_root = "images";
  m.source_dir = out_dir;
  for (std::size_t i = 0; i < opts.n; ++i) {
    const synthetic::NamedColor& color = colors[draw(rng, colors.size())];
    const int x = place(rng, img.width, target.width);
    const int y = place(rng, img.height, target.height);

    ImageBuffer canvas = ImageBuffer::filled(img, synthetic::kBackground);
    fill_rect(canvas, x, y, target.width, target.height, color.rgb);

    GroundingSample s;
    s.id = sample_id('g', i);
    s.image = s.id + ".png";
    s.image_dims = img;
    s.instruction = "click the " + std::string(color.name) + " square";
    s.gt_box = {static_cast<double>(x), static_cast<double>(y),
                static_cast<double>(x + target.width), static_cast<double>(y + target.height),
                full_res_frame(img)};
    s.category = kGroundingCategories[i % 6];
    save_png(canvas, m.resolve_image(s.image));
    m.grounding.push_back(std::move(s));
  }
  write_manifest(m, out_dir / "manifest.jsonl");
  return m;
}

Manifest generate_synthetic_mc(const SyntheticMcOptions& opts, const std::filesystem::path& out_dir) {
  const Dims img = make_dims(opts.image_dims.width, opts.image_dims.height);
  if (opts.block_px < 1) throw Error(ErrorCode::kInvalidArgument, "block_px must be >= 1");
  const Dims tile = synthetic::digit_tile_dims(opts.block_px);
  if (tile.width >= img.width || tile.height >= img.height) {
    throw Error(ErrorCode::kInvalidArgument, "glyph tile must be strictly smaller than the image");
  }
  prepare_out_dir(out_dir);
  std::mt19937_64 rng(opts.seed);
  constexpr int kChoices = 4;

  Manifest m;
  m.task = Task::kMultipleChoice;
  m.image_root = "images";
  m.source_dir = out_dir;
  for (std::size_t i = 0; i < opts.n; ++i) {
    const int digit = static_cast<int>(draw(rng, 10));
    const int x = place(rng, img.width, tile.width);
    const int y = place(rng, img.height, tile.height);

    std::vector<int> options{digit};
    while (options.size() < kChoices) {
      const int d = static_cast<int>(draw(rng, 10));
      if (std::find(options.begin(), options.end(), d) == options.end()) options.push_back(d);
    }
    for (std::size_t k = options.size() - 1; k > 0; --k) {
      std::swap(options[k], options[draw(rng, k + 1)]);
    }

    ImageBuffer canvas = ImageBuffer::filled(img, synthetic::kBackground);
    synthetic::draw_digit_tile(canvas, x, y, digit, opts.block_px);

    McSample s;
    s.id = sample_id('m', i);
    s.image = s.id + ".png";
    s.image_dims = img;
    s.question = "What digit appears in the image?";
    for (int d : options) s.choices.push_back(std::to_string(d));
    s.answer_index = static_cast<int>(std::find(options.begin(), options.end(), digit) -
                                      options.begin());
    s.category = McCategory::kFsp;
    s.subset = subset_for(img);
    save_png(canvas, m.resolve_image(s.image));
    m.mc.push_back(std::move(s));
  }
  write_manifest(m, out_dir / "manifest.jsonl");
  return m;
}

}  // namespace ecp
