#include "test_support.hpp"

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ecp::testing {

TempDir::TempDir() {
  std::string tmpl = (std::filesystem::temp_directory_path() / "ecp-test-XXXXXX").string();
  if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_fixtures(const std::filesystem::path& path,
                    const std::map<std::string, std::string>& replies) {
  write_text_file(path, nlohmann::json(replies).dump(2));
}

ImageBuffer make_scene(Dims dims, int x, int y, int w, int h, Rgb color) {
  ImageBuffer img = ImageBuffer::filled(dims, {128, 128, 128});
  fill_rect(img, x, y, w, h, color);
  return img;
}

ImageBuffer random_image(Dims dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ImageBuffer img = ImageBuffer::filled(dims, {});
  for (auto& b : img.pixels) b = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

}  // namespace ecp::testing
