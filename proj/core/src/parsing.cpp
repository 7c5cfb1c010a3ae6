#include "ecp/parsing.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <vector>

#include "ecp/error.hpp"

namespace ecp {
namespace {

struct NumberToken {
  double value;
  std::size_t begin;
  std::size_t end;
};

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

// Numbers glued to identifiers ("x2", "v3") are skipped.
std::vector<NumberToken> tokenize_numbers(std::string_view s) {
  std::vector<NumberToken> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const bool prev_word = i > 0 && is_word_char(s[i - 1]);
    std::size_t start = i;
    if (!prev_word && s[i] == '-' && i + 1 < s.size() && is_digit(s[i + 1])) {
      ++i;
    }
    if (i < s.size() && is_digit(s[i]) && !prev_word) {
      while (i < s.size() && is_digit(s[i])) ++i;
      if (i + 1 < s.size() && s[i] == '.' && is_digit(s[i + 1])) {
        ++i;
        while (i < s.size() && is_digit(s[i])) ++i;
      }
      if (i < s.size() && is_word_char(s[i])) {
        while (i < s.size() && is_word_char(s[i])) ++i;
        continue;
      }
      double v = 0.0;
      std::from_chars(s.data() + start, s.data() + i, v);
      out.push_back({v, start, i});
      continue;
    }
    if (is_word_char(s[i])) {
      while (i < s.size() && is_word_char(s[i])) ++i;
      continue;
    }
    i = start + 1;
  }
  return out;
}

// Text between two numbers of the same coordinate group: brackets,
// whitespace, exactly one comma and optionally a "name:" / "name=" label.
bool is_group_separator(std::string_view sep) {
  int commas = 0;
  std::size_t i = 0;
  while (i < sep.size()) {
    const char c = sep[i];
    if (c == ',') {
      ++commas;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '[' ||
               c == ']') {
      ++i;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < sep.size() && is_word_char(sep[i])) ++i;
      while (i < sep.size() && sep[i] == ' ') ++i;
      if (i >= sep.size() || (sep[i] != ':' && sep[i] != '=')) return false;
      ++i;
    } else {
      return false;
    }
  }
  return commas == 1;
}

// Start index and length of the first run of numbers joined by separators.
struct Group {
  std::size_t first;
  std::size_t length;
};

std::vector<Group> find_groups(std::string_view s, const std::vector<NumberToken>& nums) {
  std::vector<Group> groups;
  std::size_t i = 0;
  while (i < nums.size()) {
    std::size_t len = 1;
    while (i + len < nums.size() &&
           is_group_separator(s.substr(nums[i + len - 1].end,
                                       nums[i + len].begin - nums[i + len - 1].end))) {
      ++len;
    }
    if (len >= 2) groups.push_back({i, len});
    i += len;
  }
  return groups;
}

double denormalize(double v, int side, CoordConvention conv) {
  switch (conv) {
    case CoordConvention::kPixelAbsolute: return v;
    case CoordConvention::kNormalizedThousand: return v / 1000.0 * side;
    case CoordConvention::kNormalizedUnit: return v * side;
  }
  return v;
}

double normalize(double v, int side, CoordConvention conv) {
  switch (conv) {
    case CoordConvention::kPixelAbsolute: return v;
    case CoordConvention::kNormalizedThousand: return v / side * 1000.0;
    case CoordConvention::kNormalizedUnit: return v / side;
  }
  return v;
}

FramedPoint make_point(double x, double y, const FrameId& frame, CoordConvention conv) {
  const double px = denormalize(x, frame.dims.width, conv);
  const double py = denormalize(y, frame.dims.height, conv);
  return {std::clamp(px, 0.0, static_cast<double>(frame.dims.width)),
          std::clamp(py, 0.0, static_cast<double>(frame.dims.height)), frame};
}

FramedBox make_box(const std::vector<NumberToken>& nums, std::size_t first, const FrameId& frame,
                   CoordConvention conv) {
  const FramedPoint a = make_point(nums[first].value, nums[first + 1].value, frame, conv);
  const FramedPoint b = make_point(nums[first + 2].value, nums[first + 3].value, frame, conv);
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.x, b.x), std::max(a.y, b.y), frame};
}

std::string excerpt(std::string_view text) {
  constexpr std::size_t kMax = 80;
  std::string out(text.substr(0, kMax));
  if (text.size() > kMax) out += "...";
  return out;
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

char upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::optional<int> letter_index(char c) {
  if (!is_alpha(c)) return std::nullopt;
  return upper(c) - 'A';
}

}  // namespace

std::string_view to_string(CoordConvention conv) {
  switch (conv) {
    case CoordConvention::kPixelAbsolute: return "pixel";
    case CoordConvention::kNormalizedThousand: return "norm1000";
    case CoordConvention::kNormalizedUnit: return "norm1";
  }
  return "pixel";
}

CoordConvention coord_convention_from_string(std::string_view name) {
  if (name == "pixel") return CoordConvention::kPixelAbsolute;
  if (name == "norm1000") return CoordConvention::kNormalizedThousand;
  if (name == "norm1") return CoordConvention::kNormalizedUnit;
  throw Error(ErrorCode::kConfig,
              "unknown coordinate convention '" + std::string(name) +
                  "' (expected pixel, norm1000 or norm1)");
}

FramedPoint parse_point(std::string_view text, const FrameId& frame, CoordConvention conv) {
  const auto nums = tokenize_numbers(text);
  const auto groups = find_groups(text, nums);
  if (groups.empty()) {
    throw Error(ErrorCode::kNoParse, "no coordinate pair in reply: " + excerpt(text));
  }
  const std::size_t f = groups.front().first;
  return make_point(nums[f].value, nums[f + 1].value, frame, conv);
}

FramedBox parse_box(std::string_view text, const FrameId& frame, CoordConvention conv) {
  const auto nums = tokenize_numbers(text);
  for (const Group& g : find_groups(text, nums)) {
    if (g.length >= 4) return make_box(nums, g.first, frame, conv);
  }
  throw Error(ErrorCode::kNoParse, "no bounding box in reply: " + excerpt(text));
}

SpatialOutput parse_spatial(std::string_view text, const FrameId& frame, CoordConvention conv) {
  const auto nums = tokenize_numbers(text);
  const auto groups = find_groups(text, nums);
  if (groups.empty()) {
    throw Error(ErrorCode::kNoParse, "no coordinates in reply: " + excerpt(text));
  }
  const Group& g = groups.front();
  if (g.length >= 4) return make_box(nums, g.first, frame, conv);
  return make_point(nums[g.first].value, nums[g.first + 1].value, frame, conv);
}

ChoiceIndex parse_choice(std::string_view text, int n_choices) {
  if (n_choices < 2 || n_choices > 26) {
    throw Error(ErrorCode::kInvalidArgument, "n_choices must be in 2..26");
  }
  auto in_range = [n_choices](std::optional<int> idx) {
    return idx.has_value() && *idx >= 0 && *idx < n_choices;
  };
  auto standalone_at = [&text](std::size_t i) {
    const bool left = i == 0 || !is_word_char(text[i - 1]);
    const bool right = i + 1 >= text.size() || !is_word_char(text[i + 1]);
    return is_alpha(text[i]) && left && right;
  };

  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

  // 1. "Answer: X", "answer is (X)", ...
  for (std::size_t pos = lower.find("answer"); pos != std::string::npos;
       pos = lower.find("answer", pos + 1)) {
    std::size_t i = pos + 6;
    auto skip_spaces = [&] {
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    };
    skip_spaces();
    if (lower.compare(i, 2, "is") == 0 && (i + 2 >= text.size() || !is_word_char(text[i + 2]))) {
      i += 2;
      skip_spaces();
    }
    if (i < text.size() && text[i] == ':') ++i;
    skip_spaces();
    if (i < text.size() && (text[i] == '(' || text[i] == '*')) ++i;
    if (i < text.size() && standalone_at(i) && in_range(letter_index(text[i]))) {
      return *letter_index(text[i]);
    }
  }
  // 2. "(X)"
  for (std::size_t i = 0; i + 2 < text.size(); ++i) {
    if (text[i] == '(' && text[i + 2] == ')' && in_range(letter_index(text[i + 1]))) {
      return *letter_index(text[i + 1]);
    }
  }
  // 3. Leading letter.
  {
    std::size_t i = 0;
    while (i < text.size() &&
           (std::isspace(static_cast<unsigned char>(text[i])) || text[i] == '*' ||
            text[i] == '"' || text[i] == '\'')) {
      ++i;
    }
    if (i < text.size() && standalone_at(i) && in_range(letter_index(text[i]))) {
      return *letter_index(text[i]);
    }
  }
  // 4. Any standalone letter.
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (standalone_at(i) && in_range(letter_index(text[i]))) return *letter_index(text[i]);
  }
  throw Error(ErrorCode::kNoParse, "no choice letter A.." +
                                       std::string(1, choice_letter(n_choices - 1)) +
                                       " in reply: " + excerpt(text));
}

std::string format_point(const FramedPoint& p, CoordConvention conv) {
  const Dims& d = p.frame.dims;
  return "(" + format_number(normalize(p.x, d.width, conv)) + ", " +
         format_number(normalize(p.y, d.height, conv)) + ")";
}

std::string format_box(const FramedBox& b, CoordConvention conv) {
  const Dims& d = b.frame.dims;
  return "(" + format_number(normalize(b.x1, d.width, conv)) + ", " +
         format_number(normalize(b.y1, d.height, conv)) + ", " +
         format_number(normalize(b.x2, d.width, conv)) + ", " +
         format_number(normalize(b.y2, d.height, conv)) + ")";
}

char choice_letter(ChoiceIndex index) { return static_cast<char>('A' + index); }

}  // namespace ecp
