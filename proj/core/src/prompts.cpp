#include "ecp/prompts.hpp"

#include "ecp/hashing.hpp"
#include "ecp/parsing.hpp"

namespace ecp {

PromptTemplates PromptTemplates::defaults() {
  return {
      "Locate the UI element described by the instruction below in the screenshot. Return its "
      "bounding box as (x1, y1, x2, y2) in {coords}.\nInstruction: {instruction}",
      "Return the click point (x, y) of the UI element described by the instruction below, in "
      "{coords}.\nInstruction: {instruction}",
      "Return one point (x, y), in {coords}, on the object most relevant to the question "
      "below.\nQuestion: {question}{choices}",
      "{question}\n{choices}\nAnswer with the option's letter from the given choices directly.",
  };
}

std::map<std::string, std::string> PromptTemplates::hashes() const {
  return {{"ec_grounding", sha256_hex(ec_grounding)},
          {"ec_perception", sha256_hex(ec_perception)},
          {"p_grounding", sha256_hex(p_grounding)},
          {"p_perception", sha256_hex(p_perception)}};
}

std::string format_choices(const std::vector<std::string>& displayed) {
  std::string out;
  for (std::size_t i = 0; i < displayed.size(); ++i) {
    if (i > 0) out += '\n';
    out += choice_letter(static_cast<ChoiceIndex>(i));
    out += ". ";
    out += displayed[i];
  }
  return out;
}

std::string coordinate_hint(CoordConvention conv) {
  switch (conv) {
    case CoordConvention::kPixelAbsolute: return "pixel coordinates of the image";
    case CoordConvention::kNormalizedThousand:
      return "coordinates normalized to the range 0-1000 along each image axis";
    case CoordConvention::kNormalizedUnit:
      return "coordinates normalized to the range 0-1 along each image axis";
  }
  return "pixel coordinates of the image";
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size() + 64);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const std::size_t close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = vars.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

}  // namespace ecp
