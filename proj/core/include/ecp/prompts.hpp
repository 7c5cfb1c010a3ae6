#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ecp/parsing.hpp"

namespace ecp {

// Pinned prompt templates. Placeholders: {instruction}, {question},
// {choices} (lettered block, one "X. text" per line) and {coords} (how the
// backend should express coordinates). Each template's hash is part of the
// response-cache key, so editing a template never reuses stale replies.
struct PromptTemplates {
  std::string ec_grounding;
  std::string p_grounding;
  std::string ec_perception;
  std::string p_perception;

  static PromptTemplates defaults();

  // Name -> sha256 of the template text, in a fixed order.
  std::map<std::string, std::string> hashes() const;
};

inline constexpr std::string_view kPromptTemplateVersion = "1";

// Lettered choice block in display order: "A. first\nB. second".
std::string format_choices(const std::vector<std::string>& displayed);

std::string coordinate_hint(CoordConvention conv);

// Plain {name} substitution; unknown placeholders are left untouched.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

}  // namespace ecp
