#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ecp/backend.hpp"

namespace ecp {

// OpenAI-compatible chat-completions request body. One user message whose
// content lists, per image in request order, a text part carrying the
// label followed by an image_url part with a base64 data URL; the
// instruction text comes last.
nlohmann::json build_chat_completions_body(const ChatRequest& req);

// Content of the first choice plus token usage. Throws ErrorCode::kTransport
// if the body is not a chat-completions response.
RawReply parse_chat_completions_response(std::string_view body);

struct EndpointUrl {
  std::string scheme_host_port;  // "http://127.0.0.1:8080"
  std::string base_path;         // "/v1", never ends with '/'
};

// Throws ErrorCode::kConfig for anything but http(s)://host[:port][/path].
EndpointUrl split_endpoint(std::string_view endpoint);

}  // namespace ecp
