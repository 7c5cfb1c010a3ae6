#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <semaphore>
#include <thread>

#include "backend_factories.hpp"
#include "ecp/error.hpp"
#include "ecp/hashing.hpp"
#include "ecp/openai_wire.hpp"

namespace ecp {
namespace {

std::string snippet(std::string_view body) {
  constexpr std::size_t kMax = 200;
  return std::string(body.substr(0, kMax));
}

class HttpBackend final : public ModelBackend {
 public:
  explicit HttpBackend(const BackendConfig& cfg)
      : cfg_(cfg), url_(split_endpoint(cfg.endpoint)), in_flight_(cfg.max_in_flight) {
    if (!cfg.api_key_env.empty()) {
      if (const char* key = std::getenv(cfg.api_key_env.c_str()); key != nullptr && *key != '\0') {
        api_key_ = key;
      }
    }
  }

  RawReply call(const ChatRequest& req) override {
    const std::string body = build_chat_completions_body(req).dump();
    const std::string path = url_.base_path + "/chat/completions";
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    std::string last_error;
    for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
      if (attempt > 1) {
        const double delay = cfg_.retry.initial_backoff_ms *
                             std::pow(cfg_.retry.backoff_factor, attempt - 2);
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
      }
      const auto start = std::chrono::steady_clock::now();
      httplib::Result res = post(path, headers, body);
      const double latency =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
              .count();
      if (!res) {
        last_error = "connection failed: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500 || res->status == 429) {
        last_error = "HTTP " + std::to_string(res->status) + ": " + snippet(res->body);
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorCode::kTransport,
                    "HTTP " + std::to_string(res->status) + " from " + cfg_.endpoint + ": " +
                        snippet(res->body));
      }
      RawReply reply = parse_chat_completions_response(res->body);
      reply.latency_ms = latency;
      return reply;
    }
    throw Error(ErrorCode::kTransport, "giving up on " + cfg_.endpoint + " after " +
                                           std::to_string(cfg_.retry.max_attempts) +
                                           " attempts; last error: " + last_error);
  }

  std::string identity() const override { return "http"; }
  BackendKind kind() const override { return BackendKind::kHttp; }

 private:
  httplib::Result post(const std::string& path, const httplib::Headers& headers,
                       const std::string& body) {
    in_flight_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{in_flight_};
    httplib::Client client(url_.scheme_host_port);
    client.set_connection_timeout(std::chrono::seconds(10));
    const auto timeout = std::chrono::duration<double>(cfg_.timeout_s);
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    return client.Post(path, headers, body, "application/json");
  }

  BackendConfig cfg_;
  EndpointUrl url_;
  std::string api_key_;
  std::counting_semaphore<> in_flight_;
};

}  // namespace

EndpointUrl split_endpoint(std::string_view endpoint) {
  const std::size_t scheme_end = endpoint.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(ErrorCode::kConfig, "endpoint: '" + std::string(endpoint) + "' has no scheme");
  }
  const std::string_view scheme = endpoint.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::kConfig, "endpoint: unsupported scheme '" + std::string(scheme) + "'");
  }
  const std::size_t path_start = endpoint.find('/', scheme_end + 3);
  EndpointUrl url;
  url.scheme_host_port = std::string(endpoint.substr(0, path_start));
  if (url.scheme_host_port.size() <= scheme_end + 3) {
    throw Error(ErrorCode::kConfig, "endpoint: '" + std::string(endpoint) + "' has no host");
  }
  if (path_start != std::string_view::npos) url.base_path = endpoint.substr(path_start);
  while (!url.base_path.empty() && url.base_path.back() == '/') url.base_path.pop_back();
  return url;
}

nlohmann::json build_chat_completions_body(const ChatRequest& req) {
  nlohmann::json content = nlohmann::json::array();
  for (const ImagePart& img : req.images) {
    content.push_back({{"type", "text"}, {"text", img.label}});
    content.push_back(
        {{"type", "image_url"},
         {"image_url",
          {{"url", "data:" + std::string(mime_type(img.format)) + ";base64," +
                       base64_encode(img.bytes)}}}});
  }
  content.push_back({{"type", "text"}, {"text", req.instruction}});
  return {
      {"model", req.model_id},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", std::move(content)}}})},
      {"temperature", req.temperature},
      {"max_tokens", req.max_tokens},
  };
}

RawReply parse_chat_completions_response(std::string_view body) {
  const nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("choices") ||
      !doc["choices"].is_array() || doc["choices"].empty()) {
    throw Error(ErrorCode::kTransport, "malformed chat-completions response: " + snippet(body));
  }
  const nlohmann::json& choice = doc["choices"][0];
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) {
    throw Error(ErrorCode::kTransport, "chat-completions response has no message: " + snippet(body));
  }
  const nlohmann::json& message = choice["message"];
  RawReply reply;
  if (message.contains("content")) {
    const nlohmann::json& c = message["content"];
    if (c.is_string()) {
      reply.text = c.get<std::string>();
    } else if (c.is_array()) {
      for (const auto& part : c) {
        if (part.is_object() && part.value("type", "") == "text" && part.contains("text") &&
            part["text"].is_string()) {
          reply.text += part["text"].get<std::string>();
        }
      }
    }
  }
  if (doc.contains("usage") && doc["usage"].is_object()) {
    const nlohmann::json& u = doc["usage"];
    if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_integer()) {
      reply.usage.prompt_tokens = u["prompt_tokens"].get<int>();
    }
    if (u.contains("completion_tokens") && u["completion_tokens"].is_number_integer()) {
      reply.usage.completion_tokens = u["completion_tokens"].get<int>();
    }
  }
  return reply;
}

namespace detail {

std::unique_ptr<ModelBackend> make_http_backend(const BackendConfig& cfg) {
  return std::make_unique<HttpBackend>(cfg);
}

}  // namespace detail
}  // namespace ecp
