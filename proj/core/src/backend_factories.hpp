#pragma once

#include <memory>

#include "ecp/backend.hpp"

namespace ecp::detail {

std::unique_ptr<ModelBackend> make_http_backend(const BackendConfig& cfg);
std::unique_ptr<ModelBackend> make_synthetic_backend(const BackendConfig& cfg);

}  // namespace ecp::detail
