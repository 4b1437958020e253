#pragma once

// HTTP client for an external generation backend:
//   POST /generate  body: bundle JSON  ->  {"image_id": str, "status": str}
// Connection failures, timeouts and non-2xx replies surface as
// Error(ErrorCode::Backend) after the configured number of retries.

#include <chrono>
#include <string>
#include <thread>

// Eigen first: <resolv.h> (via httplib) defines a `_res` macro that breaks
// Eigen headers parsed after it.
#include <Eigen/Dense>
#include <httplib.h>
#include <json.hpp>

#include "fairrag/conditioning.hpp"
#include "fairrag/error.hpp"

namespace fairrag {

struct BackendConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8080"
  std::string path = "/generate";
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
  std::chrono::milliseconds retry_backoff{200};
};

struct GenerationResponse {
  std::string image_id;
  std::string status;
  int attempts = 0;
};

class GenerationClient {
 public:
  explicit GenerationClient(BackendConfig config) : config_(std::move(config)) {
    if (config_.retries < 0) throw Error(ErrorCode::InvalidArgument, "retries must be non-negative");
  }

  [[nodiscard]] GenerationResponse generate(const ConditioningBundle& bundle) const {
    httplib::Client client(config_.base_url);
    if (!client.is_valid()) throw Error(ErrorCode::Backend, "invalid backend url " + config_.base_url);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    const std::string body = to_json(bundle).dump();
    std::string last_error;
    for (int attempt = 1; attempt <= config_.retries + 1; ++attempt) {
      if (attempt > 1) std::this_thread::sleep_for(config_.retry_backoff);
      auto res = client.Post(config_.path, body, "application/json");
      if (!res) {
        last_error = "request failed: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        last_error = "HTTP " + std::to_string(res->status);
        // Client errors will not improve on retry.
        if (res->status >= 400 && res->status < 500) break;
        continue;
      }
      try {
        const auto j = nlohmann::json::parse(res->body);
        return {j.at("image_id").get<std::string>(), j.at("status").get<std::string>(), attempt};
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Backend, std::string("malformed backend response: ") + e.what());
      }
    }
    throw Error(ErrorCode::Backend, config_.base_url + config_.path + ": " + last_error);
  }

 private:
  BackendConfig config_;
};

}  // namespace fairrag
