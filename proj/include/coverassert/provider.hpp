#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "coverassert/error.hpp"

namespace coverassert {

enum class ProviderMode { Live, Offline };

struct ProviderConfig {
  ProviderMode mode = ProviderMode::Offline;
  std::string endpoint;  // base URL, e.g. http://127.0.0.1:8080/v1 (live only)
  std::string model_name = "offline-hash";
  std::string embed_model;  // defaults to model_name when empty
  int embed_dim = 4096;
  std::string cache_path;  // empty disables the embedding cache
  std::uint64_t seed = 0x5eed;
  int max_in_flight = 4;
  int embed_batch = 64;
  int max_attempts = 3;
  int backoff_ms = 200;
  int backoff_cap_ms = 2000;
  int timeout_s = 60;

  const std::string& embedding_model() const { return embed_model.empty() ? model_name : embed_model; }
};

// Throws InvalidArgument on out-of-range fields.
void validate(const ProviderConfig& cfg);

struct ChatMessage {
  std::string role;
  std::string content;
};

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  virtual std::string chat(const std::vector<ChatMessage>& messages) = 0;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

// OpenAI-compatible HTTP client. Reads COVERASSERT_API_KEY for the bearer token.
// Transport errors and non-2xx replies raise ProviderUnavailable; unexpected
// bodies raise MalformedProviderReply.
class HttpProvider final : public LlmProvider {
 public:
  explicit HttpProvider(ProviderConfig cfg);
  std::string chat(const std::vector<ChatMessage>& messages) override;
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

 private:
  std::string post(const std::string& path, const std::string& body);

  ProviderConfig cfg_;
  std::string scheme_host_port_;
  std::string base_path_;
};

std::unique_ptr<LlmProvider> make_provider(const ProviderConfig& cfg);

// Runs `fn` up to cfg.max_attempts times, sleeping with capped exponential
// backoff after each retryable failure. Rethrows the last error.
template <typename Fn>
auto with_retries(const ProviderConfig& cfg, Fn&& fn) -> decltype(fn()) {
  int delay = cfg.backoff_ms;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const ProviderUnavailable&) {
      if (attempt >= cfg.max_attempts) throw;
    } catch (const MalformedProviderReply&) {
      if (attempt >= cfg.max_attempts) throw;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    delay = std::min(delay * 2, cfg.backoff_cap_ms);
  }
}

// Strips ```json fences and surrounding prose so the reply can be parsed.
std::string extract_json_block(const std::string& reply);

}  // namespace coverassert
