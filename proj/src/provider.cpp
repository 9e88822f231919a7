#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "coverassert/provider.hpp"

#include <cstdlib>

#include <nlohmann/json.hpp>

namespace coverassert {

void validate(const ProviderConfig& cfg) {
  if (cfg.embed_dim < 8) throw InvalidArgument("embed_dim must be >= 8");
  if (cfg.max_attempts < 1) throw InvalidArgument("max_attempts must be >= 1");
  if (cfg.max_in_flight < 1) throw InvalidArgument("max_in_flight must be >= 1");
  if (cfg.embed_batch < 1) throw InvalidArgument("embed_batch must be >= 1");
  if (cfg.mode == ProviderMode::Live && cfg.endpoint.empty())
    throw InvalidArgument("live mode requires an endpoint");
}

HttpProvider::HttpProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  const std::string& url = cfg_.endpoint;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidArgument("endpoint must be an http(s) URL");
  auto path_begin = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_begin);
  base_path_ = path_begin == std::string::npos ? "" : url.substr(path_begin);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
}

std::string HttpProvider::post(const std::string& path, const std::string& body) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(cfg_.timeout_s, 0);
  client.set_read_timeout(cfg_.timeout_s, 0);
  httplib::Headers headers;
  if (const char* key = std::getenv("COVERASSERT_API_KEY"); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);
  auto res = client.Post(base_path_ + path, headers, body, "application/json");
  if (!res) throw ProviderUnavailable("request to " + path + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw ProviderUnavailable("request to " + path + " returned HTTP " + std::to_string(res->status));
  return res->body;
}

std::string HttpProvider::chat(const std::vector<ChatMessage>& messages) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json req{{"model", cfg_.model_name}, {"messages", msgs}, {"temperature", 0}};
  std::string body = post("/chat/completions", req.dump());
  try {
    auto reply = nlohmann::json::parse(body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedProviderReply(std::string("chat reply: ") + e.what());
  }
}

std::vector<std::vector<double>> HttpProvider::embed(const std::vector<std::string>& texts) {
  nlohmann::json req{{"model", cfg_.embedding_model()}, {"input", texts}};
  std::string body = post("/embeddings", req.dump());
  std::vector<std::vector<double>> out;
  try {
    auto reply = nlohmann::json::parse(body);
    for (const auto& item : reply.at("data")) out.push_back(item.at("embedding").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw MalformedProviderReply(std::string("embedding reply: ") + e.what());
  }
  if (out.size() != texts.size())
    throw MalformedProviderReply("embedding reply has " + std::to_string(out.size()) +
                                 " rows for " + std::to_string(texts.size()) + " inputs");
  for (const auto& row : out)
    if (static_cast<int>(row.size()) != cfg_.embed_dim)
      throw DimensionMismatch("embedding width " + std::to_string(row.size()) + ", expected " +
                              std::to_string(cfg_.embed_dim));
  return out;
}

std::unique_ptr<LlmProvider> make_provider(const ProviderConfig& cfg) {
  if (cfg.mode != ProviderMode::Live) return nullptr;
  return std::make_unique<HttpProvider>(cfg);
}

std::string extract_json_block(const std::string& reply) {
  auto fence = reply.find("```");
  if (fence != std::string::npos) {
    auto body = reply.find('\n', fence);
    auto close = body == std::string::npos ? std::string::npos : reply.find("```", body);
    if (close != std::string::npos) return reply.substr(body + 1, close - body - 1);
  }
  auto first = reply.find_first_of("{[");
  auto last = reply.find_last_of("}]");
  if (first == std::string::npos || last == std::string::npos || last < first) return reply;
  return reply.substr(first, last - first + 1);
}

}  // namespace coverassert
