#pragma once

#include <cstdlib>
#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "coverassert/provider.hpp"
#include "coverassert/semantic.hpp"

namespace fakes {

// In-process provider: chat replies come from a queue (or a fallback
// function), embeddings from the offline hasher.
class ScriptedProvider : public coverassert::LlmProvider {
 public:
  explicit ScriptedProvider(int dim = 64) : dim_(dim) {}

  std::deque<std::string> replies;
  std::function<std::string(const std::vector<coverassert::ChatMessage>&)> on_chat;
  std::vector<std::vector<coverassert::ChatMessage>> chats;
  std::size_t embed_calls = 0;

  std::string chat(const std::vector<coverassert::ChatMessage>& messages) override {
    std::lock_guard lock(mu_);
    chats.push_back(messages);
    if (!replies.empty()) {
      auto r = replies.front();
      replies.pop_front();
      return r;
    }
    if (on_chat) return on_chat(messages);
    throw coverassert::ProviderUnavailable("no scripted reply");
  }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
    std::lock_guard lock(mu_);
    ++embed_calls;
    std::vector<std::vector<double>> out;
    for (const auto& t : texts) {
      auto v = coverassert::offline_embedding(t, dim_, 99);
      out.emplace_back(v.data(), v.data() + v.size());
    }
    return out;
  }

 private:
  int dim_;
  std::mutex mu_;
};

inline coverassert::ProviderConfig live_config(int dim = 64) {
  coverassert::ProviderConfig c;
  c.mode = coverassert::ProviderMode::Live;
  c.endpoint = "http://127.0.0.1:1/v1";
  c.model_name = "fake";
  c.embed_dim = dim;
  c.backoff_ms = 1;
  c.backoff_cap_ms = 2;
  return c;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("coverassert_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fakes
