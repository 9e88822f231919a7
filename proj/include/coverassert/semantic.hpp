#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "coverassert/provider.hpp"
#include "coverassert/sva.hpp"

namespace coverassert {

struct IntentRecord {
  std::string assertion_id;
  std::string intent_text;
  Eigen::VectorXd embedding;  // unit L2 norm
  bool fallback = false;      // live provider failed; offline text used
};

// Deterministic intent text built from the property shape, e.g.
// "implication: [a] implies [b]".
std::string offline_intent(const Assertion& assertion);

// Lowercased word tokens used by the offline embedding.
std::vector<std::string> embedding_tokens(std::string_view text);

// Seeded signed feature hashing of tokens into `dim` buckets, L2-normalized.
// Accumulation is integer-only so results are identical across platforms.
Eigen::VectorXd offline_embedding(std::string_view text, int dim, std::uint64_t seed);

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Embedding cache: <dir>/<sha256(text)>.json holding {text, embeddings: {model: [...]}}.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path dir);

  std::optional<Eigen::VectorXd> lookup(const std::string& model, const std::string& text,
                                        int dim) const;
  void store(const std::string& model, const std::string& text, const Eigen::VectorXd& v);

 private:
  std::filesystem::path file_for(const std::string& text) const;
  std::filesystem::path dir_;
};

struct SemanticStats {
  std::size_t provider_calls = 0;  // texts the provider (or offline hasher) had to embed
  std::size_t cache_hits = 0;
  std::size_t intent_fallbacks = 0;
};

class SemanticEngine {
 public:
  // Live mode without an explicit provider builds an HttpProvider from cfg.
  explicit SemanticEngine(ProviderConfig cfg, std::shared_ptr<LlmProvider> provider = nullptr);

  const ProviderConfig& config() const noexcept { return cfg_; }
  bool live() const noexcept { return cfg_.mode == ProviderMode::Live; }
  LlmProvider* provider() const noexcept { return provider_.get(); }

  // Live: provider completion for the intent template, retried; falls back to
  // offline_intent (and sets *fell_back) once retries are exhausted.
  std::string describe_intent(const Assertion& assertion, bool* fell_back = nullptr);

  // Intent text plus embedding for every assertion, in input order.
  std::vector<IntentRecord> intents(std::span<const Assertion> assertions);

  // N x E, unit rows, input order. Throws ProviderUnavailable, DimensionMismatch.
  Eigen::MatrixXd embed_batch(std::span<const std::string> texts);
  Eigen::VectorXd embed_one(const std::string& text);

  // Single chat completion with retries (live only).
  std::string chat(const std::string& prompt);

  const SemanticStats& stats() const noexcept { return stats_; }
  void reset_stats() noexcept { stats_ = {}; }

 private:
  std::string cache_model_key() const;

  ProviderConfig cfg_;
  std::shared_ptr<LlmProvider> provider_;
  std::optional<EmbeddingCache> cache_;
  SemanticStats stats_;
};

}  // namespace coverassert
