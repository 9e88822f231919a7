#include "coverassert/semantic.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "coverassert/canonical_json.hpp"
#include "coverassert/error.hpp"
#include "coverassert/hashing.hpp"
#include "coverassert/prompts.hpp"

namespace coverassert {

namespace {

std::string bracket_list(const std::vector<std::string>& names) {
  std::string out = "[";
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    out += names[i];
  }
  return out + "]";
}

std::vector<std::string> keep_known(const std::vector<std::string>& names,
                                    const std::vector<std::string>& known) {
  std::vector<std::string> out;
  for (const auto& n : names)
    if (std::binary_search(known.begin(), known.end(), n)) out.push_back(n);
  return out;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Runs fn(i) for i in [0, n) on at most `limit` threads. The first exception
// thrown by any task is rethrown after all workers finish.
template <typename Fn>
void bounded_for(std::size_t n, int limit, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(limit, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::string offline_intent(const Assertion& assertion) {
  PropertyShape shape = property_shape(assertion.text);
  auto ante = keep_known(shape.antecedent, assertion.signals);
  auto cons = keep_known(shape.consequent, assertion.signals);
  std::string out;
  if (shape.implication.empty()) {
    out = "property: " + bracket_list(cons);
  } else {
    out = "implication: " + bracket_list(ante) +
          (shape.implication == "|=>" ? " implies next " : " implies ") + bracket_list(cons);
  }
  if (!shape.operators.empty()) {
    out += " with ";
    for (std::size_t i = 0; i < shape.operators.size(); ++i) {
      if (i) out += ", ";
      out += shape.operators[i];
    }
  }
  return out;
}

std::vector<std::string> embedding_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '_' || c == '$') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Eigen::VectorXd offline_embedding(std::string_view text, int dim, std::uint64_t seed) {
  if (dim < 1) throw InvalidArgument("embedding dimension must be positive");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(dim), 0);
  auto add = [&](std::string_view token) {
    std::uint64_t h = splitmix64(fnv1a(token) ^ splitmix64(seed));
    auto bucket = static_cast<std::size_t>((h & 0xffffffffULL) % static_cast<std::uint64_t>(dim));
    counts[bucket] += (h >> 63) ? -1 : 1;
  };
  auto tokens = embedding_tokens(text);
  if (tokens.empty()) {
    add(text);
  } else {
    for (const auto& t : tokens) add(t);
  }
  std::int64_t sq = 0;
  for (auto c : counts) sq += c * c;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  if (sq == 0) {
    // Every token cancelled out; fall back to hashing the whole text.
    std::uint64_t h = splitmix64(fnv1a(text) ^ seed);
    v(static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim))) = 1.0;
    return v;
  }
  const double norm = std::sqrt(static_cast<double>(sq));
  for (int i = 0; i < dim; ++i) v(i) = static_cast<double>(counts[static_cast<std::size_t>(i)]) / norm;
  return v;
}

// Single pass with one summation order, so identical vectors give exactly 1.
double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw DimensionMismatch("cosine of vectors with different widths");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path EmbeddingCache::file_for(const std::string& text) const {
  return dir_ / (sha256_hex(text) + ".json");
}

std::optional<Eigen::VectorXd> EmbeddingCache::lookup(const std::string& model,
                                                      const std::string& text, int dim) const {
  auto path = file_for(text);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    auto doc = nlohmann::json::parse(read_file(path));
    if (doc.value("text", std::string{}) != text) return std::nullopt;
    const auto& embeddings = doc.at("embeddings");
    if (!embeddings.contains(model)) return std::nullopt;
    auto row = embeddings.at(model).get<std::vector<double>>();
    if (static_cast<int>(row.size()) != dim) return std::nullopt;
    return Eigen::Map<Eigen::VectorXd>(row.data(), dim);
  } catch (const std::exception&) {
    // Corrupt entries are treated as misses and overwritten.
    return std::nullopt;
  }
}

void EmbeddingCache::store(const std::string& model, const std::string& text,
                           const Eigen::VectorXd& v) {
  auto path = file_for(text);
  nlohmann::json doc{{"text", text}, {"embeddings", nlohmann::json::object()}};
  std::error_code ec;
  if (std::filesystem::exists(path, ec)) {
    try {
      auto old = nlohmann::json::parse(read_file(path));
      if (old.value("text", std::string{}) == text && old.contains("embeddings") &&
          old["embeddings"].is_object())
        doc["embeddings"] = old["embeddings"];
    } catch (const std::exception&) {
    }
  }
  doc["embeddings"][model] = std::vector<double>(v.data(), v.data() + v.size());
  // Full round-trip precision; canonical 9-digit output would perturb cached rows.
  write_file_atomic(path, doc.dump(2) + "\n");
}

SemanticEngine::SemanticEngine(ProviderConfig cfg, std::shared_ptr<LlmProvider> provider)
    : cfg_(std::move(cfg)), provider_(std::move(provider)) {
  validate(cfg_);
  if (live() && !provider_) provider_ = make_provider(cfg_);
  if (!cfg_.cache_path.empty()) cache_.emplace(cfg_.cache_path);
}

std::string SemanticEngine::cache_model_key() const {
  if (live()) return cfg_.embedding_model();
  return "offline-hash/v1/seed=" + std::to_string(cfg_.seed);
}

std::string SemanticEngine::chat(const std::string& prompt) {
  if (!provider_) throw ProviderUnavailable("no live provider configured");
  std::vector<ChatMessage> messages{{"user", prompt}};
  return with_retries(cfg_, [&] { return provider_->chat(messages); });
}

std::string SemanticEngine::describe_intent(const Assertion& assertion, bool* fell_back) {
  if (assertion.text.empty()) throw InvalidArgument("assertion " + assertion.id + " has no text");
  if (fell_back) *fell_back = false;
  if (!live()) return offline_intent(assertion);
  try {
    std::string reply = chat(render_prompt("intent_v1", {{"assertion", assertion.text}}));
    if (!reply.empty()) return reply;
  } catch (const ProviderUnavailable&) {
  } catch (const MalformedProviderReply&) {
  }
  if (fell_back) *fell_back = true;
  return offline_intent(assertion);
}

std::vector<IntentRecord> SemanticEngine::intents(std::span<const Assertion> assertions) {
  std::vector<IntentRecord> out(assertions.size());
  std::vector<char> flags(assertions.size(), 0);
  bounded_for(assertions.size(), live() ? cfg_.max_in_flight : 1, [&](std::size_t i) {
    bool fb = false;
    out[i].assertion_id = assertions[i].id;
    out[i].intent_text = describe_intent(assertions[i], &fb);
    flags[i] = fb ? 1 : 0;
  });
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].fallback = flags[i] != 0;
    if (out[i].fallback) ++stats_.intent_fallbacks;
    texts.push_back(out[i].intent_text);
  }
  if (texts.empty()) return out;
  Eigen::MatrixXd rows = embed_batch(texts);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].embedding = rows.row(static_cast<Eigen::Index>(i)).transpose();
  return out;
}

Eigen::MatrixXd SemanticEngine::embed_batch(std::span<const std::string> texts) {
  if (texts.empty()) throw InvalidArgument("embed_batch needs at least one text");
  for (const auto& t : texts)
    if (t.empty()) throw InvalidArgument("embed_batch received an empty text");

  const int dim = cfg_.embed_dim;
  const std::string model = cache_model_key();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(texts.size()), dim);

  std::vector<std::size_t> misses;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    std::optional<Eigen::VectorXd> hit;
    if (cache_) hit = cache_->lookup(model, texts[i], dim);
    if (hit) {
      out.row(static_cast<Eigen::Index>(i)) = hit->transpose();
      ++stats_.cache_hits;
    } else {
      misses.push_back(i);
    }
  }
  if (misses.empty()) return out;

  std::vector<Eigen::VectorXd> fresh(misses.size());
  if (!live()) {
    for (std::size_t m = 0; m < misses.size(); ++m)
      fresh[m] = offline_embedding(texts[misses[m]], dim, cfg_.seed);
  } else {
    if (!provider_) throw ProviderUnavailable("no live provider configured");
    const auto batch = static_cast<std::size_t>(cfg_.embed_batch);
    const std::size_t n_batches = (misses.size() + batch - 1) / batch;
    bounded_for(n_batches, cfg_.max_in_flight, [&](std::size_t b) {
      std::vector<std::string> chunk;
      const std::size_t lo = b * batch, hi = std::min(misses.size(), lo + batch);
      for (std::size_t m = lo; m < hi; ++m) chunk.push_back(texts[misses[m]]);
      auto rows = with_retries(cfg_, [&] { return provider_->embed(chunk); });
      if (rows.size() != chunk.size())
        throw MalformedProviderReply("embedding reply row count does not match request");
      for (std::size_t m = lo; m < hi; ++m) {
        auto& row = rows[m - lo];
        if (static_cast<int>(row.size()) != dim)
          throw DimensionMismatch("embedding width " + std::to_string(row.size()) + ", expected " +
                                  std::to_string(dim));
        Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(row.data(), dim);
        const double norm = v.norm();
        if (!(norm > 0.0) || !std::isfinite(norm))
          throw MalformedProviderReply("embedding row has zero or non-finite norm");
        fresh[m] = v / norm;
      }
    });
  }

  for (std::size_t m = 0; m < misses.size(); ++m) {
    out.row(static_cast<Eigen::Index>(misses[m])) = fresh[m].transpose();
    if (cache_) cache_->store(model, texts[misses[m]], fresh[m]);
  }
  stats_.provider_calls += misses.size();
  return out;
}

Eigen::VectorXd SemanticEngine::embed_one(const std::string& text) {
  std::vector<std::string> one{text};
  return embed_batch(one).row(0).transpose();
}

}  // namespace coverassert
