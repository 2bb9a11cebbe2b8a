#pragma once

#include <condition_variable>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

#include "agentsafe/backend.hpp"
#include "agentsafe/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace agentsafe {

/// Remote endpoint settings, normally taken from the environment:
/// AGENTSAFE_BACKEND, AGENTSAFE_BASE_URL, AGENTSAFE_API_KEY, AGENTSAFE_MODEL,
/// AGENTSAFE_EMBED_MODEL.
struct RemoteConfig {
  std::string base_url;
  std::string api_key;
  std::string model = "gpt-4o-mini";
  std::string embed_model = "text-embedding-3-small";
  int max_in_flight = 4;
  bool trace = false;
};

inline RemoteConfig remote_config_from_env() {
  RemoteConfig cfg;
  if (const char* v = std::getenv("AGENTSAFE_BASE_URL")) cfg.base_url = v;
  if (const char* v = std::getenv("AGENTSAFE_API_KEY")) cfg.api_key = v;
  if (const char* v = std::getenv("AGENTSAFE_MODEL")) cfg.model = v;
  if (const char* v = std::getenv("AGENTSAFE_EMBED_MODEL")) cfg.embed_model = v;
  return cfg;
}

/// Generic HTTP JSON chat-completion client with a separate embedding
/// endpoint. Every protocol surprise surfaces as a BackendError so callers
/// fail closed.
class RemoteBackend : public Backend {
public:
  explicit RemoteBackend(RemoteConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) {
      throw BackendError("remote backend needs AGENTSAFE_BASE_URL");
    }
  }

  BackendKind kind() const override { return BackendKind::RemoteChat; }

  EmbeddingVector embed(const std::string& text) override {
    if (token_count(text) == 0) {
      throw InvalidArgument("embed: empty text");
    }
    nlohmann::json body = {{"model", cfg_.embed_model}, {"input", text}};
    nlohmann::json resp = post("/v1/embeddings", body);
    try {
      auto vec = resp.at("data").at(0).at("embedding").get<std::vector<double>>();
      std::lock_guard<std::mutex> lock(mu_);
      if (dim_ == 0) {
        dim_ = vec.size();
      } else if (dim_ != vec.size()) {
        throw BackendError("embedding dimension changed mid-run");
      }
      return EmbeddingVector{std::move(vec)};
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("embedding response malformed: ") + e.what());
    }
  }

  std::vector<std::string> extract(const std::string& content,
                                   const std::string& prompt,
                                   const std::string& registry_context) override {
    if (content.empty()) {
      throw InvalidArgument("extract: empty content");
    }
    std::string system = prompt +
                         " Reply with a JSON array of names drawn from this "
                         "list only:\n" +
                         registry_context;
    std::string reply = chat(system, content);
    try {
      nlohmann::json arr = nlohmann::json::parse(strip_fences(reply));
      if (!arr.is_array()) throw ExtractionError("extractor reply is not a list");
      std::vector<std::string> out;
      for (const auto& v : arr) {
        if (!v.is_string()) throw ExtractionError("extractor reply holds non-strings");
        out.push_back(v.get<std::string>());
      }
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    } catch (const nlohmann::json::exception&) {
      throw ExtractionError("extractor reply is not valid JSON: " + reply);
    }
  }

  JudgeVerdict judge(const ReflectionPrompt& prompt,
                     const std::string& payload) override {
    std::string system = prompt.render() +
                         "\nReply with exactly one word: Valid, Junk, Authentic, "
                         "or Inauthentic.";
    std::string reply = chat(system, payload);
    std::string word = to_lower(reply);
    while (!word.empty() && (word.back() == '.' || word.back() == '\n' ||
                             word.back() == ' ')) {
      word.pop_back();
    }
    if (word == "valid") return {JudgeVerdictKind::Valid, reply};
    if (word == "junk") return {JudgeVerdictKind::Junk, reply};
    if (word == "authentic") return {JudgeVerdictKind::Authentic, reply};
    if (word == "inauthentic") return {JudgeVerdictKind::Inauthentic, reply};
    throw BackendError("judge reply not in the verdict set: " + reply);
  }

private:
  /// Single chat turn; returns the assistant text.
  std::string chat(const std::string& system, const std::string& user) {
    nlohmann::json body = {
        {"model", cfg_.model},
        {"messages", nlohmann::json::array({{{"role", "system"}, {"content", system}},
                                            {{"role", "user"}, {"content", user}}})},
        {"temperature", 0.0}};
    nlohmann::json resp = post("/v1/chat/completions", body);
    try {
      return resp.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("chat response malformed: ") + e.what());
    }
  }

  nlohmann::json post(const std::string& path, const nlohmann::json& body) {
    InFlightGuard guard(*this);
    httplib::Client client(cfg_.base_url);
    client.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    }
    std::string payload = body.dump();
    if (cfg_.trace) {
      std::cerr << "[remote] POST " << path << " " << redacted(payload) << "\n";
    }
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      throw BackendError("remote endpoint unreachable: " + cfg_.base_url + path,
                         /*retryable=*/true);
    }
    if (cfg_.trace) {
      std::cerr << "[remote] " << res->status << " " << redacted(res->body) << "\n";
    }
    if (res->status >= 500) {
      throw BackendError("remote endpoint error " + std::to_string(res->status),
                         /*retryable=*/true);
    }
    if (res->status != 200) {
      throw BackendError("remote endpoint rejected request: " +
                         std::to_string(res->status) + " " + res->body);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("remote reply is not JSON: ") + e.what());
    }
  }

  static std::string strip_fences(const std::string& s) {
    std::string out = s;
    auto pos = out.find("```");
    if (pos != std::string::npos) {
      auto end = out.rfind("```");
      if (end > pos + 3) {
        out = out.substr(pos + 3, end - pos - 3);
        auto nl = out.find('\n');
        if (nl != std::string::npos && out.substr(0, nl).find('[') == std::string::npos) {
          out = out.substr(nl + 1);
        }
      }
    }
    return out;
  }

  std::string redacted(std::string text) const {
    if (!cfg_.api_key.empty()) {
      std::size_t pos;
      while ((pos = text.find(cfg_.api_key)) != std::string::npos) {
        text.replace(pos, cfg_.api_key.size(), "***");
      }
    }
    return text;
  }

  class InFlightGuard {
  public:
    explicit InFlightGuard(RemoteBackend& b) : b_(b) {
      std::unique_lock<std::mutex> lock(b_.mu_);
      b_.cv_.wait(lock, [&] { return b_.in_flight_ < b_.cfg_.max_in_flight; });
      ++b_.in_flight_;
    }
    ~InFlightGuard() {
      {
        std::lock_guard<std::mutex> lock(b_.mu_);
        --b_.in_flight_;
      }
      b_.cv_.notify_one();
    }

  private:
    RemoteBackend& b_;
  };

  RemoteConfig cfg_;
  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
  std::size_t dim_ = 0;
};

inline BackendPtr make_remote_backend(RemoteConfig cfg) {
  return std::make_shared<RemoteBackend>(std::move(cfg));
}

/// Backend selection honoring AGENTSAFE_BACKEND ("mock" default, "remote").
inline BackendPtr make_backend_from_env(std::size_t mock_dim = 64,
                                        std::uint64_t mock_seed = 0,
                                        bool trace = false) {
  const char* kind = std::getenv("AGENTSAFE_BACKEND");
  if (kind != nullptr && std::string(kind) == "remote") {
    RemoteConfig cfg = remote_config_from_env();
    cfg.trace = trace;
    return make_remote_backend(std::move(cfg));
  }
  return make_mock_backend(mock_dim, mock_seed);
}

}  // namespace agentsafe
