#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "bagent/core/types.hpp"

namespace bagent {

// Whitespace-delimited token count; the fallback usage counter.
std::int64_t count_tokens(std::string_view text);

struct Completion {
  std::string text;
  // Absent when the backbone produced no per-token probabilities.
  std::optional<std::vector<TokenProb>> token_probs;
  Usage usage;
};

class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual Completion complete(const std::string& prompt) const = 0;
  virtual std::string name() const = 0;
  virtual bool exposes_token_probs() const = 0;
};

// A rule fires when `pattern` occurs in the prompt and `unless` (if set)
// does not. The empty pattern matches every prompt and marks the fallback.
// In `response` and annotated tokens, {token} expands to the
// whitespace-delimited word following the match and {line} to the rest of
// that line.
struct ScriptedRule {
  std::string pattern;
  std::optional<std::string> unless;
  std::string response;
  std::vector<TokenProb> token_probs;
};

class ScriptedBackbone final : public Backbone {
 public:
  // Requires exactly one fallback rule, placed last.
  explicit ScriptedBackbone(std::vector<ScriptedRule> rules, std::string name = "scripted");

  static ScriptedBackbone from_json(const Json& j, std::string name = "scripted");
  static ScriptedBackbone load(const std::filesystem::path& path);

  Completion complete(const std::string& prompt) const override;
  std::string name() const override { return name_; }
  bool exposes_token_probs() const override { return true; }

  const std::vector<ScriptedRule>& rules() const { return rules_; }

 private:
  std::vector<ScriptedRule> rules_;
  std::string name_;
};

struct RemoteConfig {
  std::string base_url;  // e.g. http://host:port/v1
  std::string api_key;
  std::string model;
  bool reports_usage = true;
  bool request_logprobs = false;
  int max_in_flight = 4;
  int timeout_seconds = 60;
  std::optional<std::uint64_t> seed;
};

// Generic chat-completion client:
//   POST {base_url}/chat/completions
// Transport failures, 429 and 5xx are retryable; other errors are fatal.
class RemoteBackbone final : public Backbone {
 public:
  explicit RemoteBackbone(RemoteConfig config);

  // Reads MODEL_API_BASE and MODEL_API_KEY; throws ConfigError when absent.
  static RemoteConfig config_from_env(std::string model);

  Completion complete(const std::string& prompt) const override;
  std::string name() const override { return config_.model; }
  bool exposes_token_probs() const override { return config_.request_logprobs; }

  const RemoteConfig& config() const { return config_; }

 private:
  RemoteConfig config_;
  std::string origin_;
  std::string path_prefix_;
  mutable std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

}  // namespace bagent
