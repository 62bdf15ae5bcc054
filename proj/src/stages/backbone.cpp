#include "bagent/stages/backbone.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "bagent/core/errors.hpp"
#include "httplib.h"

namespace bagent {

std::int64_t count_tokens(std::string_view text) {
  std::int64_t count = 0;
  bool in_token = false;
  for (char c : text) {
    bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

// ---------------------------------------------------------------------------
// Scripted

namespace {

std::string expand(const std::string& templ, std::string_view prompt, std::size_t match_end) {
  if (templ.find('{') == std::string::npos) return templ;
  std::size_t line_end = prompt.find('\n', match_end);
  std::string_view line = prompt.substr(match_end, line_end == std::string_view::npos
                                                       ? std::string_view::npos
                                                       : line_end - match_end);
  while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
  while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
  std::size_t word_end = 0;
  while (word_end < line.size() && !std::isspace(static_cast<unsigned char>(line[word_end]))) ++word_end;
  std::string_view word = line.substr(0, word_end);

  std::string out;
  for (std::size_t i = 0; i < templ.size();) {
    if (templ.compare(i, 7, "{token}") == 0) {
      out += word;
      i += 7;
    } else if (templ.compare(i, 6, "{line}") == 0) {
      out += line;
      i += 6;
    } else {
      out += templ[i++];
    }
  }
  return out;
}

}  // namespace

ScriptedBackbone::ScriptedBackbone(std::vector<ScriptedRule> rules, std::string name)
    : rules_(std::move(rules)), name_(std::move(name)) {
  std::size_t fallbacks = 0;
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (!rules_[i].pattern.empty()) continue;
    ++fallbacks;
    if (i + 1 != rules_.size()) {
      throw LoadError("rules[" + std::to_string(i) + "].pattern",
                      "fallback rule (empty pattern) must be the last rule");
    }
  }
  if (fallbacks == 0) throw LoadError("rules", "missing fallback rule (empty pattern)");
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    for (const auto& tp : rules_[i].token_probs) {
      if (!(tp.probability >= 0.0 && tp.probability <= 1.0)) {
        throw LoadError("rules[" + std::to_string(i) + "].token_probs", "probability outside [0, 1]");
      }
    }
  }
}

ScriptedBackbone ScriptedBackbone::from_json(const Json& j, std::string name) {
  const Json* rules = &j;
  if (j.is_object()) {
    if (!j.contains("rules")) throw LoadError("rules", "missing field");
    rules = &j.at("rules");
    if (j.contains("name") && j.at("name").is_string()) name = j.at("name").get<std::string>();
  }
  if (!rules->is_array()) throw LoadError("rules", "expected an array");
  std::vector<ScriptedRule> parsed;
  for (std::size_t i = 0; i < rules->size(); ++i) {
    const Json& r = (*rules)[i];
    const std::string where = "rules[" + std::to_string(i) + "]";
    if (!r.is_object()) throw LoadError(where, "expected an object");
    for (const auto& [key, _] : r.items()) {
      if (key != "pattern" && key != "response" && key != "token_probs" && key != "unless") {
        throw LoadError(where + "." + key, "unknown field");
      }
    }
    ScriptedRule rule;
    if (!r.contains("pattern") || !r.at("pattern").is_string()) {
      throw LoadError(where + ".pattern", "missing or not a string");
    }
    if (!r.contains("response") || !r.at("response").is_string()) {
      throw LoadError(where + ".response", "missing or not a string");
    }
    rule.pattern = r.at("pattern").get<std::string>();
    rule.response = r.at("response").get<std::string>();
    if (r.contains("unless")) {
      if (!r.at("unless").is_string()) throw LoadError(where + ".unless", "expected a string");
      rule.unless = r.at("unless").get<std::string>();
    }
    if (r.contains("token_probs")) {
      const Json& probs = r.at("token_probs");
      if (!probs.is_array()) throw LoadError(where + ".token_probs", "expected an array");
      for (const auto& tp : probs) {
        if (!tp.is_array() || tp.size() != 2 || !tp[0].is_string() || !tp[1].is_number()) {
          throw LoadError(where + ".token_probs", "expected [token, probability] pairs");
        }
        rule.token_probs.push_back({tp[0].get<std::string>(), tp[1].get<double>()});
      }
    }
    parsed.push_back(std::move(rule));
  }
  return ScriptedBackbone(std::move(parsed), std::move(name));
}

ScriptedBackbone ScriptedBackbone::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string(), "cannot open rule file");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw LoadError(path.string(), e.what());
  }
  return from_json(j, path.stem().string());
}

Completion ScriptedBackbone::complete(const std::string& prompt) const {
  for (const auto& rule : rules_) {
    std::size_t pos = prompt.find(rule.pattern);
    if (pos == std::string::npos) continue;
    if (rule.unless && prompt.find(*rule.unless) != std::string::npos) continue;
    std::size_t match_end = pos + rule.pattern.size();
    Completion c;
    c.text = expand(rule.response, prompt, match_end);
    std::vector<TokenProb> probs;
    probs.reserve(rule.token_probs.size());
    for (const auto& tp : rule.token_probs) {
      probs.push_back({expand(tp.token, prompt, match_end), tp.probability});
    }
    c.token_probs = std::move(probs);
    c.usage = {count_tokens(prompt), count_tokens(c.text)};
    return c;
  }
  // Unreachable: the constructor guarantees a fallback rule.
  throw BackboneError("no scripted rule matched", false);
}

// ---------------------------------------------------------------------------
// Remote

RemoteBackbone::RemoteBackbone(RemoteConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw ConfigError("MODEL_API_BASE", "endpoint not configured");
  if (config_.api_key.empty()) throw ConfigError("MODEL_API_KEY", "credential not set");
  if (config_.model.empty()) throw ConfigError("backbone.model", "model name required");
  if (config_.max_in_flight < 1) throw ConfigError("backbone.max_in_flight", "must be >= 1");
  std::string url = config_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("MODEL_API_BASE", "expected scheme://host[:port][/path]");
  std::size_t path = url.find('/', scheme + 3);
  origin_ = url.substr(0, path);
  path_prefix_ = path == std::string::npos ? "" : url.substr(path);
  in_flight_ = std::make_unique<std::counting_semaphore<>>(config_.max_in_flight);
}

RemoteConfig RemoteBackbone::config_from_env(std::string model) {
  RemoteConfig config;
  const char* base = std::getenv("MODEL_API_BASE");
  const char* key = std::getenv("MODEL_API_KEY");
  if (!base || !*base) throw ConfigError("MODEL_API_BASE", "environment variable not set");
  if (!key || !*key) throw ConfigError("MODEL_API_KEY", "environment variable not set");
  config.base_url = base;
  config.api_key = key;
  config.model = std::move(model);
  return config;
}

namespace {

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
  ~SemaphoreGuard() { s_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  std::counting_semaphore<>& s_;
};

}  // namespace

Completion RemoteBackbone::complete(const std::string& prompt) const {
  Json request{{"model", config_.model},
               {"messages", Json::array({{{"role", "user"}, {"content", prompt}}})},
               {"temperature", 0}};
  if (config_.request_logprobs) request["logprobs"] = true;
  if (config_.seed) request["seed"] = *config_.seed;

  httplib::Result result;
  {
    SemaphoreGuard guard(*in_flight_);
    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    client.set_bearer_token_auth(config_.api_key);
    result = client.Post(path_prefix_ + "/chat/completions", request.dump(), "application/json");
  }
  if (!result) {
    throw BackboneError("transport failure: " + httplib::to_string(result.error()), true);
  }
  const int status = result->status;
  if (status == 429 || status >= 500) {
    throw BackboneError("server returned HTTP " + std::to_string(status), true);
  }
  if (status < 200 || status >= 300) {
    throw BackboneError("server returned HTTP " + std::to_string(status), false);
  }

  Completion c;
  try {
    Json body = Json::parse(result->body);
    const Json& choice = body.at("choices").at(0);
    c.text = choice.at("message").at("content").get<std::string>();
    if (config_.request_logprobs && choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
      std::vector<TokenProb> probs;
      for (const auto& t : choice["logprobs"]["content"]) {
        probs.push_back({t.at("token").get<std::string>(), std::exp(t.at("logprob").get<double>())});
      }
      c.token_probs = std::move(probs);
    }
    if (config_.reports_usage && body.contains("usage") && body["usage"].is_object()) {
      c.usage.prompt_tokens = body["usage"].at("prompt_tokens").get<std::int64_t>();
      c.usage.completion_tokens = body["usage"].at("completion_tokens").get<std::int64_t>();
    } else {
      c.usage = {count_tokens(prompt), count_tokens(c.text)};
    }
  } catch (const Json::exception& e) {
    throw BackboneError(std::string("malformed response: ") + e.what(), false);
  }
  return c;
}

}  // namespace bagent
