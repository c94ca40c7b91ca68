#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cnorm/corpus.hpp"

namespace cnorm {

/// The fixed recognition prompt sent with every image.
inline constexpr const char* kRecognitionPrompt =
    "What is the specific content of this drawing? How did you see it from the picture?";

inline constexpr const char* kUnrecognizedLabel = "unrecognized";

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string path = "/chat/completions";
  std::string model_name = "vision-model";
  std::string api_key_env = "CNORM_API_KEY";
  double timeout_seconds = 60.0;
  int max_retries = 2;
  int max_concurrent_requests = 4;
  /// Request body with {{model}}, {{prompt}} and {{image_url}} placeholders
  /// substituted inside string values.
  nlohmann::json request_template;
  /// JSON pointer to the reply text inside the response body.
  std::string response_pointer = "/choices/0/message/content";

  EndpointConfig();
  static EndpointConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Label -> terms. A response's label is the entry with the most term hits.
using LabelLexicons = std::map<std::string, std::set<std::string>>;

LabelLexicons parse_label_lexicons(const nlohmann::json& j);

/// Carries one request body to an endpoint and returns the reply text.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string send(const std::string& image_key, const nlohmann::json& body) = 0;
};

/// POSTs to an OpenAI-style endpoint with retries. The key is read from the
/// environment on every call.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(EndpointConfig cfg) : cfg_(std::move(cfg)) {}
  std::string send(const std::string& image_key, const nlohmann::json& body) override;

 private:
  EndpointConfig cfg_;
};

/// Replays canned responses per image path, in order.
/// File format: {"<image_path>": ["first reply", "second reply", ...], ...}
class StubTransport final : public Transport {
 public:
  explicit StubTransport(std::map<std::string, std::vector<std::string>> responses)
      : responses_(std::move(responses)) {}
  static std::shared_ptr<StubTransport> load(const std::string& path);

  std::string send(const std::string& image_key, const nlohmann::json& body) override;
  std::size_t calls() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::vector<std::string>> responses_;
  std::map<std::string, std::size_t> cursor_;
  std::size_t calls_ = 0;
};

struct ImageJob {
  std::string item_id;
  std::string theme_id;
  std::string image_path;
};

struct ProtocolOutcome {
  std::vector<RecognitionRecord> records;
  std::optional<ResolvedItem> resolved;
  std::string error;  // set when the protocol could not finish
};

std::string derive_label(const std::string& response, const LabelLexicons& lexicons);

/// Fills the request template for one image.
nlohmann::json build_request_body(const EndpointConfig& cfg, const std::string& prompt, const std::string& image_url);

class RecognitionClient {
 public:
  RecognitionClient(EndpointConfig cfg, std::shared_ptr<Transport> transport, LabelLexicons lexicons);

  /// One fresh, stateless request for `job`; no earlier reply is ever included.
  RecognitionRecord recognize(const ImageJob& job, int pass_index);

  /// Two passes, a third on disagreement, then the 2-of-3 resolution.
  ProtocolOutcome run_protocol(const ImageJob& job);

  /// Runs jobs concurrently, never more than max_concurrent_requests at once.
  /// Passes of one job stay sequential. Output order follows `jobs`.
  std::vector<ProtocolOutcome> run_batch(const std::vector<ImageJob>& jobs);

  std::vector<nlohmann::json> transcript() const;
  void write_transcript(const std::string& path) const;

 private:
  EndpointConfig cfg_;
  std::shared_ptr<Transport> transport_;
  LabelLexicons lexicons_;
  mutable std::mutex mu_;
  std::vector<nlohmann::json> transcript_;
};

}  // namespace cnorm
