#include "cnorm/llmclient.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "cnorm/error.hpp"
#include "cnorm/text.hpp"
#include "digest.hpp"

namespace cnorm {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot read image " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string mime_for(const std::string& path) {
  auto dot = path.rfind('.');
  const auto ext = dot == std::string::npos ? std::string{} : fold_case(path.substr(dot + 1));
  if (ext == "png") return "image/png";
  if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
  if (ext == "gif") return "image/gif";
  if (ext == "webp") return "image/webp";
  return "application/octet-stream";
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
    s.replace(pos, from.size(), to);
}

void substitute(json& node, const std::map<std::string, std::string>& vars) {
  if (node.is_string()) {
    auto s = node.get<std::string>();
    for (const auto& [k, v] : vars) replace_all(s, k, v);
    node = s;
  } else if (node.is_structured()) {
    for (auto& child : node) substitute(child, vars);
  }
}

// Splits "https://host:port/prefix" into ("https://host:port", "/prefix").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, ""};
  std::string prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

}  // namespace

EndpointConfig::EndpointConfig() {
  request_template = json::parse(R"({
    "model": "{{model}}",
    "messages": [
      {"role": "user",
       "content": [
         {"type": "text", "text": "{{prompt}}"},
         {"type": "image_url", "image_url": {"url": "{{image_url}}"}}
       ]}
    ]
  })");
}

EndpointConfig EndpointConfig::from_json(const json& j) {
  EndpointConfig c;
  c.base_url = j.value("base_url", c.base_url);
  c.path = j.value("path", c.path);
  c.model_name = j.value("model_name", c.model_name);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.max_concurrent_requests = j.value("max_concurrent_requests", c.max_concurrent_requests);
  if (j.contains("request_template")) c.request_template = j.at("request_template");
  c.response_pointer = j.value("response_pointer", c.response_pointer);
  if (c.max_concurrent_requests < 1) throw Error("invalid_config", "max_concurrent_requests must be >= 1");
  if (c.max_retries < 0) throw Error("invalid_config", "max_retries must be >= 0");
  return c;
}

json EndpointConfig::to_json() const {
  return {{"base_url", base_url},
          {"path", path},
          {"model_name", model_name},
          {"api_key_env", api_key_env},
          {"timeout_seconds", timeout_seconds},
          {"max_retries", max_retries},
          {"max_concurrent_requests", max_concurrent_requests},
          {"request_template", request_template},
          {"response_pointer", response_pointer}};
}

LabelLexicons parse_label_lexicons(const json& j) {
  if (!j.is_object()) throw Error("parse_error", "label lexicons must be an object");
  LabelLexicons out;
  for (const auto& [label, terms] : j.items()) {
    auto& dst = out[label];
    for (const auto& t : terms) dst.insert(fold_case(t.get<std::string>()));
  }
  return out;
}

std::string HttpTransport::send(const std::string& image_key, const json& body) {
  (void)image_key;
  const auto [host, prefix] = split_url(cfg_.base_url);
  httplib::Client cli(host);
  const auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);
  cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  cli.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(200 << (attempt - 1)));
    auto res = cli.Post(prefix + cfg_.path, headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw Error("http_error", "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw Error("bad_response", e.what());
    }
    const json::json_pointer ptr(cfg_.response_pointer);
    if (!reply.contains(ptr) || !reply.at(ptr).is_string())
      throw Error("bad_response", "no string at " + cfg_.response_pointer);
    return reply.at(ptr).get<std::string>();
  }
  throw Error("transport_failure", last_error);
}

std::shared_ptr<StubTransport> StubTransport::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open stub transcript " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("parse_error", std::string("stub transcript: ") + e.what());
  }
  return std::make_shared<StubTransport>(j.get<std::map<std::string, std::vector<std::string>>>());
}

std::string StubTransport::send(const std::string& image_key, const json& body) {
  (void)body;
  std::lock_guard lock(mu_);
  ++calls_;
  auto it = responses_.find(image_key);
  if (it == responses_.end()) throw Error("transport_failure", "stub has no responses for " + image_key);
  auto& pos = cursor_[image_key];
  if (pos >= it->second.size()) throw Error("transport_failure", "stub responses exhausted for " + image_key);
  return it->second[pos++];
}

std::size_t StubTransport::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::string derive_label(const std::string& response, const LabelLexicons& lexicons) {
  std::vector<std::string> toks;
  try {
    toks = normalize_tokens(strip_punctuation(tokenize(response)));
  } catch (const Error&) {
    return kUnrecognizedLabel;
  }
  std::string best = kUnrecognizedLabel;
  std::size_t best_hits = 0;
  for (const auto& [label, terms] : lexicons) {
    std::size_t hits = 0;
    for (const auto& t : toks) hits += terms.count(t);
    if (hits > best_hits) {
      best_hits = hits;
      best = label;
    }
  }
  return best;
}

json build_request_body(const EndpointConfig& cfg, const std::string& prompt, const std::string& image_url) {
  json body = cfg.request_template;
  substitute(body, {{"{{model}}", cfg.model_name}, {"{{prompt}}", prompt}, {"{{image_url}}", image_url}});
  return body;
}

RecognitionClient::RecognitionClient(EndpointConfig cfg, std::shared_ptr<Transport> transport,
                                     LabelLexicons lexicons)
    : cfg_(std::move(cfg)), transport_(std::move(transport)), lexicons_(std::move(lexicons)) {
  if (!transport_) throw Error("invalid_argument", "no transport");
}

RecognitionRecord RecognitionClient::recognize(const ImageJob& job, int pass_index) {
  const std::string bytes = read_file(job.image_path);
  const std::string data_url = "data:" + mime_for(job.image_path) + ";base64," + detail::base64(bytes);
  const json body = build_request_body(cfg_, kRecognitionPrompt, data_url);

  std::string reply;
  std::string failure;
  try {
    reply = transport_->send(job.image_path, body);
  } catch (const Error& e) {
    failure = e.what();
  }

  json entry = {{"item_id", job.item_id},
                {"image_path", job.image_path},
                {"pass_index", pass_index},
                {"request", build_request_body(cfg_, kRecognitionPrompt, "sha256:" + detail::sha256_hex(bytes))}};
  if (failure.empty()) {
    entry["response"] = reply;
  } else {
    entry["error"] = failure;
  }
  {
    std::lock_guard lock(mu_);
    transcript_.push_back(std::move(entry));
  }
  if (!failure.empty()) throw Error("transport_failure", failure);
  if (reply.find_first_not_of(" \t\r\n") == std::string::npos)
    throw Error("empty_response", "image " + job.image_path);

  RecognitionRecord r;
  r.item_id = job.item_id;
  r.theme_id = job.theme_id;
  r.pass_index = pass_index;
  r.label = derive_label(reply, lexicons_);
  r.reasoning_text = reply;
  r.source = RecordSource::llm;
  return r;
}

ProtocolOutcome RecognitionClient::run_protocol(const ImageJob& job) {
  ProtocolOutcome out;
  out.records.push_back(recognize(job, 1));
  out.records.push_back(recognize(job, 2));
  if (normalize_label(out.records[0].label) != normalize_label(out.records[1].label))
    out.records.push_back(recognize(job, 3));
  out.resolved = resolve_item(out.records);
  return out;
}

std::vector<ProtocolOutcome> RecognitionClient::run_batch(const std::vector<ImageJob>& jobs) {
  std::vector<ProtocolOutcome> out(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
      try {
        out[i] = run_protocol(jobs[i]);
      } catch (const std::exception& e) {
        out[i].error = e.what();
      }
    }
  };
  const auto n = std::min<std::size_t>(jobs.size(), static_cast<std::size_t>(cfg_.max_concurrent_requests));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
  }
  return out;
}

std::vector<json> RecognitionClient::transcript() const {
  std::lock_guard lock(mu_);
  return transcript_;
}

void RecognitionClient::write_transcript(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write " + path);
  for (const auto& e : transcript()) out << e.dump() << '\n';
}

}  // namespace cnorm
