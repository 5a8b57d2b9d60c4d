#pragma once

// Text -> token-feature providers standing in for a frozen language model,
// and the fixed relative-position feature pick.

#include <atomic>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalign/autodiff.hpp"

namespace causalign::enhancer {

struct TokenFeatureSequence {
  ad::Matrix tokens;  // n x d, row j is x_{j+1}
  int prompt_id = 0;
  ad::Index size() const { return tokens.rows(); }
  ad::Index dim() const { return tokens.cols(); }
};

struct NodePayload {
  std::vector<std::string> tokens;
  int class_hint = -1;  // used by the mock only; -1 = no class signal
};

enum class EnhancerKind { Mock, Remote };

struct EnhancerSpec {
  EnhancerKind kind = EnhancerKind::Mock;
  int dim = 32;
  // Mock
  std::optional<std::uint64_t> seed;
  double informative_position = 1.0;  // relative position r in (0, 1] of the class signal
  double signal = 1.5;                // peak class-signal weight
  double signal_width = 1.0;          // decay length in tokens
  // Remote
  std::string endpoint;               // http(s)://host[:port]/path
  std::string auth_env = "CAUSALIGN_API_KEY";
  std::string cache_dir;
  double timeout_s = 30.0;
  int retries = 2;
};

void validate(const EnhancerSpec& s);
nlohmann::json to_json(const EnhancerSpec& s);
EnhancerSpec enhancer_spec_from_json(const nlohmann::json& j);

std::vector<std::string> tokenize(const std::string& text);

class Enhancer {
 public:
  virtual ~Enhancer() = default;
  virtual int dim() const = 0;
  // Sequence of prompt tokens followed by payload tokens.
  virtual TokenFeatureSequence encode(const NodePayload& payload, const std::string& prompt,
                                      int prompt_id = 0) = 0;
};

class MockEnhancer final : public Enhancer {
 public:
  explicit MockEnhancer(const EnhancerSpec& spec);
  int dim() const override { return spec_.dim; }
  TokenFeatureSequence encode(const NodePayload& payload, const std::string& prompt, int prompt_id = 0) override;
  // Unit direction carrying the class signal.
  ad::Matrix class_direction(int cls) const;
  // 1-based token index that receives the peak class signal in a sequence of n.
  static ad::Index signal_index(ad::Index n, double relative_position);

 private:
  EnhancerSpec spec_;
  std::vector<ad::Matrix> class_dirs_;
};

// JSON over HTTP: POST {"texts": [text], "prompt": p} -> {"embeddings": [[...], ...]}
// with one vector per token. Responses are cached as <sha256(request)>.json
// holding the raw response body.
class RemoteEnhancer final : public Enhancer {
 public:
  explicit RemoteEnhancer(const EnhancerSpec& spec);
  int dim() const override { return spec_.dim; }
  TokenFeatureSequence encode(const NodePayload& payload, const std::string& prompt, int prompt_id = 0) override;
  // Raw response body for a request, from cache or network.
  std::string fetch(const std::string& request_body);
  std::size_t network_calls() const { return network_calls_; }

 private:
  std::optional<std::string> read_cache(const std::string& key) const;
  void write_cache(const std::string& key, const std::string& body);

  EnhancerSpec spec_;
  std::mutex cache_mu_;
  std::mutex inflight_mu_;
  std::map<std::string, std::shared_future<std::string>> inflight_;
  std::atomic<std::size_t> network_calls_{0};
};

std::unique_ptr<Enhancer> make_enhancer(const EnhancerSpec& spec);
TokenFeatureSequence encode(const EnhancerSpec& spec, const NodePayload& payload, const std::string& prompt);

// 1-based index clamp(ceil(p * n / 10), 1, n); p must lie in [1, 10].
ad::Index relative_position_index(ad::Index n, int p);
// The token row at that index (1 x d).
ad::Matrix select_relative_position(const TokenFeatureSequence& x, int p);

// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& data);

// POST a JSON body and return the response body. Throws RemoteError on
// transport failure, non-2xx status, or a missing credential.
std::string post_json(const std::string& endpoint, const std::string& body, const std::string& auth_env,
                      double timeout_s, int retries);

}  // namespace causalign::enhancer
