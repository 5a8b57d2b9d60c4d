#include "causalign/enhancer.hpp"
#include "causalign/errors.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace causalign::enhancer {

using nlohmann::json;

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("crypto", "SHA-256 computation failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string post_json(const std::string& endpoint, const std::string& body, const std::string& auth_env,
                      double timeout_s, int retries) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) throw RemoteError("endpoint '" + endpoint + "' has no scheme");
  const auto path_start = endpoint.find('/', scheme_end + 3);
  const std::string origin = endpoint.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : endpoint.substr(path_start);

  httplib::Headers headers;
  if (!auth_env.empty()) {
    const char* key = std::getenv(auth_env.c_str());
    if (key == nullptr || *key == '\0')
      throw RemoteError("credential environment variable '" + auth_env + "' is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  httplib::Client client(origin);
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  std::string last_error;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403)
      throw RemoteError(endpoint + ": authentication rejected (HTTP " + std::to_string(res->status) + ")");
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300)
      throw RemoteError(endpoint + ": HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    return res->body;
  }
  throw RemoteError(endpoint + ": " + last_error + " after " + std::to_string(retries + 1) + " attempt(s)");
}

RemoteEnhancer::RemoteEnhancer(const EnhancerSpec& spec) : spec_(spec) {
  if (spec_.kind != EnhancerKind::Remote) throw InvalidParams("RemoteEnhancer needs a remote spec");
  validate(spec_);
  if (!spec_.cache_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(spec_.cache_dir, ec);
    if (ec) throw IoError("cannot create cache directory " + spec_.cache_dir + ": " + ec.message());
  }
}

std::optional<std::string> RemoteEnhancer::read_cache(const std::string& key) const {
  if (spec_.cache_dir.empty()) return std::nullopt;
  std::ifstream in(std::filesystem::path(spec_.cache_dir) / (key + ".json"), std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void RemoteEnhancer::write_cache(const std::string& key, const std::string& body) {
  if (spec_.cache_dir.empty()) return;
  std::lock_guard lock(cache_mu_);
  const auto final_path = std::filesystem::path(spec_.cache_dir) / (key + ".json");
  const auto tmp = final_path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write cache file " + tmp);
    out << body;
    if (!out) throw IoError("write failed for cache file " + tmp);
  }
  std::filesystem::rename(tmp, final_path);
}

std::string RemoteEnhancer::fetch(const std::string& request_body) {
  const std::string key = sha256_hex(request_body);
  if (auto hit = read_cache(key)) return *hit;

  std::promise<std::string> promise;
  {
    std::unique_lock lock(inflight_mu_);
    auto it = inflight_.find(key);
    if (it != inflight_.end()) {
      auto fut = it->second;
      lock.unlock();
      return fut.get();
    }
    inflight_.emplace(key, promise.get_future().share());
  }
  const auto finish = [&] {
    std::lock_guard lock(inflight_mu_);
    inflight_.erase(key);
  };
  try {
    network_calls_.fetch_add(1);
    std::string body = post_json(spec_.endpoint, request_body, spec_.auth_env, spec_.timeout_s, spec_.retries);
    write_cache(key, body);
    promise.set_value(body);
    finish();
    return body;
  } catch (...) {
    promise.set_exception(std::current_exception());
    finish();
    throw;
  }
}

TokenFeatureSequence RemoteEnhancer::encode(const NodePayload& payload, const std::string& prompt, int prompt_id) {
  if (payload.tokens.empty()) throw InvalidParams("enhancer: payload has no tokens");
  std::string text;
  for (const auto& t : payload.tokens) text += (text.empty() ? "" : " ") + t;
  const std::string request = json{{"texts", {text}}, {"prompt", prompt}}.dump();
  const std::string body = fetch(request);

  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw RemoteError(spec_.endpoint + ": response is not JSON: " + e.what());
  }
  if (!j.contains("embeddings") || !j.at("embeddings").is_array() || j.at("embeddings").empty())
    throw RemoteError(spec_.endpoint + ": response has no embeddings");
  const auto& rows = j.at("embeddings");
  TokenFeatureSequence out;
  out.prompt_id = prompt_id;
  out.tokens.resize(static_cast<ad::Index>(rows.size()), spec_.dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!rows[r].is_array() || static_cast<int>(rows[r].size()) != spec_.dim)
      throw RemoteError(spec_.endpoint + ": embedding " + std::to_string(r) + " does not have dimension " +
                        std::to_string(spec_.dim));
    for (int c = 0; c < spec_.dim; ++c) {
      if (!rows[r][c].is_number()) throw RemoteError(spec_.endpoint + ": embedding value is not a number");
      const double v = rows[r][c].get<double>();
      if (!std::isfinite(v)) throw RemoteError(spec_.endpoint + ": embedding value is not finite");
      out.tokens(static_cast<ad::Index>(r), c) = v;
    }
  }
  return out;
}

}  // namespace causalign::enhancer
