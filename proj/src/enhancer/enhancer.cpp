#include "causalign/enhancer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "causalign/errors.hpp"
#include "causalign/json_util.hpp"
#include "causalign/rng.hpp"

namespace causalign::enhancer {

using nlohmann::json;

void validate(const EnhancerSpec& s) {
  if (s.dim < 1) throw InvalidParams("enhancer: dim must be >= 1");
  if (s.kind == EnhancerKind::Mock) {
    if (!s.seed) throw InvalidParams("enhancer: the mock encoder requires a seed");
    if (!(s.informative_position > 0.0 && s.informative_position <= 1.0))
      throw InvalidParams("enhancer: informative_position must lie in (0, 1]");
    if (!(s.signal >= 0.0)) throw InvalidParams("enhancer: signal must be >= 0");
    if (!(s.signal_width > 0.0)) throw InvalidParams("enhancer: signal_width must be > 0");
  } else {
    if (s.endpoint.empty()) throw InvalidParams("enhancer: the remote encoder requires an endpoint");
    if (s.endpoint.rfind("http://", 0) != 0 && s.endpoint.rfind("https://", 0) != 0)
      throw InvalidParams("enhancer: endpoint must start with http:// or https://");
    if (!(s.timeout_s > 0.0)) throw InvalidParams("enhancer: timeout_s must be > 0");
    if (s.retries < 0) throw InvalidParams("enhancer: retries must be >= 0");
  }
}

json to_json(const EnhancerSpec& s) {
  json j = {{"kind", s.kind == EnhancerKind::Mock ? "mock" : "remote"},
            {"dim", s.dim},
            {"informative_position", s.informative_position},
            {"signal", s.signal},
            {"signal_width", s.signal_width},
            {"endpoint", s.endpoint},
            {"auth_env", s.auth_env},
            {"cache_dir", s.cache_dir},
            {"timeout_s", s.timeout_s},
            {"retries", s.retries}};
  j["seed"] = s.seed ? json(*s.seed) : json(nullptr);
  return j;
}

EnhancerSpec enhancer_spec_from_json(const json& j) {
  const std::string w = "enhancer";
  check_keys(j,
             {"kind", "dim", "seed", "informative_position", "signal", "signal_width", "endpoint", "auth_env",
              "cache_dir", "timeout_s", "retries", "position"},
             w);
  EnhancerSpec s;
  std::string kind = "mock";
  read_opt(j, "kind", kind, w);
  if (kind == "mock") s.kind = EnhancerKind::Mock;
  else if (kind == "remote") s.kind = EnhancerKind::Remote;
  else throw ConfigError(w + ".kind: expected 'mock' or 'remote', got '" + kind + "'");
  read_opt(j, "dim", s.dim, w);
  if (j.contains("seed") && !j.at("seed").is_null()) s.seed = j.at("seed").get<std::uint64_t>();
  read_opt(j, "informative_position", s.informative_position, w);
  read_opt(j, "signal", s.signal, w);
  read_opt(j, "signal_width", s.signal_width, w);
  read_opt(j, "endpoint", s.endpoint, w);
  read_opt(j, "auth_env", s.auth_env, w);
  read_opt(j, "cache_dir", s.cache_dir, w);
  read_opt(j, "timeout_s", s.timeout_s, w);
  read_opt(j, "retries", s.retries, w);
  return s;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

// ---- mock ---------------------------------------------------------------------

namespace {

ad::Matrix unit_gaussian(Rng& rng, int dim) {
  ad::Matrix v(1, dim);
  for (int i = 0; i < dim; ++i) v(0, i) = rng.normal();
  return v / v.norm();
}

}  // namespace

MockEnhancer::MockEnhancer(const EnhancerSpec& spec) : spec_(spec) {
  if (spec_.kind != EnhancerKind::Mock) throw InvalidParams("MockEnhancer needs a mock spec");
  validate(spec_);
  for (int c = 0; c < 16; ++c) {
    Rng rng(*spec_.seed, "class_direction", static_cast<std::uint64_t>(c));
    class_dirs_.push_back(unit_gaussian(rng, spec_.dim));
  }
}

ad::Matrix MockEnhancer::class_direction(int cls) const {
  if (cls < 0 || cls >= static_cast<int>(class_dirs_.size()))
    throw InvalidParams("mock enhancer: class " + std::to_string(cls) + " has no direction");
  return class_dirs_[cls];
}

ad::Index MockEnhancer::signal_index(ad::Index n, double relative_position) {
  const auto j = static_cast<ad::Index>(std::ceil(relative_position * static_cast<double>(n) - 1e-9));
  return std::clamp<ad::Index>(j, 1, n);
}

TokenFeatureSequence MockEnhancer::encode(const NodePayload& payload, const std::string& prompt, int prompt_id) {
  if (payload.tokens.empty()) throw InvalidParams("enhancer: payload has no tokens");
  std::vector<std::string> seq = tokenize(prompt);
  seq.insert(seq.end(), payload.tokens.begin(), payload.tokens.end());
  const auto n = static_cast<ad::Index>(seq.size());
  const ad::Index peak = signal_index(n, spec_.informative_position);
  TokenFeatureSequence out;
  out.prompt_id = prompt_id;
  out.tokens.resize(n, spec_.dim);
  for (ad::Index j = 1; j <= n; ++j) {
    Rng rng(*spec_.seed, seq[j - 1], static_cast<std::uint64_t>(j));
    ad::Matrix v = unit_gaussian(rng, spec_.dim);
    if (payload.class_hint >= 0) {
      const double w = spec_.signal * std::exp(-std::abs(static_cast<double>(j - peak)) / spec_.signal_width);
      v += w * class_direction(payload.class_hint);
    }
    out.tokens.row(j - 1) = v / v.norm();
  }
  return out;
}

// ---- selection ----------------------------------------------------------------

ad::Index relative_position_index(ad::Index n, int p) {
  if (p < 1 || p > 10) throw InvalidParams("relative position p must lie in [1, 10], got " + std::to_string(p));
  if (n < 1) throw InvalidParams("relative position: sequence is empty");
  return std::clamp<ad::Index>((p * n + 9) / 10, 1, n);
}

ad::Matrix select_relative_position(const TokenFeatureSequence& x, int p) {
  return x.tokens.row(relative_position_index(x.size(), p) - 1);
}

std::unique_ptr<Enhancer> make_enhancer(const EnhancerSpec& spec) {
  validate(spec);
  if (spec.kind == EnhancerKind::Mock) return std::make_unique<MockEnhancer>(spec);
  return std::make_unique<RemoteEnhancer>(spec);
}

TokenFeatureSequence encode(const EnhancerSpec& spec, const NodePayload& payload, const std::string& prompt) {
  return make_enhancer(spec)->encode(payload, prompt);
}

}  // namespace causalign::enhancer
