#include <algorithm>
#include <set>

#include "causalign/at.hpp"
#include "causalign/errors.hpp"
#include "causalign/json_util.hpp"
#include "causalign/rng.hpp"

namespace causalign::at {

using nlohmann::json;

std::vector<ad::Index> select_indices(ad::Index n, ad::Index m, IndexRule rule) {
  if (n < 1 || m < 1) throw InvalidParams("select_indices: n and m must be >= 1");
  std::vector<ad::Index> out;
  out.reserve(static_cast<std::size_t>(m));
  for (ad::Index i = 1; i <= m; ++i) {
    ad::Index j = (i * n) / m;  // floor for non-negative integers
    if (rule == IndexRule::Literal) j = std::min<ad::Index>(j, 1);
    out.push_back(std::clamp<ad::Index>(j, 1, n));
  }
  return out;
}

// ---- config ---------------------------------------------------------------------------

void validate(const AtConfig& c) {
  if (c.q < 1) throw InvalidParams("at: q must be >= 1");
  if (c.m < 1) throw InvalidParams("at: m must be >= 1");
  if (c.delta < 0) throw InvalidParams("at: delta must be >= 0");
  if (c.encoder.layers < 1) throw InvalidParams("at.encoder: layers must be >= 1");
  if (c.encoder.width < 1) throw InvalidParams("at.encoder: width must be >= 1");
  if (c.encoder.heads != 1) throw InvalidParams("at.encoder: only single-head attention is supported");
  if (!c.prompts.empty() && static_cast<int>(c.prompts.size()) != c.q)
    throw InvalidParams("at: " + std::to_string(c.prompts.size()) + " prompts given for q = " + std::to_string(c.q));
  if (c.source.kind == PromptSource::Kind::Remote && c.prompts.empty() && c.source.endpoint.empty())
    throw InvalidParams("at.prompt_source: the remote generator requires an endpoint");
}

namespace {

json source_json(const PromptSource& s) {
  return {{"kind", s.kind == PromptSource::Kind::Mock ? "mock" : "remote"},
          {"seed", s.seed},
          {"endpoint", s.endpoint},
          {"auth_env", s.auth_env},
          {"timeout_s", s.timeout_s},
          {"retries", s.retries}};
}

PromptSource source_from(const json& j) {
  const std::string w = "at.prompt_source";
  check_keys(j, {"kind", "seed", "endpoint", "auth_env", "timeout_s", "retries"}, w);
  PromptSource s;
  std::string kind = "mock";
  read_opt(j, "kind", kind, w);
  if (kind == "mock") s.kind = PromptSource::Kind::Mock;
  else if (kind == "remote") s.kind = PromptSource::Kind::Remote;
  else throw ConfigError(w + ".kind: expected 'mock' or 'remote', got '" + kind + "'");
  read_opt(j, "seed", s.seed, w);
  read_opt(j, "endpoint", s.endpoint, w);
  read_opt(j, "auth_env", s.auth_env, w);
  read_opt(j, "timeout_s", s.timeout_s, w);
  read_opt(j, "retries", s.retries, w);
  return s;
}

}  // namespace

json to_json(const AtConfig& c) {
  return {{"q", c.q},
          {"m", c.m},
          {"delta", c.delta},
          {"encoder", {{"layers", c.encoder.layers}, {"width", c.encoder.width}, {"heads", c.encoder.heads}}},
          {"index_rule", c.index_rule == IndexRule::Corrected ? "corrected" : "literal"},
          {"task_description", c.task_description},
          {"prompts", c.prompts},
          {"prompt_source", source_json(c.source)}};
}

AtConfig at_config_from_json(const json& j) {
  const std::string w = "at";
  check_keys(j, {"q", "m", "delta", "encoder", "index_rule", "task_description", "prompts", "prompt_source", "enabled"},
             w);
  AtConfig c;
  read_opt(j, "q", c.q, w);
  read_opt(j, "m", c.m, w);
  read_opt(j, "delta", c.delta, w);
  if (j.contains("encoder")) {
    const auto& e = j.at("encoder");
    check_keys(e, {"layers", "width", "heads"}, "at.encoder");
    read_opt(e, "layers", c.encoder.layers, "at.encoder");
    read_opt(e, "width", c.encoder.width, "at.encoder");
    read_opt(e, "heads", c.encoder.heads, "at.encoder");
  }
  std::string rule = "corrected";
  read_opt(j, "index_rule", rule, w);
  if (rule == "corrected") c.index_rule = IndexRule::Corrected;
  else if (rule == "literal") c.index_rule = IndexRule::Literal;
  else throw ConfigError(w + ".index_rule: expected 'corrected' or 'literal', got '" + rule + "'");
  read_opt(j, "task_description", c.task_description, w);
  read_opt(j, "prompts", c.prompts, w);
  if (j.contains("prompt_source")) c.source = source_from(j.at("prompt_source"));
  return c;
}

// ---- prompts ------------------------------------------------------------------------

std::string prompt_request(const std::string& task_description, int q) {
  return "We want to summarize " + task_description + ". Write " + std::to_string(q) +
         " distinct instructions, each to be placed in front of the text that needs summarizing. Reply with "
         "the instructions alone, without the text itself.";
}

namespace {

constexpr const char* kVerbs[] = {"summarize", "describe", "characterize", "outline",
                                  "explain",   "condense", "paraphrase",   "categorize"};
constexpr const char* kObjects[] = {"the following entry", "this item", "the text below",
                                    "the record that follows", "the given description", "this node content"};

}  // namespace

std::vector<std::string> gen_prompts(const PromptSource& source, const std::string& task_description, int q) {
  if (q < 1) throw InvalidParams("gen_prompts: q must be >= 1");
  if (source.kind == PromptSource::Kind::Mock) {
    std::vector<std::string> pool;
    for (const char* v : kVerbs)
      for (const char* o : kObjects) pool.push_back(std::string(v) + " " + o + " :");
    if (static_cast<std::size_t>(q) > pool.size())
      throw InvalidParams("gen_prompts: the mock generator offers at most " + std::to_string(pool.size()) + " prompts");
    Rng rng(source.seed, "prompts");
    rng.shuffle(pool);
    pool.resize(static_cast<std::size_t>(q));
    return pool;
  }

  const json request = {{"prompt", prompt_request(task_description, q)}, {"count", q}};
  const std::string body =
      enhancer::post_json(source.endpoint, request.dump(), source.auth_env, source.timeout_s, source.retries);
  std::vector<std::string> prompts;
  try {
    prompts = json::parse(body).at("prompts").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw RemoteError(std::string("prompt generator returned a malformed reply: ") + e.what());
  }
  if (static_cast<int>(prompts.size()) != q)
    throw RemoteError("prompt generator returned " + std::to_string(prompts.size()) + " prompts, expected " +
                      std::to_string(q));
  for (const auto& p : prompts)
    if (enhancer::tokenize(p).empty()) throw RemoteError("prompt generator returned an empty prompt");
  return prompts;
}

std::vector<std::string> resolve_prompts(const AtConfig& c) {
  validate(c);
  return c.prompts.empty() ? gen_prompts(c.source, c.task_description, c.q) : c.prompts;
}

}  // namespace causalign::at
