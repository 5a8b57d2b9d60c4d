#include <algorithm>
#include <map>

#include "causalign/causal.hpp"
#include "causalign/errors.hpp"

namespace causalign::causal {

CausalModel::CausalModel(std::string name, std::vector<VariableSpec> variables,
                         const std::string& output)
    : name_(std::move(name)), vars_(std::move(variables)) {
  std::map<std::string, int, std::less<>> ids;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i].domain < 1) throw InvalidParams(name_ + ": variable '" + vars_[i].name + "' has an empty domain");
    if (!vars_[i].equation) throw InvalidParams(name_ + ": variable '" + vars_[i].name + "' has no equation");
    if (!ids.emplace(vars_[i].name, static_cast<int>(i)).second)
      throw InvalidParams(name_ + ": duplicate variable '" + vars_[i].name + "'");
  }
  parents_.resize(vars_.size());
  for (std::size_t i = 0; i < vars_.size(); ++i)
    for (const auto& p : vars_[i].parents) {
      auto it = ids.find(p);
      if (it == ids.end())
        throw InvalidParams(name_ + ": '" + vars_[i].name + "' lists unknown parent '" + p + "'");
      parents_[i].push_back(it->second);
    }
  auto out = ids.find(output);
  if (out == ids.end()) throw InvalidParams(name_ + ": unknown output variable '" + output + "'");
  output_ = out->second;

  // Kahn's algorithm, taking the lowest ready index first so the order is
  // stable with respect to declaration order.
  const std::size_t n = vars_.size();
  std::vector<int> pending(n, 0);
  std::vector<std::vector<int>> children(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int p : parents_[i]) {
      ++pending[i];
      children[p].push_back(static_cast<int>(i));
    }
  std::vector<char> done(n, 0);
  while (order_.size() < n) {
    int next = -1;
    for (std::size_t i = 0; i < n && next < 0; ++i)
      if (!done[i] && pending[i] == 0) next = static_cast<int>(i);
    if (next < 0) throw InvalidParams(name_ + ": variables form a cycle");
    done[next] = 1;
    order_.push_back(next);
    for (int c : children[next]) --pending[c];
  }
}

int CausalModel::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].name == name) return static_cast<int>(i);
  throw InvalidParams(name_ + ": no variable named '" + std::string(name) + "'");
}

bool CausalModel::contains(std::string_view name) const {
  return std::any_of(vars_.begin(), vars_.end(), [&](const VariableSpec& v) { return v.name == name; });
}

std::vector<bool> CausalModel::descendants(std::span<const int> roots) const {
  std::vector<bool> reached(vars_.size(), false);
  std::vector<bool> is_root(vars_.size(), false);
  for (int r : roots) is_root[r] = true;
  for (int v : order_)
    for (int p : parents_[v])
      if (is_root[p] || reached[p]) reached[v] = true;
  return reached;
}

Value CausalModel::compute(int v, std::span<const Value> parent_values, const AttributedGraph& g) const {
  const Value out = vars_[v].equation(parent_values, g);
  if (out < 0 || out >= vars_[v].domain)
    throw GraphStructureError(name_ + ": '" + vars_[v].name + "' evaluated to " + std::to_string(out) +
                              " outside its domain [0," + std::to_string(vars_[v].domain) + ")");
  return out;
}

HighVariableSet::HighVariableSet(const CausalModel& m, std::vector<std::string> names)
    : names_(std::move(names)) {
  if (names_.empty()) throw InvalidParams("intervention set is empty");
  for (const auto& n : names_) {
    const int id = m.index_of(n);
    if (id == m.output()) throw InvalidParams("intervention set contains the output variable '" + n + "'");
    if (std::find(indices_.begin(), indices_.end(), id) != indices_.end())
      throw InvalidParams("intervention set lists '" + n + "' twice");
    indices_.push_back(id);
  }
}

std::string HighVariableSet::label() const {
  std::string s;
  for (const auto& n : names_) s += (s.empty() ? "" : "+") + n;
  return s;
}

namespace {

Value compute_in_trace(const CausalModel& m, int v, const std::vector<Value>& values,
                       const AttributedGraph& g) {
  Value buf[16];
  std::vector<Value> heap;
  const auto& ps = m.parents(v);
  std::span<Value> args;
  if (ps.size() <= std::size(buf)) {
    args = std::span<Value>(buf, ps.size());
  } else {
    heap.resize(ps.size());
    args = heap;
  }
  for (std::size_t i = 0; i < ps.size(); ++i) args[i] = values[ps[i]];
  return m.compute(v, args, g);
}

}  // namespace

CausalTrace evaluate(const CausalModel& m, const AttributedGraph& g) {
  CausalTrace t;
  t.input_id = g.id;
  t.values.assign(m.size(), 0);
  for (int v : m.topo_order()) t.values[v] = compute_in_trace(m, v, t.values, g);
  return t;
}

CausalTrace intervene_trace(const CausalModel& m, const AttributedGraph& g_orig,
                            const CausalTrace& orig, const CausalTrace& donor,
                            const HighVariableSet& zh) {
  CausalTrace t = orig;
  std::vector<bool> pinned(m.size(), false);
  for (int v : zh.indices()) {
    t.values[v] = donor.values[v];
    pinned[v] = true;
  }
  const auto below = m.descendants(zh.indices());
  for (int v : m.topo_order())
    if (below[v] && !pinned[v]) t.values[v] = compute_in_trace(m, v, t.values, g_orig);
  return t;
}

Value intervene_high(const CausalModel& m, const AttributedGraph& g_orig,
                     const AttributedGraph& g_diff, const HighVariableSet& zh) {
  const CausalTrace orig = evaluate(m, g_orig);
  const CausalTrace donor = evaluate(m, g_diff);
  return intervene_trace(m, g_orig, orig, donor, zh).output(m);
}

PairList changed_pairs(const CausalModel& m, std::span<const AttributedGraph> dataset,
                       std::span<const CausalTrace> traces, const HighVariableSet& zh) {
  if (traces.size() != dataset.size()) throw InvalidParams("changed_pairs: one trace per sample is required");
  PairList out;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    for (std::size_t j = 0; j < dataset.size(); ++j) {
      if (i == j) continue;
      const Value y = intervene_trace(m, dataset[i], traces[i], traces[j], zh).output(m);
      if (y != traces[i].output(m)) out.emplace_back(i, j);
    }
  return out;
}

PairList changed_pairs(const CausalModel& m, std::span<const AttributedGraph> dataset,
                       const HighVariableSet& zh) {
  std::vector<CausalTrace> traces;
  traces.reserve(dataset.size());
  for (const auto& g : dataset) traces.push_back(evaluate(m, g));
  return changed_pairs(m, dataset, traces, zh);
}

}  // namespace causalign::causal
