#include <algorithm>
#include <map>
#include <set>

#include "causalign/errors.hpp"
#include "causalign/gnn.hpp"

namespace causalign::gnn {

void LayeredModel::check_patches(std::span<const PatchRegion> patches, ad::Index num_nodes) const {
  std::set<std::tuple<int, ad::Index, ad::Index>> cells;
  for (const auto& p : patches) {
    const std::string where = "patch at layer " + std::to_string(p.layer);
    if (p.layer < 0 || p.layer > num_layers())
      throw PatchError(where + ": layer outside [0, " + std::to_string(num_layers()) + "]");
    const ad::Index width = layer_width(p.layer);
    if (p.col_begin < 0 || p.col_end > width || p.col_begin >= p.col_end)
      throw PatchError(where + ": columns [" + std::to_string(p.col_begin) + ", " + std::to_string(p.col_end) +
                       ") outside width " + std::to_string(width));
    if (p.rows.empty()) throw PatchError(where + ": no rows");
    if (p.values.rows() != static_cast<ad::Index>(p.rows.size()) || p.values.cols() != p.col_end - p.col_begin)
      throw PatchError(where + ": values " + ad::shape_of(p.values).str() + " do not match the region");
    for (ad::Index r : p.rows) {
      if (r < 0 || r >= num_nodes) throw PatchError(where + ": row " + std::to_string(r) + " out of range");
      for (ad::Index c = p.col_begin; c < p.col_end; ++c)
        if (!cells.emplace(p.layer, r, c).second)
          throw PatchError(where + ": overlaps another patch at node " + std::to_string(r) + ", dim " +
                           std::to_string(c));
    }
  }
}

std::string NodeRef::str() const {
  switch (kind) {
    case Kind::Absolute: return "node" + std::to_string(id);
    case Kind::Role: return "role" + std::to_string(role.group) + "." + std::to_string(role.index);
    case Kind::Group: return "group" + std::to_string(group);
    case Kind::All: return "all";
  }
  return "?";
}

std::string ActivationSite::str() const {
  std::string s = "L" + std::to_string(layer) + "[";
  for (std::size_t i = 0; i < nodes.size(); ++i) s += (i ? "," : "") + nodes[i].str();
  s += "]";
  if (dims) s += "{" + std::to_string(dims->begin) + ":" + std::to_string(dims->end) + "}";
  return s;
}

namespace {

std::map<int, int> group_members(const AttributedGraph& g, int group) {
  std::map<int, int> by_index;
  for (int u = 0; u < static_cast<int>(g.roles.size()); ++u)
    if (g.roles[u].group == group) by_index.emplace(g.roles[u].index, u);
  return by_index;
}

}  // namespace

NodeMatch match_nodes(std::span<const NodeRef> refs, const AttributedGraph& orig, const AttributedGraph& donor) {
  NodeMatch m;
  std::set<ad::Index> seen;
  const auto push = [&](int o, int d) {
    if (seen.insert(o).second) {
      m.orig.push_back(o);
      m.donor.push_back(d);
    }
  };
  const auto same_size = [&](const char* what) {
    if (orig.num_nodes != donor.num_nodes)
      throw NodeCorrespondenceError(std::string(what) + " site across graphs with " +
                                    std::to_string(orig.num_nodes) + " and " + std::to_string(donor.num_nodes) +
                                    " nodes");
  };
  for (const auto& r : refs) {
    switch (r.kind) {
      case NodeRef::Kind::Absolute:
        same_size("absolute-id");
        if (r.id < 0 || r.id >= orig.num_nodes)
          throw NodeCorrespondenceError("node " + std::to_string(r.id) + " does not exist");
        push(r.id, r.id);
        break;
      case NodeRef::Kind::All:
        same_size("all-node");
        for (int u = 0; u < orig.num_nodes; ++u) push(u, u);
        break;
      case NodeRef::Kind::Role: {
        const auto o = find_role(orig, r.role);
        const auto d = find_role(donor, r.role);
        if (!o || !d)
          throw NodeCorrespondenceError("role " + r.str() + " missing in " + (!o ? orig.id : donor.id));
        push(*o, *d);
        break;
      }
      case NodeRef::Kind::Group: {
        const auto o = group_members(orig, r.group);
        const auto d = group_members(donor, r.group);
        for (const auto& [index, u] : o)
          if (auto it = d.find(index); it != d.end()) push(u, it->second);
        break;
      }
    }
  }
  if (m.orig.empty())
    throw NodeCorrespondenceError("no corresponding nodes between " + orig.id + " and " + donor.id);
  return m;
}

PatchRegion make_patch(const LayeredModel& f, const ActivationSite& site, const NodeMatch& match,
                       const ForwardRecord& donor) {
  if (site.layer < 0 || site.layer > f.num_layers())
    throw PatchError("site layer " + std::to_string(site.layer) + " outside the model");
  const ad::Index width = f.layer_width(site.layer);
  PatchRegion p;
  p.layer = site.layer;
  p.col_begin = site.dims ? site.dims->begin : 0;
  p.col_end = site.dims ? site.dims->end : width;
  if (p.col_begin < 0 || p.col_end > width || p.col_begin >= p.col_end)
    throw PatchError("site " + site.str() + ": dims outside layer width " + std::to_string(width));
  p.rows = match.orig;
  const ad::Matrix& src = donor.layers.at(static_cast<std::size_t>(site.layer));
  p.values.resize(static_cast<ad::Index>(match.donor.size()), p.col_end - p.col_begin);
  for (std::size_t i = 0; i < match.donor.size(); ++i)
    p.values.row(static_cast<ad::Index>(i)) = src.row(match.donor[i]).segment(p.col_begin, p.col_end - p.col_begin);
  return p;
}

}  // namespace causalign::gnn
