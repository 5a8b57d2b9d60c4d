#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "causalign/errors.hpp"
#include "causalign/intervene.hpp"
#include "causalign/json_util.hpp"

namespace causalign::intervene {

using nlohmann::json;

json to_json(const SweepConfig& c) {
  return {{"variables", c.variables}, {"layers", c.layers}, {"pair_cap", c.pair_cap}, {"seed", c.seed}};
}

SweepConfig sweep_config_from_json(const json& j) {
  const std::string w = "sweep";
  check_keys(j, {"variables", "layers", "pair_cap", "seed"}, w);
  SweepConfig c;
  read_opt(j, "variables", c.variables, w);
  read_opt(j, "layers", c.layers, w);
  read_opt(j, "pair_cap", c.pair_cap, w);
  read_opt(j, "seed", c.seed, w);
  return c;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, v != 0.0 && std::abs(v) < 1e-3 ? "%.1e" : "%.3f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

json to_json(const AlignmentGrid& g) {
  json rows = json::array();
  for (std::size_t r = 0; r < g.variables.size(); ++r) {
    json cells = json::array();
    for (const auto& c : g.cells[r]) cells.push_back(c ? json(*c) : json(nullptr));
    const auto am = g.argmin(r);
    rows.push_back({{"variable", g.variables[r]},
                    {"cells", cells},
                    {"sites", g.sites[r]},
                    {"skipped", g.skipped[r]},
                    {"pairs", g.pair_count[r]},
                    {"changed_pairs", g.changed_count[r]},
                    {"argmin_layer", am ? json(g.layers[*am]) : json(nullptr)}});
  }
  return {{"layers", g.layers}, {"rows", rows}, {"metadata", g.metadata}};
}

AlignmentGrid alignment_grid_from_json(const json& j) {
  try {
    AlignmentGrid g;
    g.layers = j.at("layers").get<std::vector<int>>();
    g.metadata = j.value("metadata", json::object());
    for (const auto& row : j.at("rows")) {
      g.variables.push_back(row.at("variable").get<std::string>());
      auto& cells = g.cells.emplace_back();
      for (const auto& c : row.at("cells")) cells.push_back(c.is_null() ? std::nullopt : std::optional(c.get<double>()));
      g.sites.push_back(row.at("sites").get<std::vector<std::string>>());
      g.skipped.push_back(row.at("skipped").get<std::vector<std::size_t>>());
      g.pair_count.push_back(row.at("pairs").get<std::size_t>());
      g.changed_count.push_back(row.at("changed_pairs").get<std::size_t>());
      if (cells.size() != g.layers.size()) throw IoError("alignment grid row '" + g.variables.back() + "' is ragged");
    }
    return g;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed alignment grid: ") + e.what());
  }
}

std::string to_csv(const AlignmentGrid& g) {
  std::ostringstream s;
  s << "variable";
  for (int l : g.layers) s << ",layer" << l;
  s << ",argmin_layer,pairs\n";
  for (std::size_t r = 0; r < g.variables.size(); ++r) {
    s << g.variables[r];
    for (const auto& c : g.cells[r]) s << ',' << (c ? fmt(*c) : "");
    const auto am = g.argmin_layer(r);
    s << ',' << (am ? std::to_string(*am) : "") << ',' << g.pair_count[r] << '\n';
  }
  return s.str();
}

std::string to_svg(const AlignmentGrid& g) {
  constexpr int cell_w = 76, cell_h = 34, left = 90, top = 30;
  const int w = left + cell_w * static_cast<int>(g.layers.size()) + 10;
  const int h = top + cell_h * static_cast<int>(g.variables.size()) + 10;
  double hi = 0.0;
  for (const auto& row : g.cells)
    for (const auto& c : row)
      if (c) hi = std::max(hi, *c);

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t c = 0; c < g.layers.size(); ++c)
    s << "<text x=\"" << left + cell_w * static_cast<int>(c) + cell_w / 2 << "\" y=\"" << top - 10
      << "\" text-anchor=\"middle\">layer " << g.layers[c] << "</text>\n";
  for (std::size_t r = 0; r < g.variables.size(); ++r) {
    const int y = top + cell_h * static_cast<int>(r);
    s << "<text x=\"" << left - 8 << "\" y=\"" << y + cell_h / 2 + 4 << "\" text-anchor=\"end\">"
      << xml_escape(g.variables[r]) << "</text>\n";
    const auto am = g.argmin(r);
    for (std::size_t c = 0; c < g.layers.size(); ++c) {
      const int x = left + cell_w * static_cast<int>(c);
      const auto& v = g.cells[r][c];
      std::string fill = "#dddddd";
      if (v) {
        // white (low) to dark blue (high)
        const double t = hi > 0 ? std::clamp(*v / hi, 0.0, 1.0) : 0.0;
        char buf[16];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(255 - 200 * t),
                      static_cast<int>(255 - 170 * t), static_cast<int>(255 - 80 * t));
        fill = buf;
      }
      s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_w << "\" height=\"" << cell_h
        << "\" fill=\"" << fill << "\" stroke=\"#ffffff\"/>\n";
      s << "<text x=\"" << x + cell_w / 2 << "\" y=\"" << y + cell_h / 2 + 4 << "\" text-anchor=\"middle\">"
        << (v ? fmt_short(*v) : "n/a") << "</text>\n";
      if (am && *am == c)
        s << "<rect class=\"argmin\" x=\"" << x + 2 << "\" y=\"" << y + 2 << "\" width=\"" << cell_w - 4
          << "\" height=\"" << cell_h - 4 << "\" fill=\"none\" stroke=\"#1a9e3a\" stroke-width=\"4\"/>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

void write_grid(const AlignmentGrid& g, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  const auto put = [&](const std::string& ext, const std::string& body) {
    const auto path = dir / (stem + ext);
    std::ofstream f(path, std::ios::binary);
    f << body;
    if (!f) throw IoError("cannot write " + path.string());
  };
  put(".json", to_json(g).dump(2) + "\n");
  put(".csv", to_csv(g));
  put(".svg", to_svg(g));
}

}  // namespace causalign::intervene
