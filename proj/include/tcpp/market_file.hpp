/**
 * @file market_file.hpp
 * @brief JSON market documents: one file carries tree, model, assets, quotes,
 *        good-deal caps, constraint set and settings.
 *
 * Layout (all sections except "tree" optional):
 * @code
 * {
 *   "tree":   {"horizon": 1,
 *              "nodes": [{"id": 0, "parent": null}, {"id": 1, "parent": 0}, ...],
 *              "leaf_weights": [{"node": 1, "weight": 0.5}, ...]},
 *   "model":  {"menus": [{"node": 0, "entries": [{"kernel": [0.5, 0.5], "penalty": 0}]}]},
 *   "assets": [{"name": "S", "values": [1, 2, 0.5]}],
 *   "quotes": [{"name": "digital", "payoff": [{"node": 1, "value": 1}, ...], "bid": 0.1, "ask": 0.2}],
 *   "good_deal_caps": {"global": 1.2, "per_node": [{"node": 0, "cap": 1.5}]},
 *   "constraint_set": {"vertices": [[-1], [1]]}   or   {"facets": [{"normal": [1], "bound": 1}, ...]},
 *   "settings": {"check_tol": 1e-9, "max_enumeration": 1000000, "seed": 1}
 * }
 * @endcode
 * Errors carry the JSON pointer of the offending element.
 */
#pragma once

#include "tcpp/market.hpp"
#include "tcpp/scenario.hpp"
#include "tcpp/tree.hpp"

#include "json.hpp"

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace tcpp {

struct MarketSettings {
  std::optional<double> check_tol;
  std::optional<std::size_t> max_enumeration;
  std::optional<std::uint64_t> seed;
};

struct MarketFile {
  FiltrationTree tree;
  std::optional<ScenarioModel> model;
  Assets assets;
  std::vector<QuotedOption> quotes;
  std::optional<GoodDealCaps> caps;
  std::optional<ConstraintSet> constraints;
  MarketSettings settings;
};

namespace io {

using json = nlohmann::json;

[[noreturn]] inline void fail(Errc code, const std::string& path, const std::string& what) {
  throw Error(code, (path.empty() ? std::string("/") : path) + ": " + what);
}

inline const json& field(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) fail(Errc::parse_error, path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(Errc::parse_error, path, std::string("missing field '") + key + "'");
  return *it;
}

inline const json* optional_field(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(Errc::parse_error, path, "expected a number");
  return j.get<double>();
}

inline std::size_t index(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail(Errc::parse_error, path, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

inline const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) fail(Errc::parse_error, path, "expected an array");
  return j;
}

inline std::vector<double> numbers(const json& j, const std::string& path) {
  std::vector<double> out;
  for (std::size_t k = 0; k < array(j, path).size(); ++k) out.push_back(number(j[k], path + "/" + std::to_string(k)));
  return out;
}

/// Wraps library errors raised while building objects from a document element.
template <class F>
auto at_path(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == Errc::parse_error || e.code() == Errc::invariant_violation) throw;
    fail(Errc::invariant_violation, path, e.what());
  }
}

inline FiltrationTree parse_tree(const json& j) {
  const std::string path = "/tree";
  const auto& nodes = array(field(j, path, "nodes"), path + "/nodes");
  std::vector<std::optional<NodeId>> parents(nodes.size());
  std::vector<bool> seen(nodes.size(), false);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto p = path + "/nodes/" + std::to_string(k);
    const std::size_t id = index(field(nodes[k], p, "id"), p + "/id");
    if (id >= nodes.size() || seen[id])
      fail(Errc::invariant_violation, p + "/id", "node ids must be 0.." + std::to_string(nodes.size() - 1) + " without repeats");
    seen[id] = true;
    const auto& par = field(nodes[k], p, "parent");
    if (!par.is_null()) parents[id] = index(par, p + "/parent");
  }
  std::vector<std::pair<NodeId, double>> weights;
  const auto& lw = array(field(j, path, "leaf_weights"), path + "/leaf_weights");
  for (std::size_t k = 0; k < lw.size(); ++k) {
    const auto p = path + "/leaf_weights/" + std::to_string(k);
    weights.emplace_back(index(field(lw[k], p, "node"), p + "/node"), number(field(lw[k], p, "weight"), p + "/weight"));
  }
  auto tree = at_path(path, [&] { return FiltrationTree(std::move(parents), weights); });
  if (const auto* h = optional_field(j, "horizon"); h && index(*h, path + "/horizon") != tree.horizon())
    fail(Errc::invariant_violation, path + "/horizon",
         "declared horizon differs from the node list's depth " + std::to_string(tree.horizon()));
  return tree;
}

inline ScenarioModel parse_model(const json& j, const FiltrationTree& tree) {
  const std::string path = "/model";
  const auto& menus_j = array(field(j, path, "menus"), path + "/menus");
  std::vector<std::vector<MenuEntry>> menus(tree.size());
  for (std::size_t k = 0; k < menus_j.size(); ++k) {
    const auto p = path + "/menus/" + std::to_string(k);
    const NodeId v = index(field(menus_j[k], p, "node"), p + "/node");
    if (v >= tree.size()) fail(Errc::invariant_violation, p + "/node", "unknown node " + std::to_string(v));
    if (tree.is_leaf(v)) fail(Errc::invariant_violation, p + "/node", "node " + std::to_string(v) + " is a leaf");
    if (!menus[v].empty()) fail(Errc::invariant_violation, p + "/node", "second menu for node " + std::to_string(v));
    const auto& entries = array(field(menus_j[k], p, "entries"), p + "/entries");
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const auto pe = p + "/entries/" + std::to_string(e);
      MenuEntry entry{numbers(field(entries[e], pe, "kernel"), pe + "/kernel"), 0.0};
      if (const auto* pen = optional_field(entries[e], "penalty")) entry.penalty = number(*pen, pe + "/penalty");
      double sum = 0.0;
      for (double q : entry.kernel) sum += q;
      if (entry.kernel.size() != tree.children(v).size() || std::abs(sum - 1.0) > 1e-9 ||
          std::any_of(entry.kernel.begin(), entry.kernel.end(), [](double q) { return q < 0.0; })) {
        std::ostringstream os;
        os << "kernel at node " << v << " must be a probability vector over its " << tree.children(v).size()
           << " children (sums to " << sum << ")";
        fail(Errc::invariant_violation, pe + "/kernel", os.str());
      }
      menus[v].push_back(std::move(entry));
    }
  }
  for (NodeId v : tree.internal_nodes())
    if (menus[v].empty()) fail(Errc::invariant_violation, path + "/menus", "no menu for node " + std::to_string(v));
  return at_path(path, [&] { return ScenarioModel(tree, std::move(menus)); });
}

/// Claim given as [{"node": id, "value": x}, ...]; the nodes form its stopping time.
inline Claim parse_claim_nodes(const json& j, const FiltrationTree& tree, const std::string& path) {
  std::vector<std::pair<NodeId, double>> pairs;
  for (std::size_t k = 0; k < array(j, path).size(); ++k) {
    const auto p = path + "/" + std::to_string(k);
    pairs.emplace_back(index(field(j[k], p, "node"), p + "/node"), number(field(j[k], p, "value"), p + "/value"));
  }
  std::vector<NodeId> cut;
  for (const auto& pr : pairs) cut.push_back(pr.first);
  const auto st = at_path(path, [&] { return StoppingTime::from_cut(tree, cut); });
  if (st.size() != pairs.size()) fail(Errc::invariant_violation, path, "a node appears twice");
  std::vector<double> values(st.size());
  for (const auto& [v, x] : pairs) values[st.slot(v)] = x;
  return {st, std::move(values)};
}

inline json claim_nodes_json(const Claim& x) {
  json out = json::array();
  for (std::size_t k = 0; k < x.at.size(); ++k) out.push_back({{"node", x.at.cut()[k]}, {"value", x.values[k]}});
  return out;
}

inline Assets parse_assets(const json& j, const FiltrationTree& tree) {
  Assets out;
  for (std::size_t k = 0; k < array(j, "/assets").size(); ++k) {
    const auto p = "/assets/" + std::to_string(k);
    AssetProcess a;
    if (const auto* n = optional_field(j[k], "name")) {
      if (!n->is_string()) fail(Errc::parse_error, p + "/name", "expected a string");
      a.name = n->get<std::string>();
    }
    a.values = numbers(field(j[k], p, "values"), p + "/values");
    if (a.values.size() != tree.size())
      fail(Errc::invariant_violation, p + "/values", "expected one value per node (" + std::to_string(tree.size()) + ")");
    out.push_back(std::move(a));
  }
  return out;
}

inline std::vector<QuotedOption> parse_quotes(const json& j, const FiltrationTree& tree) {
  std::vector<QuotedOption> out;
  for (std::size_t k = 0; k < array(j, "/quotes").size(); ++k) {
    const auto p = "/quotes/" + std::to_string(k);
    QuotedOption q;
    if (const auto* n = optional_field(j[k], "name")) {
      if (!n->is_string()) fail(Errc::parse_error, p + "/name", "expected a string");
      q.name = n->get<std::string>();
    }
    q.payoff = parse_claim_nodes(field(j[k], p, "payoff"), tree, p + "/payoff");
    q.bid = number(field(j[k], p, "bid"), p + "/bid");
    q.ask = number(field(j[k], p, "ask"), p + "/ask");
    if (!(q.bid <= q.ask)) fail(Errc::invariant_violation, p, "bid above ask");
    out.push_back(std::move(q));
  }
  return out;
}

inline GoodDealCaps parse_caps(const json& j, const FiltrationTree& tree) {
  const std::string path = "/good_deal_caps";
  GoodDealCaps caps;
  if (const auto* g = optional_field(j, "global")) caps.global = number(*g, path + "/global");
  if (!(caps.global >= 1.0)) fail(Errc::invariant_violation, path + "/global", "cap must be at least 1");
  if (const auto* pn = optional_field(j, "per_node")) {
    caps.per_node.assign(tree.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < array(*pn, path + "/per_node").size(); ++k) {
      const auto p = path + "/per_node/" + std::to_string(k);
      const NodeId v = index(field((*pn)[k], p, "node"), p + "/node");
      if (v >= tree.size()) fail(Errc::invariant_violation, p + "/node", "unknown node");
      const double c = number(field((*pn)[k], p, "cap"), p + "/cap");
      if (!(c >= 1.0)) fail(Errc::invariant_violation, p + "/cap", "cap must be at least 1");
      caps.per_node[v] = c;
    }
  }
  return caps;
}

inline ConstraintSet parse_constraints(const json& j, std::size_t d) {
  const std::string path = "/constraint_set";
  ConstraintSet h;
  if (const auto* v = optional_field(j, "vertices")) {
    for (std::size_t k = 0; k < array(*v, path + "/vertices").size(); ++k)
      h.vertices.push_back(numbers((*v)[k], path + "/vertices/" + std::to_string(k)));
  } else if (const auto* f = optional_field(j, "facets")) {
    std::vector<std::vector<double>> a;
    std::vector<double> b;
    for (std::size_t k = 0; k < array(*f, path + "/facets").size(); ++k) {
      const auto p = path + "/facets/" + std::to_string(k);
      a.push_back(numbers(field((*f)[k], p, "normal"), p + "/normal"));
      b.push_back(number(field((*f)[k], p, "bound"), p + "/bound"));
    }
    h = at_path(path + "/facets", [&] { return ConstraintSet::from_facets(a, b); });
  } else {
    fail(Errc::parse_error, path, "expected 'vertices' or 'facets'");
  }
  if (h.vertices.empty()) fail(Errc::invariant_violation, path, "no vertices");
  for (std::size_t k = 0; k < h.vertices.size(); ++k)
    if (h.vertices[k].size() != d)
      fail(Errc::invariant_violation, path + "/vertices/" + std::to_string(k),
           "expected one weight per asset (" + std::to_string(d) + ")");
  return h;
}

inline MarketSettings parse_settings(const json& j) {
  const std::string path = "/settings";
  MarketSettings s;
  if (const auto* v = optional_field(j, "check_tol")) s.check_tol = number(*v, path + "/check_tol");
  if (const auto* v = optional_field(j, "max_enumeration")) s.max_enumeration = index(*v, path + "/max_enumeration");
  if (const auto* v = optional_field(j, "seed")) s.seed = index(*v, path + "/seed");
  return s;
}

/// Line and column of a byte offset, for parser diagnostics.
inline std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline json parse_json_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse_error, line_column(text, e.byte == 0 ? 0 : e.byte - 1) + ": malformed document");
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::parse_error, "cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace io

inline MarketFile market_from_json(const nlohmann::json& j) {
  using namespace io;
  if (!j.is_object()) fail(Errc::parse_error, "", "expected an object at the top level");
  MarketFile m{parse_tree(field(j, "", "tree")), std::nullopt, {}, {}, std::nullopt, std::nullopt, {}};
  if (const auto* v = optional_field(j, "model")) m.model = parse_model(*v, m.tree);
  if (const auto* v = optional_field(j, "assets")) m.assets = parse_assets(*v, m.tree);
  if (const auto* v = optional_field(j, "quotes")) m.quotes = parse_quotes(*v, m.tree);
  if (const auto* v = optional_field(j, "good_deal_caps")) m.caps = parse_caps(*v, m.tree);
  if (const auto* v = optional_field(j, "constraint_set")) m.constraints = parse_constraints(*v, m.assets.size());
  if (const auto* v = optional_field(j, "settings")) m.settings = parse_settings(*v);
  return m;
}

inline MarketFile parse_market_text(const std::string& text) { return market_from_json(io::parse_json_text(text)); }

inline MarketFile parse_market_file(const std::string& path) { return parse_market_text(io::read_file(path)); }

inline nlohmann::json market_to_json(const MarketFile& m) {
  using io::json;
  const auto& t = m.tree;
  json nodes = json::array(), weights = json::array();
  for (NodeId v = 0; v < t.size(); ++v) {
    const auto p = t.parent(v);
    nodes.push_back({{"id", v}, {"parent", p ? json(*p) : json(nullptr)}});
  }
  for (std::size_t k = 0; k < t.num_leaves(); ++k)
    weights.push_back({{"node", t.leaves()[k]}, {"weight", t.leaf_weights()[k]}});
  json out = {{"tree", {{"horizon", t.horizon()}, {"nodes", nodes}, {"leaf_weights", weights}}}};
  if (m.model) {
    json menus = json::array();
    for (NodeId v : t.internal_nodes()) {
      json entries = json::array();
      for (const auto& e : m.model->menu(v)) entries.push_back({{"kernel", e.kernel}, {"penalty", e.penalty}});
      menus.push_back({{"node", v}, {"entries", entries}});
    }
    out["model"] = {{"menus", menus}};
  }
  if (!m.assets.empty()) {
    json assets = json::array();
    for (const auto& a : m.assets) assets.push_back({{"name", a.name}, {"values", a.values}});
    out["assets"] = assets;
  }
  if (!m.quotes.empty()) {
    json quotes = json::array();
    for (const auto& q : m.quotes)
      quotes.push_back({{"name", q.name}, {"payoff", io::claim_nodes_json(q.payoff)}, {"bid", q.bid}, {"ask", q.ask}});
    out["quotes"] = quotes;
  }
  if (m.caps) {
    json caps = json::object();
    if (std::isfinite(m.caps->global)) caps["global"] = m.caps->global;
    json per = json::array();
    for (NodeId v = 0; v < m.caps->per_node.size(); ++v)
      if (!std::isnan(m.caps->per_node[v])) per.push_back({{"node", v}, {"cap", m.caps->per_node[v]}});
    if (!per.empty()) caps["per_node"] = per;
    out["good_deal_caps"] = caps;
  }
  if (m.constraints) out["constraint_set"] = {{"vertices", m.constraints->vertices}};
  json s = json::object();
  if (m.settings.check_tol) s["check_tol"] = *m.settings.check_tol;
  if (m.settings.max_enumeration) s["max_enumeration"] = *m.settings.max_enumeration;
  if (m.settings.seed) s["seed"] = *m.settings.seed;
  if (!s.empty()) out["settings"] = s;
  return out;
}

inline std::string serialize_market(const MarketFile& m) { return market_to_json(m).dump(2) + "\n"; }

}  // namespace tcpp
