#include <json.hpp>

#include "netcausal/error.hpp"
#include "netcausal/graph.hpp"

namespace netcausal {

namespace {

using nlohmann::json;

json edge_list(const NodeIndex& nodes, const std::vector<std::pair<NodeId, NodeId>>& edges) {
  json out = json::array();
  for (auto [a, b] : edges) out.push_back({nodes.name(a), nodes.name(b)});
  return out;
}

std::string dump(const NodeIndex& nodes, const std::vector<std::pair<NodeId, NodeId>>& directed,
                 const std::vector<std::pair<NodeId, NodeId>>& undirected) {
  json doc;
  doc["nodes"] = nodes.names();
  doc["directed"] = edge_list(nodes, directed);
  doc["undirected"] = edge_list(nodes, undirected);
  return doc.dump(2) + "\n";
}

std::pair<std::string, std::string> read_pair(const json& e) {
  if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
    throw InvalidInput("graph edges must be [\"from\", \"to\"] pairs");
  return {e[0].get<std::string>(), e[1].get<std::string>()};
}

}  // namespace

std::string to_json(const Cpdag& g) { return dump(g, g.directed_edges(), g.undirected_edges()); }

std::string to_json(const Dag& g) { return dump(g, g.edges(), {}); }

Cpdag graph_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("malformed graph JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array())
    throw InvalidInput("graph JSON needs a \"nodes\" array");
  std::vector<std::string> names;
  for (const auto& n : doc["nodes"]) {
    if (!n.is_string()) throw InvalidInput("graph node names must be strings");
    names.push_back(n.get<std::string>());
  }
  Cpdag g(std::move(names));
  for (const char* key : {"directed", "undirected"}) {
    if (!doc.contains(key)) continue;
    if (!doc[key].is_array()) throw InvalidInput(std::string("\"") + key + "\" must be an array");
    for (const auto& e : doc[key]) {
      const auto [a, b] = read_pair(e);
      if (std::string_view(key) == "directed") g.add_directed(g.id(a), g.id(b));
      else g.add_undirected(g.id(a), g.id(b));
    }
  }
  return g;
}

}  // namespace netcausal
