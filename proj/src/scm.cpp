#include "netcausal/scm.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "netcausal/error.hpp"

namespace netcausal {

ScmSpec::ScmSpec(Dag graph, std::vector<Mechanism> mechanisms, std::vector<Noise> noise,
                 std::uint64_t seed, std::vector<VariableMeta> meta)
    : graph_(std::move(graph)),
      mechanisms_(std::move(mechanisms)),
      noise_(std::move(noise)),
      seed_(seed),
      meta_(std::move(meta)) {
  const std::size_t k = graph_.size();
  if (k == 0) throw InvalidInput("SCM has no nodes");
  if (mechanisms_.size() != k) throw InvalidInput("every SCM node needs exactly one mechanism");
  if (noise_.size() != k) throw InvalidInput("every SCM node needs exactly one noise law");
  if (meta_.empty())
    for (const auto& name : graph_.names()) meta_.push_back({name, "", ""});
  if (meta_.size() != k) throw InvalidInput("SCM metadata does not match its nodes");

  for (NodeId v = 0; v < k; ++v) {
    const auto& name = graph_.name(v);
    if (meta_[v].name != name) throw InvalidInput("SCM metadata out of order at '" + name + "'");
    const auto& mech = mechanisms_[v];
    for (const auto& [parent, w] : mech.weights) {
      if (!graph_.contains(parent) || !graph_.has_edge(graph_.id(parent), v))
        throw InvalidInput("mechanism of '" + name + "' references non-parent '" + parent + "'");
      if (!std::isfinite(w)) throw InvalidInput("non-finite weight in mechanism of '" + name + "'");
    }
    for (NodeId p : graph_.parents(v))
      if (!mech.weights.count(graph_.name(p)))
        throw InvalidInput("parent '" + graph_.name(p) + "' of '" + name + "' has no weight");
    if (!std::isfinite(mech.intercept) || !std::isfinite(mech.scale))
      throw InvalidInput("non-finite coefficient in mechanism of '" + name + "'");
    if (!(noise_[v].scale >= 0.0) || !std::isfinite(noise_[v].scale))
      throw InvalidInput("noise scale of '" + name + "' must be finite and >= 0");
  }
}

ScmSpec ScmSpec::with_seed(std::uint64_t seed) const {
  ScmSpec copy = *this;
  copy.seed_ = seed;
  return copy;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::vector<double> draw_noise(const Noise& noise, std::uint64_t stream_seed, std::size_t n) {
  std::mt19937_64 rng(stream_seed);
  std::vector<double> out(n, 0.0);
  if (noise.scale == 0.0) return out;
  if (noise.kind == NoiseKind::Gaussian) {
    std::normal_distribution<double> dist(0.0, noise.scale);
    for (auto& v : out) v = dist(rng);
  } else {
    std::uniform_real_distribution<double> dist(-noise.scale, noise.scale);
    for (auto& v : out) v = dist(rng);
  }
  return out;
}

struct Intervention {
  NodeId target;
  double value;
};

Dataset sample(const ScmSpec& spec, std::size_t n, std::span<const std::uint64_t> stream_seeds,
               std::optional<Intervention> intervention) {
  const Dag& g = spec.graph();
  if (n == 0) throw InvalidInput("sample count must be >= 1");
  if (stream_seeds.size() != g.size())
    throw InvalidInput("need one noise stream seed per SCM node");

  std::vector<std::vector<double>> columns(g.size());
  for (NodeId v : g.topological_order()) {
    auto& col = columns[v];
    if (intervention && intervention->target == v) {
      col.assign(n, intervention->value);
      continue;
    }
    const auto& mech = spec.mechanism(v);
    col = draw_noise(spec.noise(v), stream_seeds[v], n);

    std::vector<std::pair<const std::vector<double>*, double>> terms;
    for (NodeId p : g.parents(v)) terms.emplace_back(&columns[p], mech.weights.at(g.name(p)));

    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      switch (mech.form) {
        case MechanismForm::Linear:
          for (const auto& [parent, w] : terms) acc += w * (*parent)[i];
          col[i] = mech.intercept + acc + col[i];
          break;
        case MechanismForm::Quadratic:
          for (const auto& [parent, w] : terms) acc += w * (*parent)[i] * (*parent)[i];
          col[i] = mech.intercept + acc + col[i];
          break;
        case MechanismForm::ExpLinear:
          for (const auto& [parent, w] : terms) acc += w * (*parent)[i];
          col[i] = mech.intercept + mech.scale * std::exp(acc + col[i]);
          break;
      }
      if (!std::isfinite(col[i]))
        throw ComputationError("mechanism of '" + g.name(v) + "' produced a non-finite value");
    }
  }
  return Dataset(spec.meta(), std::move(columns));
}

}  // namespace

std::vector<std::uint64_t> noise_stream_seeds(const ScmSpec& spec) {
  std::vector<std::uint64_t> seeds(spec.graph().size());
  for (NodeId v = 0; v < seeds.size(); ++v) seeds[v] = splitmix64(spec.seed() ^ splitmix64(v + 1));
  return seeds;
}

Dataset generate_scm(const ScmSpec& spec, std::size_t n) {
  return sample(spec, n, noise_stream_seeds(spec), std::nullopt);
}

Dataset generate_scm(const ScmSpec& spec, std::size_t n, std::span<const std::uint64_t> stream_seeds) {
  return sample(spec, n, stream_seeds, std::nullopt);
}

Dataset intervene_scm(const ScmSpec& spec, std::string_view target, double value, std::size_t n) {
  if (!std::isfinite(value)) throw InvalidInput("intervention value must be finite");
  const NodeId t = spec.graph().id(target);
  return sample(spec, n, noise_stream_seeds(spec), Intervention{t, value});
}

// ---------------------------------------------------------------------------
// JSON document

namespace {

using nlohmann::json;

MechanismForm form_from_string(const std::string& s) {
  if (s == "linear") return MechanismForm::Linear;
  if (s == "quadratic") return MechanismForm::Quadratic;
  if (s == "exp_linear") return MechanismForm::ExpLinear;
  throw InvalidInput("unknown mechanism form '" + s + "'");
}

const char* form_to_string(MechanismForm f) {
  switch (f) {
    case MechanismForm::Linear: return "linear";
    case MechanismForm::Quadratic: return "quadratic";
    case MechanismForm::ExpLinear: return "exp_linear";
  }
  return "linear";
}

NoiseKind noise_from_string(const std::string& s) {
  if (s == "gaussian") return NoiseKind::Gaussian;
  if (s == "uniform") return NoiseKind::Uniform;
  throw InvalidInput("unknown noise distribution '" + s + "'");
}

template <typename T>
T field_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidInput(std::string("field \"") + key + "\" has the wrong type");
  }
}

}  // namespace

ScmSpec parse_scm_spec(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("malformed SCM spec: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array())
    throw InvalidInput("SCM spec needs a \"nodes\" array");

  std::vector<std::string> names;
  std::vector<VariableMeta> meta;
  for (const auto& node : doc["nodes"]) {
    if (!node.is_object() || !node.contains("name") || !node["name"].is_string())
      throw InvalidInput("every SCM node needs a string \"name\"");
    names.push_back(node["name"].get<std::string>());
    meta.push_back({names.back(), field_or<std::string>(node, "unit", ""),
                    field_or<std::string>(node, "description", "")});
  }
  NodeIndex index(names);

  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<Mechanism> mechanisms;
  std::vector<Noise> noise;
  for (const auto& node : doc["nodes"]) {
    const NodeId v = index.id(node["name"].get<std::string>());
    for (const auto& p : field_or<std::vector<std::string>>(node, "parents", {}))
      edges.emplace_back(index.id(p), v);

    Mechanism mech;
    if (!node.contains("mechanism")) throw InvalidInput("node '" + names[v] + "' has no mechanism");
    const auto& m = node["mechanism"];
    mech.form = form_from_string(field_or<std::string>(m, "form", "linear"));
    mech.intercept = field_or<double>(m, "intercept", 0.0);
    mech.scale = field_or<double>(m, "scale", 1.0);
    mech.weights = field_or<std::map<std::string, double>>(m, "weights", {});
    mechanisms.push_back(std::move(mech));

    Noise nz;
    if (node.contains("noise")) {
      const auto& n = node["noise"];
      nz.kind = noise_from_string(field_or<std::string>(n, "dist", "gaussian"));
      nz.scale = field_or<double>(n, "scale", 1.0);
    }
    noise.push_back(nz);
  }
  const auto seed = field_or<std::uint64_t>(doc, "seed", 0);
  return ScmSpec(Dag(names, edges), std::move(mechanisms), std::move(noise), seed, std::move(meta));
}

ScmSpec load_scm_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scm_spec(buf.str());
}

std::string scm_spec_to_json(const ScmSpec& spec) {
  const Dag& g = spec.graph();
  json doc;
  doc["seed"] = spec.seed();
  doc["nodes"] = json::array();
  for (NodeId v = 0; v < g.size(); ++v) {
    json node;
    node["name"] = g.name(v);
    node["unit"] = spec.meta()[v].unit;
    node["description"] = spec.meta()[v].description;
    std::vector<std::string> parents;
    for (NodeId p : g.parents(v)) parents.push_back(g.name(p));
    node["parents"] = parents;
    const auto& mech = spec.mechanism(v);
    node["mechanism"] = {{"form", form_to_string(mech.form)},
                         {"intercept", mech.intercept},
                         {"scale", mech.scale},
                         {"weights", mech.weights}};
    node["noise"] = {{"dist", spec.noise(v).kind == NoiseKind::Gaussian ? "gaussian" : "uniform"},
                     {"scale", spec.noise(v).scale}};
    doc["nodes"].push_back(std::move(node));
  }
  return doc.dump(2) + "\n";
}

}  // namespace netcausal
