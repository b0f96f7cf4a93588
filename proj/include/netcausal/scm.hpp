#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netcausal/dataset.hpp"
#include "netcausal/graph.hpp"

namespace netcausal {

enum class MechanismForm {
  Linear,     // intercept + sum_j w_j * parent_j + noise
  Quadratic,  // intercept + sum_j w_j * parent_j^2 + noise
  ExpLinear,  // intercept + scale * exp(sum_j w_j * parent_j + noise)
};

enum class NoiseKind { Gaussian, Uniform };

struct Noise {
  NoiseKind kind = NoiseKind::Gaussian;
  double scale = 1.0;  // standard deviation, or half-width for Uniform
};

struct Mechanism {
  MechanismForm form = MechanismForm::Linear;
  double intercept = 0.0;
  double scale = 1.0;  // ExpLinear only
  std::map<std::string, double> weights;  // keyed by parent name
};

/// Structural causal model: a DAG, one mechanism and one noise law per node,
/// and a seed. Immutable after construction.
class ScmSpec {
 public:
  ScmSpec(Dag graph, std::vector<Mechanism> mechanisms, std::vector<Noise> noise,
          std::uint64_t seed, std::vector<VariableMeta> meta = {});

  const Dag& graph() const noexcept { return graph_; }
  const Mechanism& mechanism(NodeId v) const { return mechanisms_.at(v); }
  const Noise& noise(NodeId v) const { return noise_.at(v); }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<VariableMeta>& meta() const noexcept { return meta_; }

  ScmSpec with_seed(std::uint64_t seed) const;

 private:
  Dag graph_;
  std::vector<Mechanism> mechanisms_;
  std::vector<Noise> noise_;
  std::uint64_t seed_;
  std::vector<VariableMeta> meta_;
};

/// Seed of each node's private noise stream, derived from (seed, node index).
std::vector<std::uint64_t> noise_stream_seeds(const ScmSpec& spec);

/// Ancestral sampling; deterministic given the model's seed.
Dataset generate_scm(const ScmSpec& spec, std::size_t n);
/// Same, with explicit per-node stream seeds (one per node, graph order).
Dataset generate_scm(const ScmSpec& spec, std::size_t n, std::span<const std::uint64_t> stream_seeds);

/// Samples the mutilated model do(target = value). Every other node keeps its
/// mechanism and its noise stream, so draws stay aligned with generate_scm.
Dataset intervene_scm(const ScmSpec& spec, std::string_view target, double value, std::size_t n);

/// JSON document; field names are described in docs/scm_format.md.
ScmSpec parse_scm_spec(std::string_view text);
ScmSpec load_scm_spec(const std::filesystem::path& path);
std::string scm_spec_to_json(const ScmSpec& spec);

}  // namespace netcausal
