#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "netcausal/adjustment.hpp"
#include "netcausal/dataset.hpp"
#include "netcausal/discovery.hpp"
#include "netcausal/error.hpp"
#include "netcausal/graph.hpp"
#include "netcausal/independence.hpp"
#include "netcausal/scm.hpp"

namespace py = pybind11;
using namespace netcausal;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using EdgeNames = std::vector<std::pair<std::string, std::string>>;

std::span<const double> view(const Array& a) {
  if (a.ndim() != 1) throw InvalidInput("expected a 1-d array");
  return {a.data(), static_cast<std::size_t>(a.shape(0))};
}

Array to_array(std::span<const double> v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

/// Columns of an (n, k) array; a 1-d array is one column.
std::vector<std::vector<double>> columns_of(const Array& a) {
  if (a.ndim() == 1) return {std::vector<double>(a.data(), a.data() + a.shape(0))};
  if (a.ndim() != 2) throw InvalidInput("expected a 1-d or 2-d array");
  const auto n = static_cast<std::size_t>(a.shape(0));
  const auto k = static_cast<std::size_t>(a.shape(1));
  std::vector<std::vector<double>> cols(k, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) cols[j][i] = a.data()[i * k + j];
  return cols;
}

Dataset make_dataset(const std::vector<std::string>& names, const Array& values) {
  auto cols = columns_of(values);
  if (cols.size() != names.size()) throw InvalidInput("need one name per column");
  std::vector<VariableMeta> schema;
  for (const auto& n : names) schema.push_back({n, "", ""});
  return Dataset(std::move(schema), std::move(cols));
}

Array to_matrix(const Dataset& d) {
  const auto n = d.n();
  const auto k = d.num_variables();
  Array out({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(k)});
  double* p = out.mutable_data();
  for (std::size_t j = 0; j < k; ++j) {
    const auto col = d.column(j);
    for (std::size_t i = 0; i < n; ++i) p[i * k + j] = col[i];
  }
  return out;
}

EdgeNames edge_names(const NodeIndex& g, const std::vector<std::pair<NodeId, NodeId>>& edges) {
  EdgeNames out;
  for (auto [a, b] : edges) out.emplace_back(g.name(a), g.name(b));
  return out;
}

std::vector<std::string> set_names(const NodeIndex& g, const NodeSet& s) {
  std::vector<std::string> out;
  for (NodeId v : s) out.push_back(g.name(v));
  return out;
}

KernelConfig kernel_config(const std::string& null, std::size_t permutations, std::uint64_t seed) {
  KernelConfig cfg;
  if (null == "gamma") cfg.null = NullDistribution::Gamma;
  else if (null == "permutation") cfg.null = NullDistribution::Permutation;
  else throw InvalidInput("unknown null distribution '" + null + "'");
  cfg.permutations = permutations;
  cfg.seed = seed;
  return cfg;
}

py::dict posterior_dict(const PosteriorDensity& p) {
  py::dict d;
  d["treatment_value"] = p.treatment_value;
  d["method"] = std::string(to_string(p.method));
  d["grid"] = to_array(p.grid);
  d["density"] = to_array(p.density);
  d["support_count"] = p.support_count;
  d["low_support"] = p.low_support;
  const auto s = posterior_summary(p);
  d["mean"] = s.mean;
  d["median"] = s.median;
  d["q10"] = s.q10;
  d["q90"] = s.q90;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Causal discovery and back-door prediction (C++ core)";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<ComputationError>(m, "ComputationError", PyExc_RuntimeError);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("names"), py::arg("values"))
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("names", &Dataset::names)
      .def("column", [](const Dataset& d, const std::string& name) { return to_array(d.column(name)); })
      .def("to_numpy", &to_matrix)
      .def("to_csv", [](const Dataset& d) {
        std::ostringstream out;
        write_csv(out, d);
        return out.str();
      });

  m.def("load_csv", [](const std::string& path) { return load_csv(path).data; }, py::arg("path"));
  m.def("summarize", [](const Dataset& d) {
    py::list rows;
    for (const auto& r : summarize(d)) {
      py::dict row;
      row["variable"] = r.variable;
      row["min"] = r.min;
      row["max"] = r.max;
      row["avg"] = r.avg;
      row["coeff_var"] = r.coeff_var;
      rows.append(row);
    }
    return rows;
  });

  m.def(
      "simulate",
      [](const std::string& spec_json, std::size_t n, std::optional<std::uint64_t> seed,
         std::optional<std::pair<std::string, double>> intervention) {
        ScmSpec spec = parse_scm_spec(spec_json);
        if (seed) spec = spec.with_seed(*seed);
        if (intervention) return intervene_scm(spec, intervention->first, intervention->second, n);
        return generate_scm(spec, n);
      },
      py::arg("spec_json"), py::arg("n"), py::arg("seed") = py::none(), py::arg("intervention") = py::none(),
      "Sample an SCM given as JSON text; `intervention` is (variable, value).");

  py::class_<CiTestResult>(m, "CiTestResult")
      .def_readonly("statistic", &CiTestResult::statistic)
      .def_readonly("p_value", &CiTestResult::p_value)
      .def_readonly("independent", &CiTestResult::independent)
      .def_readonly("test_name", &CiTestResult::test_name)
      .def_readonly("conditioning_size", &CiTestResult::conditioning_size)
      .def("__repr__", [](const CiTestResult& r) {
        return "<CiTestResult " + r.test_name + " p=" + format_real(r.p_value) + ">";
      });

  m.def(
      "hsic_test",
      [](const Array& x, const Array& y, double level, const std::string& null, std::size_t permutations,
         std::uint64_t seed) { return hsic_test(view(x), view(y), level, kernel_config(null, permutations, seed)); },
      py::arg("x"), py::arg("y"), py::arg("level") = 0.05, py::arg("null") = "gamma",
      py::arg("permutations") = 200, py::arg("seed") = 0);
  m.def("hsic_statistic", [](const Array& x, const Array& y) { return hsic_statistic(view(x), view(y)); });

  auto conditional = [](auto test) {
    return [test](const Array& x, const Array& y, std::optional<Array> z, double level) {
      std::vector<std::vector<double>> cols;
      if (z) cols = columns_of(*z);
      std::vector<ColumnView> views(cols.begin(), cols.end());
      return test(view(x), view(y), std::span<const ColumnView>(views), level);
    };
  };
  m.def("kernel_ci_test",
        conditional([](ColumnView x, ColumnView y, std::span<const ColumnView> z, double level) {
          return kernel_ci_test(x, y, z, level);
        }),
        py::arg("x"), py::arg("y"), py::arg("z") = py::none(), py::arg("level") = 0.05);
  m.def("fisher_z_test",
        conditional([](ColumnView x, ColumnView y, std::span<const ColumnView> z, double level) {
          return fisher_z_test(x, y, z, level);
        }),
        py::arg("x"), py::arg("y"), py::arg("z") = py::none(), py::arg("level") = 0.05);

  py::class_<Dag>(m, "Dag")
      .def(py::init(&Dag::from_names), py::arg("nodes"), py::arg("edges"))
      .def_property_readonly("nodes", &Dag::names)
      .def_property_readonly("edges", [](const Dag& g) { return edge_names(g, g.edges()); })
      .def("to_json", [](const Dag& g) { return to_json(g); })
      .def("to_dot", [](const Dag& g) { return to_dot(g); })
      .def(
          "d_separated",
          [](const Dag& g, const std::string& x, const std::string& y, const std::vector<std::string>& given) {
            return d_separated(g, g.id(x), g.id(y), g.ids(given));
          },
          py::arg("x"), py::arg("y"), py::arg("given") = std::vector<std::string>{})
      .def(
          "open_path",
          [](const Dag& g, const std::string& x, const std::string& y,
             const std::vector<std::string>& given) -> std::optional<std::vector<std::string>> {
            const auto path = find_open_path(g, g.id(x), g.id(y), g.ids(given));
            if (!path) return std::nullopt;
            std::vector<std::string> out;
            for (NodeId v : *path) out.push_back(g.name(v));
            return out;
          },
          py::arg("x"), py::arg("y"), py::arg("given") = std::vector<std::string>{})
      .def(
          "backdoor_sets",
          [](const Dag& g, const std::string& x, const std::string& y, std::size_t max_size) {
            std::vector<std::vector<std::string>> out;
            for (const auto& s : find_backdoor_sets(g, g.id(x), g.id(y), max_size)) out.push_back(set_names(g, s));
            return out;
          },
          py::arg("x"), py::arg("y"), py::arg("max_size") = 4)
      .def(
          "satisfies_backdoor",
          [](const Dag& g, const std::string& x, const std::string& y, const std::vector<std::string>& z) {
            const auto cert = satisfies_backdoor(g, g.id(x), g.id(y), g.ids(z));
            std::string why;
            if (cert.violation) {
              if (cert.violation->kind == BackdoorViolation::Kind::Descendant)
                why = g.name(cert.violation->descendant) + " descends from " + x;
              else
                why = format_path(g, cert.violation->path);
            }
            return std::make_pair(cert.valid, why);
          },
          py::arg("x"), py::arg("y"), py::arg("z"));

  m.def("dag_from_json", [](const std::string& text) { return graph_from_json(text).to_dag(); });

  py::class_<Cpdag>(m, "Cpdag")
      .def_property_readonly("nodes", &Cpdag::names)
      .def_property_readonly("directed", [](const Cpdag& g) { return edge_names(g, g.directed_edges()); })
      .def_property_readonly("undirected", [](const Cpdag& g) { return edge_names(g, g.undirected_edges()); })
      .def("to_json", [](const Cpdag& g) { return to_json(g); })
      .def("to_dot", [](const Cpdag& g) { return to_dot(g); })
      .def("__eq__", [](const Cpdag& a, const Cpdag& b) { return a == b; });

  m.def(
      "pc",
      [](const Dataset& data, const std::string& test, double alpha, std::optional<std::size_t> max_cond, bool stable,
         std::uint64_t seed) {
        PcConfig cfg;
        cfg.test = ci_test_kind_from_string(test);
        cfg.level = alpha;
        cfg.max_cond_size = max_cond ? *max_cond : std::min<std::size_t>(3, data.num_variables() - 2);
        cfg.stable = stable;
        cfg.kernel.seed = seed;
        return pc(data, cfg).cpdag;
      },
      py::arg("data"), py::arg("test") = "kernel_ci", py::arg("alpha") = 0.05, py::arg("max_cond") = py::none(),
      py::arg("stable") = true, py::arg("seed") = 0);
  m.def("cpdag_of", &cpdag_of, py::arg("dag"));
  m.def("structural_hamming_distance", &structural_hamming_distance);

  py::class_<CopulaModel>(m, "CopulaModel")
      .def_property_readonly("variables", &CopulaModel::variables)
      .def_property_readonly("correlation", [](const CopulaModel& c) { return Eigen::MatrixXd(c.correlation()); })
      .def_property_readonly("shrinkage", &CopulaModel::shrinkage);
  m.def("fit_copula", [](const Dataset& d, const std::vector<std::string>& vars) { return fit_copula(d, vars); },
        py::arg("data"), py::arg("variables"));

  m.def(
      "predict",
      [](const Dataset& data, const std::string& treatment, const std::string& outcome,
         const std::vector<double>& thetas, std::optional<std::vector<std::string>> adjustment_set,
         const Dag* graph, bool unsafe, bool compare_naive, std::size_t grid_points) {
        std::vector<std::string> z;
        if (adjustment_set) {
          z = *adjustment_set;
        } else {
          if (!graph) throw InvalidInput("automatic adjustment-set selection needs a graph");
          const auto sets = find_backdoor_sets(*graph, graph->id(treatment), graph->id(outcome));
          if (sets.empty()) throw InvalidInput("no valid adjustment set");
          z = set_names(*graph, sets.front());
        }
        std::vector<std::string> vars{treatment, outcome};
        vars.insert(vars.end(), z.begin(), z.end());
        const auto model = fit_copula(data, vars);
        InterventionQuery q{treatment, outcome, z, thetas, default_outcome_grid(model, outcome, grid_points)};
        AdjustOptions opts;
        opts.graph = graph;
        opts.unsafe = unsafe;
        auto posts = backdoor_adjust(data, model, q, opts);
        if (compare_naive) {
          auto naive = naive_conditional(data, model, q);
          posts.insert(posts.end(), naive.begin(), naive.end());
        }
        py::list out;
        for (const auto& p : posts) out.append(posterior_dict(p));
        return out;
      },
      py::arg("data"), py::arg("treatment"), py::arg("outcome"), py::arg("thetas"),
      py::arg("adjustment_set") = py::none(), py::arg("graph") = nullptr, py::arg("unsafe") = false,
      py::arg("compare_naive") = false, py::arg("grid_points") = 256,
      "Back-door adjusted outcome densities; one dict per treatment value and method.");

  m.attr("__version__") = NETCAUSAL_VERSION;
}
