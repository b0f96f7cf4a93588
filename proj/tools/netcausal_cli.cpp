// netcausal: command-line front end.
//
// Exit codes: 0 success, 2 input or validation error, 3 computation error,
// 4 no valid adjustment set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "netcausal/adjustment.hpp"
#include "netcausal/dataset.hpp"
#include "netcausal/discovery.hpp"
#include "netcausal/error.hpp"
#include "netcausal/graph.hpp"
#include "netcausal/scm.hpp"

#ifndef NETCAUSAL_VERSION
#define NETCAUSAL_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace netcausal;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitCompute = 3;
constexpr int kExitEmpty = 4;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InvalidInput("failed writing '" + path.string() + "'");
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw ComputationError("sha256 digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

/// `out` with its extension replaced by `suffix`, e.g. run.csv -> run.manifest.json
fs::path sibling(const fs::path& out, const std::string& suffix) {
  return out.parent_path() / (out.stem().string() + suffix);
}

struct Manifest {
  std::string command;
  json config = json::object();
  std::uint64_t seed = 0;
  json inputs = json::object();
  json outputs = json::array();

  void input(const fs::path& path, const std::string& bytes) {
    inputs[path.string()] = "sha256:" + sha256_hex(bytes);
  }
  void write(const fs::path& path) const {
    json doc{{"command", command}, {"config", config}, {"seed", seed},
             {"inputs", inputs},   {"outputs", outputs}, {"version", NETCAUSAL_VERSION}};
    write_file(path, doc.dump(2) + "\n");
  }
};

std::uint64_t parse_seed(const std::string& text, const char* origin) {
  std::uint64_t v = 0;
  std::size_t used = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || text.front() == '-')
    throw InvalidInput(std::string("invalid seed in ") + origin + ": '" + text + "'");
  return v;
}

/// Flag, then NETCAUSAL_SEED, then the fallback.
std::uint64_t resolve_seed(const std::optional<std::string>& flag, std::uint64_t fallback) {
  if (flag) return parse_seed(*flag, "--seed");
  if (const char* env = std::getenv("NETCAUSAL_SEED"); env && *env) return parse_seed(env, "NETCAUSAL_SEED");
  return fallback;
}

Dataset load_data(const fs::path& path, Manifest& m) {
  const std::string bytes = read_file(path);
  m.input(path, bytes);
  std::istringstream in(bytes);
  auto load = parse_csv(in);
  if (load.dropped_rows > 0)
    std::cerr << "warning: dropped " << load.dropped_rows << " unusable row(s) from " << path.string() << "\n";
  return std::move(load.data);
}

Dag load_dag(const fs::path& path, Manifest* m) {
  const std::string bytes = read_file(path);
  if (m) m->input(path, bytes);
  const Cpdag g = graph_from_json(bytes);
  if (!g.undirected_edges().empty())
    throw InvalidInput("graph '" + path.string() +
                       "' has undirected edges; orient it into a DAG before querying");
  return g.to_dag();
}

std::vector<std::string> names_of(const Dag& g, const NodeSet& s) {
  std::vector<std::string> out;
  for (NodeId v : s) out.push_back(g.name(v));
  return out;
}

std::string brace_list(const std::vector<std::string>& names) {
  std::string s = "{";
  for (std::size_t i = 0; i < names.size(); ++i) s += (i ? ", " : "") + names[i];
  return s + "}";
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

double parse_real(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v))
    throw InvalidInput("invalid " + what + ": '" + text + "'");
  return v;
}

/// "a,b,c" or "lo:hi:count".
std::vector<double> parse_theta_grid(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw InvalidInput("theta grid range must be lo:hi:count");
    const double lo = parse_real(parts[0], "theta grid bound");
    const double hi = parse_real(parts[1], "theta grid bound");
    const double count = parse_real(parts[2], "theta grid count");
    if (count < 1 || count != std::floor(count)) throw InvalidInput("theta grid count must be a positive integer");
    const auto k = static_cast<std::size_t>(count);
    if (k == 1) return {lo};
    if (!(hi > lo)) throw InvalidInput("theta grid needs hi > lo");
    for (std::size_t i = 0; i < k; ++i)
      out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1));
    return out;
  }
  for (const auto& item : split_list(text)) out.push_back(parse_real(item, "theta value"));
  if (out.empty()) throw InvalidInput("empty theta grid");
  return out;
}

// ---------------------------------------------------------------------------
// Commands

struct SummarizeArgs {
  std::string csv;
  std::string out;
};

int cmd_summarize(const SummarizeArgs& a) {
  Manifest m{"summarize"};
  const Dataset data = load_data(a.csv, m);
  const auto rows = summarize(data);

  const fs::path out = a.out.empty() ? sibling(a.csv, ".summary.csv") : fs::path(a.out);
  m.config = {{"csv", a.csv}, {"out", out.string()}};

  std::ostringstream csv;
  csv << "variable,unit,min,max,avg,coeff_var\n";
  std::printf("%-16s %-14s %14s %14s %14s %10s\n", "variable", "unit", "min", "max", "avg", "coeff_var");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto& unit = data.schema()[i].unit;
    std::printf("%-16s %-14s %14.6g %14.6g %14.6g %10.4f\n", r.variable.c_str(), unit.c_str(), r.min, r.max,
                r.avg, r.coeff_var);
    csv << r.variable << ',' << unit << ',' << format_real(r.min) << ',' << format_real(r.max) << ','
        << format_real(r.avg) << ',' << format_real(r.coeff_var) << '\n';
  }
  write_file(out, csv.str());
  m.outputs.push_back(out.string());
  m.write(sibling(out, ".manifest.json"));
  return 0;
}

struct SimulateArgs {
  std::string spec;
  std::size_t n = 0;
  std::optional<std::string> seed;
  std::string out;
  std::string intervention;
};

int cmd_simulate(const SimulateArgs& a) {
  Manifest m{"simulate"};
  const std::string bytes = read_file(a.spec);
  m.input(a.spec, bytes);
  const ScmSpec parsed = parse_scm_spec(bytes);
  const ScmSpec spec = parsed.with_seed(resolve_seed(a.seed, parsed.seed()));
  m.seed = spec.seed();
  m.config = {{"spec", a.spec}, {"n", a.n}, {"out", a.out}};

  std::optional<Dataset> data;
  if (!a.intervention.empty()) {
    const auto eq = a.intervention.rfind('=');
    if (eq == std::string::npos || eq == 0) throw InvalidInput("--do expects VAR=VALUE");
    const std::string var = a.intervention.substr(0, eq);
    const double value = parse_real(a.intervention.substr(eq + 1), "intervention value");
    m.config["do"] = {{"variable", var}, {"value", value}};
    data.emplace(intervene_scm(spec, var, value, a.n));
  } else {
    data.emplace(generate_scm(spec, a.n));
  }
  std::ostringstream csv;
  write_csv(csv, *data);
  write_file(a.out, csv.str());
  m.outputs.push_back(a.out);
  m.write(sibling(a.out, ".manifest.json"));
  std::cout << "wrote " << data->n() << " rows x " << data->num_variables() << " columns to " << a.out << "\n";
  return 0;
}

struct DiscoverArgs {
  std::string csv;
  std::string test = "kernel_ci";
  double alpha = 0.05;
  std::optional<std::size_t> max_cond;
  bool stable = true;
  std::string null = "gamma";
  std::size_t permutations = 200;
  std::optional<std::string> seed;
  std::string out;
};

int cmd_discover(const DiscoverArgs& a) {
  Manifest m{"discover"};
  const Dataset data = load_data(a.csv, m);

  PcConfig cfg;
  cfg.level = a.alpha;
  // Unset: the default cap of 3, lowered to what the column count allows.
  cfg.max_cond_size = a.max_cond ? *a.max_cond : std::min<std::size_t>(3, data.num_variables() - 2);
  cfg.test = ci_test_kind_from_string(a.test);
  cfg.stable = a.stable;
  if (a.null == "gamma")
    cfg.kernel.null = NullDistribution::Gamma;
  else if (a.null == "permutation")
    cfg.kernel.null = NullDistribution::Permutation;
  else
    throw InvalidInput("unknown null distribution '" + a.null + "'");
  cfg.kernel.permutations = a.permutations;
  cfg.kernel.seed = resolve_seed(a.seed, 0);
  m.seed = cfg.kernel.seed;

  const PcResult result = pc(data, cfg);

  const fs::path out(a.out);
  const fs::path dot = sibling(out, ".dot");
  const fs::path diag = sibling(out, ".diagnostics.json");
  write_file(out, to_json(result.cpdag));
  write_file(dot, to_dot(result.cpdag));
  write_file(diag, diagnostics_to_json(result, cfg));
  m.config = {{"csv", a.csv},         {"test", a.test},           {"alpha", a.alpha},
              {"max_cond", cfg.max_cond_size}, {"stable", a.stable},       {"null", a.null},
              {"permutations", a.permutations}, {"out", a.out}};
  m.outputs = {out.string(), dot.string(), diag.string()};
  m.write(sibling(out, ".manifest.json"));

  std::cout << "edges: " << result.cpdag.directed_edges().size() << " directed, "
            << result.cpdag.undirected_edges().size() << " undirected; "
            << result.diagnostics.total_tests << " tests\n";
  for (const auto& c : result.diagnostics.conflicts) std::cerr << "warning: " << c.detail << "\n";
  return 0;
}

struct DsepArgs {
  std::string graph;
  std::string x;
  std::string y;
  std::vector<std::string> given;
  std::string manifest;
};

int cmd_dsep(const DsepArgs& a) {
  Manifest m{"dsep"};
  const Dag g = load_dag(a.graph, &m);
  const NodeId x = g.id(a.x);
  const NodeId y = g.id(a.y);
  const NodeSet z = g.ids(a.given);
  m.config = {{"graph", a.graph}, {"x", a.x}, {"y", a.y}, {"given", names_of(g, z)}};

  const std::string cond = brace_list(names_of(g, z));
  if (d_separated(g, x, y, z)) {
    std::cout << "separated: " << a.x << " and " << a.y << " given " << cond << "\n";
  } else {
    const auto path = find_open_path(g, x, y, z);
    std::cout << "not separated: " << a.x << " and " << a.y << " given " << cond << "\n";
    if (path) std::cout << "open path: " << format_path(g, *path) << "\n";
  }
  if (!a.manifest.empty()) m.write(a.manifest);
  return 0;
}

struct BackdoorArgs {
  std::string graph;
  std::string x;
  std::string y;
  std::size_t max_size = 4;
  std::string out;
};

int cmd_backdoor(const BackdoorArgs& a) {
  Manifest m{"backdoor"};
  const Dag g = load_dag(a.graph, &m);
  const NodeId x = g.id(a.x);
  const NodeId y = g.id(a.y);
  const auto sets = find_backdoor_sets(g, x, y, a.max_size);

  json doc{{"treatment", a.x}, {"outcome", a.y}, {"max_size", a.max_size}, {"sets", json::array()}};
  for (const auto& s : sets) doc["sets"].push_back(names_of(g, s));
  const std::string text = doc.dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file(a.out, text);
    m.config = {{"graph", a.graph}, {"x", a.x}, {"y", a.y}, {"max_size", a.max_size}, {"out", a.out}};
    m.outputs.push_back(a.out);
    m.write(sibling(a.out, ".manifest.json"));
  }
  if (sets.empty()) {
    std::cerr << "no valid adjustment set with at most " << a.max_size << " members\n";
    return kExitEmpty;
  }
  return 0;
}

struct PredictArgs {
  std::string csv;
  std::string graph;
  std::string x;
  std::string y;
  std::string theta_grid;
  std::string adjust_set = "auto";
  std::size_t max_size = 4;
  std::size_t grid_points = 256;
  bool compare_naive = false;
  bool unsafe = false;
  bool include_low_support = false;
  std::optional<std::string> seed;
  std::string out;
};

int cmd_predict(const PredictArgs& a) {
  Manifest m{"predict"};
  m.seed = resolve_seed(a.seed, 0);
  const Dataset data = load_data(a.csv, m);
  std::optional<Dag> g;
  if (!a.graph.empty()) g.emplace(load_dag(a.graph, &m));

  std::vector<std::string> z;
  if (a.adjust_set == "auto") {
    if (!g) throw InvalidInput("--adjust-set auto needs --graph");
    const auto sets = find_backdoor_sets(*g, g->id(a.x), g->id(a.y), a.max_size);
    if (sets.empty()) {
      std::cerr << "no valid adjustment set for " << a.x << " -> " << a.y << " with at most " << a.max_size
                << " members\n";
      return kExitEmpty;
    }
    z = names_of(*g, sets.front());
  } else if (a.adjust_set != "none") {
    z = split_list(a.adjust_set);
  }
  if (!g && !a.unsafe) throw InvalidInput("an explicit adjustment set needs --graph to certify it, or --unsafe");

  std::vector<std::string> vars{a.x, a.y};
  vars.insert(vars.end(), z.begin(), z.end());
  const CopulaModel model = fit_copula(data, vars);

  InterventionQuery q;
  q.treatment = a.x;
  q.outcome = a.y;
  q.adjustment_set = z;
  q.treatment_values = parse_theta_grid(a.theta_grid);
  q.outcome_grid = default_outcome_grid(model, a.y, a.grid_points);

  AdjustOptions opts;
  opts.graph = g ? &*g : nullptr;
  opts.unsafe = a.unsafe;
  auto posteriors = backdoor_adjust(data, model, q, opts);
  if (a.compare_naive) {
    auto naive = naive_conditional(data, model, q, opts.support);
    posteriors.insert(posteriors.end(), naive.begin(), naive.end());
  }

  const fs::path out(a.out);
  const fs::path summary = sibling(out, ".summary.json");
  std::ostringstream csv;
  write_posterior_csv(csv, posteriors);
  write_file(out, csv.str());
  write_file(summary, posterior_summary_json(posteriors, a.include_low_support));

  m.config = {{"csv", a.csv},
              {"graph", a.graph},
              {"treatment", a.x},
              {"outcome", a.y},
              {"theta_grid", q.treatment_values},
              {"adjust_set_mode", a.adjust_set},
              {"adjustment_set", z},
              {"max_size", a.max_size},
              {"grid_points", a.grid_points},
              {"compare_naive", a.compare_naive},
              {"unsafe", a.unsafe},
              {"include_low_support", a.include_low_support},
              {"copula_shrinkage", model.shrinkage()},
              {"out", a.out}};
  m.outputs = {out.string(), summary.string()};
  m.write(sibling(out, ".manifest.json"));

  std::cout << "adjustment set: " << brace_list(z) << "\n";
  for (const auto& p : posteriors) {
    std::cout << to_string(p.method) << " theta=" << format_real(p.treatment_value)
              << " support=" << p.support_count;
    if (p.low_support)
      std::cout << " LOW-SUPPORT";
    else
      std::cout << " mean=" << format_real(posterior_summary(p).mean);
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal discovery and back-door prediction for tabular network measurements", "netcausal"};
  app.set_version_flag("--version", NETCAUSAL_VERSION);
  app.require_subcommand(1);
  std::function<int()> run;

  SummarizeArgs sa;
  auto* sum = app.add_subcommand("summarize", "min/max/avg/coefficient of variation per column");
  sum->add_option("csv", sa.csv, "input CSV")->required();
  sum->add_option("--out", sa.out, "summary CSV (default: <csv stem>.summary.csv)");
  sum->callback([&] { run = [&] { return cmd_summarize(sa); }; });

  SimulateArgs si;
  auto* sim = app.add_subcommand("simulate", "sample a structural causal model");
  sim->add_option("spec", si.spec, "SCM spec (JSON)")->required();
  sim->add_option("-n,--n", si.n, "number of samples")->required()->check(CLI::PositiveNumber);
  sim->add_option("--seed", si.seed, "overrides NETCAUSAL_SEED and the model file's seed");
  sim->add_option("--do", si.intervention, "intervention VAR=VALUE");
  sim->add_option("-o,--out", si.out, "output CSV")->required();
  sim->callback([&] { run = [&] { return cmd_simulate(si); }; });

  DiscoverArgs di;
  auto* dis = app.add_subcommand("discover", "PC algorithm; writes a CPDAG");
  dis->add_option("csv", di.csv, "input CSV")->required();
  dis->add_option("--test", di.test, "kernel_ci | hsic | fisher_z")->capture_default_str();
  dis->add_option("--alpha", di.alpha, "significance level")->capture_default_str();
  dis->add_option("--max-cond", di.max_cond, "largest conditioning set (default: min(3, columns - 2))");
  dis->add_option("--stable", di.stable, "order-independent skeleton (true/false)")->capture_default_str();
  dis->add_option("--null", di.null, "gamma | permutation")->capture_default_str();
  dis->add_option("--permutations", di.permutations, "permutations for the permutation null")->capture_default_str();
  dis->add_option("--seed", di.seed, "permutation seed (overrides NETCAUSAL_SEED)");
  dis->add_option("-o,--out", di.out, "graph JSON; .dot, .diagnostics.json and .manifest.json go alongside")
      ->required();
  dis->callback([&] { run = [&] { return cmd_discover(di); }; });

  DsepArgs ds;
  auto* dse = app.add_subcommand("dsep", "d-separation query on a DAG");
  dse->add_option("graph", ds.graph, "graph JSON")->required();
  dse->add_option("x", ds.x)->required();
  dse->add_option("y", ds.y)->required();
  dse->add_option("--given", ds.given, "conditioning nodes")->delimiter(',');
  dse->add_option("--manifest", ds.manifest, "write a run manifest here");
  dse->callback([&] { run = [&] { return cmd_dsep(ds); }; });

  BackdoorArgs bd;
  auto* bdc = app.add_subcommand("backdoor", "valid back-door adjustment sets, minimal first");
  bdc->add_option("graph", bd.graph, "graph JSON")->required();
  bdc->add_option("x", bd.x, "treatment")->required();
  bdc->add_option("y", bd.y, "outcome")->required();
  bdc->add_option("--max-size", bd.max_size, "largest set searched")->capture_default_str();
  bdc->add_option("-o,--out", bd.out, "write the JSON here instead of stdout");
  bdc->callback([&] { run = [&] { return cmd_backdoor(bd); }; });

  PredictArgs pr;
  auto* pre = app.add_subcommand("predict", "interventional outcome densities via back-door adjustment");
  pre->add_option("csv", pr.csv, "input CSV")->required();
  pre->add_option("--graph", pr.graph, "DAG JSON used to find or certify the adjustment set");
  pre->add_option("-x,--treatment", pr.x)->required();
  pre->add_option("-y,--outcome", pr.y)->required();
  pre->add_option("--theta-grid", pr.theta_grid, "a,b,c or lo:hi:count")->required();
  pre->add_option("--adjust-set", pr.adjust_set, "auto | none | A,B,...")->capture_default_str();
  pre->add_option("--max-size", pr.max_size, "largest set searched in auto mode")->capture_default_str();
  pre->add_option("--grid-points", pr.grid_points, "outcome grid size")->capture_default_str();
  pre->add_flag("--compare-naive", pr.compare_naive, "also write the naive conditional");
  pre->add_flag("--unsafe", pr.unsafe, "skip back-door certification");
  pre->add_flag("--include-low-support", pr.include_low_support, "keep low-support values in summaries");
  pre->add_option("--seed", pr.seed, "recorded in the manifest (overrides NETCAUSAL_SEED)");
  pre->add_option("-o,--out", pr.out, "posterior CSV; .summary.json and .manifest.json go alongside")
      ->required();
  pre->callback([&] { run = [&] { return cmd_predict(pr); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    return run();
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ComputationError& e) {
    std::cerr << "computation error: " << e.what() << "\n";
    return kExitCompute;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCompute;
  }
}
