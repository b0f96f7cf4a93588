#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

class Sandbox {
 public:
  Sandbox() {
    static int counter = 0;
    dir_ = fs::temp_directory_path() /
           ("netcausal_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir_);
  }
  ~Sandbox() { fs::remove_all(dir_); }

  fs::path operator/(const std::string& name) const { return dir_ / name; }

  /// Runs the CLI with `args`; `env` is prepended verbatim (e.g. "NETCAUSAL_SEED=3").
  Run run(const std::string& args, const std::string& env = "") const {
    const auto err_path = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && env -u NETCAUSAL_SEED " + env + " '" +
                            NETCAUSAL_CLI + "' " + args + " 2> '" + err_path.string() + "'";
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err_path);
    return r;
  }

 private:
  fs::path dir_;
};

const std::string kData = NETCAUSAL_DATA_DIR;

const char* kDoubling = R"({"seed": 1, "nodes": [
  {"name": "X", "mechanism": {"form": "linear"}},
  {"name": "Y", "parents": ["X"], "mechanism": {"form": "linear", "weights": {"X": 2.0}},
   "noise": {"dist": "gaussian", "scale": 0.0}}]})";

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("simulate is byte-identical across runs and writes a manifest") {
  Sandbox box;
  REQUIRE(box.run("simulate " + kData + "/chain.json -n 200 -o a.csv").code == 0);
  REQUIRE(box.run("simulate " + kData + "/chain.json -n 200 -o b.csv").code == 0);
  CHECK(slurp(box / "a.csv") == slurp(box / "b.csv"));
  CHECK(csv_lines(slurp(box / "a.csv")).size() == 201);

  const auto manifest = nlohmann::json::parse(slurp(box / "a.manifest.json"));
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["seed"] == 7);
  CHECK(manifest["inputs"].size() == 1);
  CHECK(manifest["inputs"].begin().value().get<std::string>().rfind("sha256:", 0) == 0);
  CHECK(manifest.contains("version"));
}

TEST_CASE("seed precedence: flag over environment over model file") {
  Sandbox box;
  REQUIRE(box.run("simulate " + kData + "/chain.json -n 50 -o spec.csv").code == 0);
  REQUIRE(box.run("simulate " + kData + "/chain.json -n 50 -o env.csv", "NETCAUSAL_SEED=99").code == 0);
  REQUIRE(box.run("simulate " + kData + "/chain.json -n 50 --seed 99 -o flag.csv").code == 0);
  REQUIRE(box.run("simulate " + kData + "/chain.json -n 50 --seed 7 -o over.csv", "NETCAUSAL_SEED=99").code == 0);
  CHECK(slurp(box / "env.csv") == slurp(box / "flag.csv"));
  CHECK(slurp(box / "env.csv") != slurp(box / "spec.csv"));
  CHECK(slurp(box / "over.csv") == slurp(box / "spec.csv"));
  CHECK(nlohmann::json::parse(slurp(box / "env.manifest.json"))["seed"] == 99);
  CHECK(box.run("simulate " + kData + "/chain.json -n 5 -o x.csv", "NETCAUSAL_SEED=abc").code == 2);
}

TEST_CASE("simulate with an intervention") {
  Sandbox box;
  spit(box / "double.json", kDoubling);
  REQUIRE(box.run("simulate double.json -n 20 --do X=3 -o d.csv").code == 0);
  const auto lines = csv_lines(slurp(box / "d.csv"));
  REQUIRE(lines.size() == 21);
  CHECK(lines[0] == "X,Y");
  for (std::size_t i = 1; i < lines.size(); ++i) CHECK(lines[i] == "3,6");
  CHECK(box.run("simulate double.json -n 20 --do Q=3 -o e.csv").code == 2);
  CHECK(box.run("simulate double.json -n 20 --do X -o e.csv").code == 2);
}

TEST_CASE("simulate the FTP-like model and summarize it") {
  Sandbox box;
  REQUIRE(box.run("simulate " + kData + "/ftp_like.json -n 1000 -o ftp.csv").code == 0);
  const auto lines = csv_lines(slurp(box / "ftp.csv"));
  REQUIRE(lines.size() == 1001);
  CHECK(std::count(lines[0].begin(), lines[0].end(), ',') == 11);

  const auto r = box.run("summarize ftp.csv");
  CHECK(r.code == 0);
  CHECK(r.out.find("RTT") != std::string::npos);
  CHECK(fs::exists(box / "ftp.summary.csv"));
  CHECK(fs::exists(box / "ftp.summary.manifest.json"));
  CHECK(csv_lines(slurp(box / "ftp.summary.csv")).size() == 13);
}

TEST_CASE("summarize input errors") {
  Sandbox box;
  spit(box / "one.csv", "a,b\n1,2\n");
  const auto r = box.run("summarize one.csv");
  CHECK(r.code == 2);
  CHECK_FALSE(r.err.empty());
  CHECK(box.run("summarize missing.csv").code == 2);
  CHECK(box.run("summarize").code == 2);
  CHECK(box.run("frobnicate").code == 2);
}

TEST_CASE("dsep queries") {
  Sandbox box;
  spit(box / "chain.json", R"({"nodes": ["X", "Z", "Y"], "directed": [["X", "Z"], ["Z", "Y"]]})");
  spit(box / "collider.json", R"({"nodes": ["X", "C", "Y"], "directed": [["X", "C"], ["Y", "C"]]})");
  spit(box / "cpdag.json", R"({"nodes": ["X", "Z", "Y"], "directed": [["X", "Z"]], "undirected": [["Z", "Y"]]})");

  auto r = box.run("dsep chain.json X Y --given Z");
  CHECK(r.code == 0);
  CHECK(r.out.rfind("separated", 0) == 0);

  r = box.run("dsep chain.json X Y");
  CHECK(r.code == 0);
  CHECK(r.out.rfind("not separated", 0) == 0);
  CHECK(r.out.find("X -> Z -> Y") != std::string::npos);

  r = box.run("dsep collider.json X Y --given C");
  CHECK(r.out.rfind("not separated", 0) == 0);
  CHECK(r.out.find("X -> C <- Y") != std::string::npos);
  CHECK(box.run("dsep collider.json X Y").out.rfind("separated", 0) == 0);

  r = box.run("dsep chain.json X Q");
  CHECK(r.code == 2);
  CHECK(r.err.find("'Q'") != std::string::npos);

  r = box.run("dsep cpdag.json X Y");
  CHECK(r.code == 2);
  CHECK(r.err.find("undirected") != std::string::npos);

  CHECK(box.run("dsep chain.json X Y --manifest m.json").code == 0);
  CHECK(nlohmann::json::parse(slurp(box / "m.json"))["command"] == "dsep");
}

TEST_CASE("backdoor sets and the empty-result exit code") {
  Sandbox box;
  auto r = box.run("backdoor " + kData + "/confounder_graph.json X Y");
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.dump().find("[[\"Z\"]]") != std::string::npos);

  spit(box / "reverse.json", R"({"nodes": ["X", "Y"], "directed": [["Y", "X"]]})");
  CHECK(box.run("backdoor reverse.json X Y").code == 4);

  r = box.run("backdoor " + kData + "/ftp_reconstructed_graph.json RTT Tput --max-size 2");
  CHECK(r.code == 0);
  CHECK(r.out.find("T.O.D.") != std::string::npos);
}

TEST_CASE("discover on independent columns finds nothing") {
  Sandbox box;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  std::string text = "a,b,c\n";
  for (int i = 0; i < 300; ++i) text += std::to_string(z(rng)) + "," + std::to_string(z(rng)) + "," + std::to_string(z(rng)) + "\n";
  spit(box / "ind.csv", text);
  const auto r = box.run("discover ind.csv --test fisher_z --alpha 0.01 -o g.json");
  REQUIRE(r.code == 0);
  const auto g = nlohmann::json::parse(slurp(box / "g.json"));
  CHECK(g["directed"].empty());
  CHECK(g["undirected"].empty());
  CHECK(fs::exists(box / "g.dot"));
  CHECK(fs::exists(box / "g.diagnostics.json"));
  CHECK(fs::exists(box / "g.manifest.json"));
  CHECK(box.run("discover ind.csv --test chi2 -o h.json").code == 2);
  CHECK(box.run("discover ind.csv --max-cond 5 -o h.json").code == 2);
}

TEST_CASE("discover output is reproducible") {
  Sandbox box;
  REQUIRE(box.run("simulate " + kData + "/collider.json -n 300 -o w.csv").code == 0);
  REQUIRE(box.run("discover w.csv -o g1.json").code == 0);
  REQUIRE(box.run("discover w.csv -o g2.json").code == 0);
  CHECK(slurp(box / "g1.json") == slurp(box / "g2.json"));
  CHECK(slurp(box / "g1.diagnostics.json") == slurp(box / "g2.diagnostics.json"));
}

TEST_CASE("predict writes adjusted rows and flags low support") {
  Sandbox box;
  REQUIRE(box.run("simulate " + kData + "/confounder.json -n 800 -o c.csv").code == 0);
  const auto graph = kData + "/confounder_graph.json";

  auto r = box.run("predict c.csv --graph " + graph + " -x X -y Y --theta-grid=-1,0,1,40 --grid-points 64 -o p.csv");
  REQUIRE(r.code == 0);
  const auto lines = csv_lines(slurp(box / "p.csv"));
  CHECK(lines.size() == 1 + 4 * 64);
  for (std::size_t i = 1; i < lines.size(); ++i) CHECK(lines[i].find(",adjusted,") != std::string::npos);
  const auto summary = nlohmann::json::parse(slurp(box / "p.summary.json"));
  CHECK(summary["summaries"].size() == 3);
  REQUIRE(summary["low_support"].size() == 1);
  CHECK(summary["low_support"][0]["treatment_value"] == 40.0);
  CHECK(fs::exists(box / "p.manifest.json"));

  r = box.run("predict c.csv --graph " + graph + " -x X -y Y --theta-grid -1:1:3 --grid-points 64 --compare-naive -o q.csv");
  REQUIRE(r.code == 0);
  CHECK(slurp(box / "q.csv").find(",naive,") != std::string::npos);

  CHECK(box.run("predict c.csv -x X -y Y --theta-grid 0 --adjust-set Z -o u.csv").code == 2);
  CHECK(box.run("predict c.csv -x X -y Y --theta-grid 0 --adjust-set Z --unsafe --grid-points 32 -o u.csv").code == 0);
  CHECK(box.run("predict c.csv --graph " + graph + " -x X -y Y --theta-grid 0 --adjust-set none -o v.csv").code == 2);
  CHECK(box.run("predict c.csv --graph " + graph + " -x X -y Y --theta-grid 1,0 -o v.csv").code == 2);

  spit(box / "reverse.json", R"({"nodes": ["X", "Y"], "directed": [["Y", "X"]]})");
  CHECK(box.run("predict c.csv --graph reverse.json -x X -y Y --theta-grid 0 -o w.csv").code == 4);
}
