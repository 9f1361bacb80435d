#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path root;

  explicit Workspace(const std::string& name)
      : root(fs::temp_directory_path() / ("uhlm_cli_" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
  }

  void write(const std::string& file, const std::string& text) const {
    std::ofstream(root / file) << text;
  }

  // Runs the CLI inside the workspace; returns its exit status.
  int run(const std::string& args) const {
    const std::string cmd = "cd '" + root.string() + "' && UHLM_LOG=off '" UHLM_CLI_PATH "' " +
                            args + " > stdout.txt 2> stderr.txt";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }

  std::set<std::string> entries() const {
    std::set<std::string> s;
    for (const auto& e : fs::directory_iterator(root)) s.insert(e.path().filename().string());
    return s;
  }
};

const char* kSynthetic = R"(
[run]
seed = 5
rounds = 50
oracle = true
calibration_rounds = 2000
out = "results"

[backend.synthetic]
plant = "linear"
vocab_size = 32
dirichlet_alpha = 0.06
)";

}  // namespace

TEST_CASE("cli exit codes and outputs") {
  Workspace ws("main");
  ws.write("run.toml", kSynthetic);

  CHECK(ws.run("calibrate -c run.toml") == 0);
  CHECK(fs::exists(ws.root / "results" / "calibration.json"));

  CHECK(ws.run("run -c run.toml --method hlm") == 0);
  CHECK(ws.run("run -c run.toml --method u-hlm --calibration results/calibration.json") == 0);
  CHECK(ws.run("run -c run.toml --method u-hlm --u-th 0.3 --seed 9 --rounds 20") == 0);
  CHECK(fs::exists(ws.root / "results" / "trace_u-hlm_seed9.jsonl"));

  // The output directory is the only thing the CLI created.
  CHECK(ws.entries() == std::set<std::string>{"run.toml", "results", "stdout.txt", "stderr.txt"});

  CHECK(ws.run("run -c run.toml --method u-hlm") == 2);
  ws.write("bad.toml", "[run]\nsede = 3\n");
  CHECK(ws.run("run -c bad.toml") == 2);
  CHECK(ws.run("run -c missing.toml") == 2);
  CHECK(ws.run("run --backend quantum") == 2);
  CHECK(ws.run("") == 2);

  ws.write("flat.toml", "[run]\ncalibration_rounds = 500\nout = \"flat\"\n"
                        "[backend.synthetic]\ncoupling = 1.0\n");
  CHECK(ws.run("calibrate -c flat.toml") == 4);

  ws.write("ext.toml", "[run]\nprompt = [1]\nout = \"ext\"\n"
                       "[backend]\nkind = \"external\"\n"
                       "[backend.external]\ncommand = [\"/nonexistent/model\"]\ntimeout_s = 1.0\n");
  CHECK(ws.run("run -c ext.toml --method hlm") == 3);

  ws.write("sweep.toml", std::string(kSynthetic) + "\n[sweep]\nmethods = [\"hlm\", \"u-hlm\"]\n"
                                                   "u_th = [0.2, 0.5]\nrho_m = [1000.0, 2000.0]\n");
  CHECK(ws.run("sweep -c sweep.toml --jobs 2") == 0);
  CHECK(fs::exists(ws.root / "results" / "sweep.csv"));
}

TEST_CASE("cli reruns reproduce outputs byte for byte") {
  Workspace a("rerun_a"), b("rerun_b");
  for (const auto* ws : {&a, &b}) {
    ws->write("run.toml", kSynthetic);
    CHECK(ws->run("run -c run.toml --method u-hlm --u-th 0.4") == 0);
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(a.root / "results" / "summary.csv") == slurp(b.root / "results" / "summary.csv"));
  CHECK(slurp(a.root / "results" / "trace_u-hlm_seed5.jsonl") ==
        slurp(b.root / "results" / "trace_u-hlm_seed5.jsonl"));
}
