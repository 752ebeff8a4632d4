#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stimgen/checkpoint.hpp"
#include "stimgen/errors.hpp"
#include "stimgen/run_config.hpp"
#include "stimgen/vaegan.hpp"

using namespace stimgen;
using cli::RunConfig;

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Runs the real binary; stdout/stderr captured through temp files.
RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() / "stimgen_cli_io";
  fs::create_directories(dir);
  const fs::path out_path = dir / ("out_" + std::to_string(counter));
  const fs::path err_path = dir / ("err_" + std::to_string(counter));
  ++counter;

  const std::string command = std::string(STIMGEN_CLI_PATH) + " " + args + " > " +
                              out_path.string() + " 2> " + err_path.string();
  const int status = std::system(command.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  return r;
}

// The machine-readable error line is the last nonempty stderr line.
nlohmann::json last_error_json(const std::string& err) {
  std::istringstream in(err);
  std::string line;
  std::string last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  return nlohmann::json::parse(last);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

// Tiny corpus + short training run shared by the round-trip cases. Built
// once; every consumer treats it as read-only.
struct Fixture {
  fs::path corpus = fresh_dir("stimgen_cli_corpus");
  fs::path run = fresh_dir("stimgen_cli_train");
  std::string ref_a;
  std::string ref_b;

  Fixture() {
    RunResult synth =
        run_cli("synth --n 18 --len 32 --seed 5 --out " + corpus.string());
    REQUIRE(synth.exit_code == 0);

    const fs::path cfg = corpus / "train.cfg";
    write_file(cfg,
               "# smoke training configuration\n"
               "beta = 0.01\n"
               "gamma = 50\n"
               "latent_dims = 2\n"
               "batch_size = 4\n"
               "max_iterations = 3\n"
               "calibration_interval = 2\n"
               "averaging_window = 1\n"
               "rng_seed = 9\n"
               "stage_channels = 2,3,4,5\n");
    RunResult train = run_cli("train --config " + cfg.string() + " --data " + corpus.string() +
                              " --out " + run.string());
    REQUIRE(train.exit_code == 0);

    std::vector<std::string> tests;
    for (const auto& e : fs::directory_iterator(corpus / "test")) {
      tests.push_back(e.path().string());
    }
    REQUIRE(tests.size() >= 2);
    std::sort(tests.begin(), tests.end());
    ref_a = tests[0];
    ref_b = tests[1];
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("config text parsing: comments, duplicates, shape of lines") {
  const auto pairs = cli::parse_config_text(
      "# leading comment\n"
      "\n"
      "beta = 2.5\n"
      "  optimizer =  sgd  \n"
      "# artifact foo.csv crc32 00000000\n",
      "inline");
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].first == "beta");
  CHECK(pairs[0].second == "2.5");
  CHECK(pairs[1].first == "optimizer");
  CHECK(pairs[1].second == "sgd");

  CHECK_THROWS_AS(cli::parse_config_text("beta = 1\nbeta = 2\n", "inline"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text("just words\n", "inline"), ConfigError);
  CHECK_THROWS_AS(cli::parse_config_text("= 3\n", "inline"), ConfigError);
}

TEST_CASE("RunConfig::apply covers every key and rejects the rest") {
  RunConfig cfg;
  cfg.apply("beta", "0.25");
  cfg.apply("gamma", "1e4");
  cfg.apply("latent_dims", "6");
  cfg.apply("optimizer", "rmsprop");
  cfg.apply("average_gradients", "true");
  cfg.apply("stage_channels", "2, 4, 8, 16");
  cfg.apply("ckpts", "a.ckpt, b.ckpt");
  cfg.apply("s", "30");
  cfg.apply("kappa", "0.75");
  cfg.apply("seed", "12");
  CHECK(cfg.train.beta == 0.25);
  CHECK(cfg.train.gamma == 1e4);
  CHECK(cfg.train.latent_dims == 6);
  CHECK(cfg.train.optimizer == "rmsprop");
  CHECK(cfg.train.average_gradients);
  CHECK(cfg.stage_channels == std::array<std::size_t, 4>{2, 4, 8, 16});
  CHECK(cfg.ckpts == std::vector<std::string>{"a.ckpt", "b.ckpt"});
  CHECK(cfg.s == 30.0);
  CHECK(cfg.kappa == 0.75);
  CHECK(cfg.seed == 12);

  CHECK_THROWS_AS(cfg.apply("betas", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.apply("beta", "fast"), ConfigError);
  CHECK_THROWS_AS(cfg.apply("latent_dims", "2.5"), ConfigError);
  CHECK_THROWS_AS(cfg.apply("average_gradients", "yes"), ConfigError);
  CHECK_THROWS_AS(cfg.apply("stage_channels", "1,2,3"), ConfigError);
}

TEST_CASE("format_double survives a parse round trip") {
  for (double v : {2e-4, 1.0 / 3.0, 0.51577672654216933, -7.25, 1e-300}) {
    RunConfig cfg;
    cfg.apply("s", cli::format_double(v));
    CHECK(cfg.s == v);
  }
}

TEST_CASE("usage and config failures exit 1 with a machine-readable line") {
  RunResult bogus = run_cli("synth --bogus 3");
  CHECK(bogus.exit_code == 1);
  CHECK(last_error_json(bogus.err)["error"]["kind"] == "usage");

  const fs::path cfg = fs::temp_directory_path() / "stimgen_cli_bad.cfg";
  write_file(cfg, "betas = 1\n");
  RunResult unknown =
      run_cli("train --config " + cfg.string() + " --data x --out y");
  CHECK(unknown.exit_code == 1);
  const nlohmann::json j = last_error_json(unknown.err);
  CHECK(j["error"]["kind"] == "config");
  CHECK(j["error"]["exit"] == 1);
  const std::string message = j["error"]["message"];
  CHECK(message.find("betas") != std::string::npos);

  RunResult missing = run_cli("interp --ckpt a --to b --out c --from ''");
  CHECK(missing.exit_code != 0);
}

TEST_CASE("data failures exit 2") {
  RunResult r = run_cli("train --data /nonexistent/corpus --out " +
                        fresh_dir("stimgen_cli_none").string());
  CHECK(r.exit_code == 2);
  CHECK(last_error_json(r.err)["error"]["kind"] == "data");
}

TEST_CASE("train manifest rerun reproduces artifacts bit-exactly") {
  Fixture& f = fixture();

  const fs::path rerun = fresh_dir("stimgen_cli_train_rerun");
  RunResult again = run_cli("train --config " + (f.run / "run_manifest.txt").string() +
                            " --out " + rerun.string());
  REQUIRE(again.exit_code == 0);
  CHECK(read_file(f.run / "model.ckpt") == read_file(rerun / "model.ckpt"));
  CHECK(read_file(f.run / "history.csv") == read_file(rerun / "history.csv"));
  CHECK(!read_file(f.run / "model.ckpt").empty());
}

TEST_CASE("train with zero iterations writes the untouched initial model") {
  Fixture& f = fixture();
  const fs::path out = fresh_dir("stimgen_cli_zero");
  const fs::path cfg = out.string() + ".cfg";
  write_file(cfg,
             "latent_dims = 2\nbatch_size = 4\nmax_iterations = 0\nrng_seed = 21\n"
             "stage_channels = 2,3,4,5\n");
  RunResult r = run_cli("train --config " + cfg.string() + " --data " + f.corpus.string() +
                        " --out " + out.string());
  REQUIRE(r.exit_code == 0);

  const auto arch = vaegan::ArchitectureSpec::make(32, 2, 2, {2, 3, 4, 5});
  const auto init = vaegan::VaeGanModel::init(arch, 21);
  const auto bytes = vaegan::serialize_checkpoint(init);
  CHECK(read_file(out / "model.ckpt") ==
        std::string(bytes.begin(), bytes.end()));
}

TEST_CASE("eval writes a ranked one-row report for a single checkpoint") {
  Fixture& f = fixture();
  const fs::path report = fs::temp_directory_path() / "stimgen_cli_report.csv";
  fs::remove(report);
  RunResult r = run_cli("eval --ckpts " + (f.run / "model.ckpt").string() + " --data " +
                        f.corpus.string() + " --report " + report.string());
  REQUIRE(r.exit_code == 0);
  std::istringstream csv(read_file(report));
  std::string header, row, extra;
  REQUIRE(std::getline(csv, header));
  CHECK(header == "name,ssim_mean,dtw_mean");
  REQUIRE(std::getline(csv, row));
  CHECK(row.substr(0, 6) == "model,");
  CHECK(!std::getline(csv, extra));
  CHECK(fs::exists(report.string() + ".manifest"));
}

TEST_CASE("interp manifest rerun reproduces the stimulus set bit-exactly") {
  Fixture& f = fixture();
  const fs::path out1 = fresh_dir("stimgen_cli_interp1");
  RunResult first = run_cli("interp --ckpt " + (f.run / "model.ckpt").string() + " --from " +
                            f.ref_a + " --to " + f.ref_b +
                            " --metric ssim --schedule sigmoid --wps 4 --s 5 --out " +
                            out1.string());
  REQUIRE(first.exit_code == 0);

  const fs::path out2 = fresh_dir("stimgen_cli_interp2");
  RunResult second = run_cli("interp --config " + (out1 / "run_manifest.txt").string() +
                             " --out " + out2.string());
  REQUIRE(second.exit_code == 0);
  for (const char* name : {"manifest.csv", "sample_000.csv", "sample_003.csv"}) {
    CHECK(read_file(out1 / name) == read_file(out2 / name));
    CHECK(!read_file(out1 / name).empty());
  }
}

TEST_CASE("manifests refuse to drive a different command") {
  Fixture& f = fixture();
  RunResult r = run_cli("interp --config " + (f.run / "run_manifest.txt").string() +
                        " --out " + fresh_dir("stimgen_cli_cross").string());
  CHECK(r.exit_code == 1);
  const std::string message = last_error_json(r.err)["error"]["message"];
  CHECK(message.find("train") != std::string::npos);
}

TEST_CASE("roughness runs demand an explicit direction") {
  Fixture& f = fixture();
  const std::string base = "interp --ckpt " + (f.run / "model.ckpt").string() + " --from " +
                           f.ref_a + " --to " + f.ref_b + " --wps 3 --s 4 --out " +
                           fresh_dir("stimgen_cli_rough").string();
  RunResult missing = run_cli(base + " --metric roughness");
  CHECK(missing.exit_code == 1);
  const std::string message = last_error_json(missing.err)["error"]["message"];
  CHECK(message.find("direction") != std::string::npos);

  RunResult stray = run_cli(base + " --metric ssim --direction increasing");
  CHECK(stray.exit_code == 1);
}

TEST_CASE("commands do not mutate their inputs") {
  Fixture& f = fixture();
  const std::string before_ref = read_file(f.ref_a);
  const std::string before_ckpt = read_file(f.run / "model.ckpt");
  RunResult r = run_cli("interp --ckpt " + (f.run / "model.ckpt").string() + " --from " +
                        f.ref_a + " --to " + f.ref_b + " --wps 3 --s 4 --out " +
                        fresh_dir("stimgen_cli_ro").string());
  REQUIRE(r.exit_code == 0);
  CHECK(read_file(f.ref_a) == before_ref);
  CHECK(read_file(f.run / "model.ckpt") == before_ckpt);
}
