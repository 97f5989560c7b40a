#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "doctest.h"
#include "srn/datakit.hpp"
#include "srn/evalkit.hpp"

using namespace srn;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run srn_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " '" + std::string(SRN_CLI_PATH) + "' " + args + " 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double summary_value(const std::string& out, const std::string& key) {
  std::istringstream in(out);
  std::string k;
  double v;
  while (in >> k >> v)
    if (k == key) return v;
  FAIL("missing " << key);
  return 0.0;
}

struct Workdir {
  fs::path path = fs::temp_directory_path() / ("srn_cli_" + std::to_string(::getpid()));
  Workdir() {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
  std::string operator/(const std::string& s) const { return "'" + (path / s).string() + "'"; }
};

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(srn_cli("").code == 2);
  CHECK(srn_cli("frobnicate").code == 2);
  CHECK(srn_cli("train --data . --out x.ckpt").code == 2);
  CHECK(srn_cli("gen-data").code == 2);
  CHECK(srn_cli("gen-data --out x --count nine").code == 2);
  CHECK(srn_cli("--help").code == 0);
}

TEST_CASE("runtime failures exit with 1") {
  Workdir w;
  std::ofstream(w.path / "bad.json") << "{ not json";
  CHECK(srn_cli("gen-data --out " + (w / "d") + " --config " + (w / "bad.json")).code == 1);
  std::ofstream(w.path / "junk.ckpt") << "nope";
  fs::create_directories(w.path / "empty");
  CHECK(srn_cli("eval --ckpt " + (w / "junk.ckpt") + " --data " + (w / "empty")).code == 1);
}

TEST_CASE("SRN_SEED stands in for --seed") {
  Workdir w;
  REQUIRE(srn_cli("gen-data --count 2 --seed 31 --out " + (w / "a")).code == 0);
  REQUIRE(srn_cli("gen-data --count 2 --out " + (w / "b"), "SRN_SEED=31").code == 0);
  REQUIRE(srn_cli("gen-data --count 2 --seed 32 --out " + (w / "c"), "SRN_SEED=31").code == 0);
  CHECK(slurp(w.path / "a" / "sample_00000.pts") == slurp(w.path / "b" / "sample_00000.pts"));
  CHECK(slurp(w.path / "a" / "sample_00000.pts") != slurp(w.path / "c" / "sample_00000.pts"));
  CHECK(srn_cli("gen-data --count 1 --out " + (w / "d"), "SRN_SEED=abc").code == 2);
}

TEST_CASE("gen-data clips respect the motion scale") {
  Workdir w;
  std::ofstream(w.path / "synth.json") << R"({"motion_scale": 0.8, "frames_per_clip": 6, "count": 3})";
  REQUIRE(srn_cli("gen-data --clips --seed 4 --config " + (w / "synth.json") + " --out " + (w / "clips")).code ==
          0);
  const auto clips = load_clips(w.path / "clips");
  REQUIRE(clips.size() == 3);
  for (const auto& c : clips)
    for (std::size_t t = 1; t < c.frames.size(); ++t)
      for (std::size_t n = 0; n < 68; ++n)
        CHECK(std::hypot(c.frames[t].gt[n].x - c.frames[t - 1].gt[n].x,
                         c.frames[t].gt[n].y - c.frames[t - 1].gt[n].y) <= 0.8 + 1e-6);
}

TEST_CASE("eval summary matches its own report") {
  Workdir w;
  std::ofstream(w.path / "train.json")
      << R"({"net":{"patch_size":8,"conv1_channels":4,"conv2_channels":4,"feature_channels":4,)"
         R"("embed_channels":4,"rnn_hidden":8,"g_dim":8,"f_dim":8},"steps":3,"batch_size":2})";
  REQUIRE(srn_cli("gen-data --count 6 --seed 5 --out " + (w / "faces")).code == 0);
  REQUIRE(srn_cli("train --config " + (w / "train.json") + " --data " + (w / "faces") + " --out " +
                  (w / "m.ckpt"))
              .code == 0);
  const Run r = srn_cli("eval --ckpt " + (w / "m.ckpt") + " --data " + (w / "faces") +
                        " --norm interocular --report " + (w / "r.csv"));
  REQUIRE(r.code == 0);
  const auto rows = read_report_csv(w.path / "r.csv");
  REQUIRE(rows.size() == 6);
  std::vector<double> errors;
  for (const auto& row : rows) errors.push_back(row.second);
  double mean_nme = 0.0;
  for (double e : errors) mean_nme += e;
  mean_nme /= static_cast<double>(errors.size());
  CHECK(std::abs(summary_value(r.out, "mean_nme") - mean_nme) <= 1e-9);
  double fails = 0.0;
  for (double e : errors) fails += e > 0.08;
  CHECK(std::abs(summary_value(r.out, "failure_rate") - fails / 6.0) <= 1e-9);
  CHECK(summary_value(r.out, "images") == 6.0);
}
