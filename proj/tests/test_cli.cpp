#include <doctest.h>

#include "qce/io.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace qce;
namespace fs = std::filesystem;

namespace {

// QCE_BIN is the path of the qce executable, set by the build.
struct Run {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class Workdir {
 public:
  explicit Workdir(const std::string& name) : dir_(fs::temp_directory_path() / ("qce_cli_" + name)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Workdir() { fs::remove_all(dir_); }

  fs::path operator/(const std::string& f) const { return dir_ / f; }

  Run run(const std::string& args) const {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && '" QCE_BIN "' " + args + " >'" + out.string() +
                            "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, slurp(out), slurp(err)};
  }

 private:
  fs::path dir_;
};

const char* kW1 = "plan --direct --n 2 --p 2.1 --d 0.1 --M 3 --Mprime 4 --t 0.27 --alpha 1 --beta 0.4";

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("plan writes feasible instances and exits 2 naming the violated constraint") {
  Workdir w("plan");
  CHECK(w.run(std::string(kW1) + " -o w1.json").code == 0);
  CHECK(read_json_file(w / "w1.json").at("schemaVersion") == 1);
  CHECK(w.run("plan --n 2 --p 3 --alpha 1.2 --beta 0.4 -o w2.json").code == 0);
  CHECK(read_json_file(w / "w2.json").at("derived").at("M") == 2125764);

  const auto bad = w.run("plan --n 2 --p 2 --alpha 1 --beta 0.1 -o bad.json");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("p > n") != std::string::npos);
  CHECK_FALSE(fs::exists(w / "bad.json"));

  const auto direct_bad = w.run("plan --direct --n 2 --p 2.1 --d 0.1 --M 20 --Mprime 4 --t 0.27 -o x.json");
  CHECK(direct_bad.code == 2);
}

TEST_CASE("Malformed flags and corrupted files exit 1") {
  Workdir w("malformed");
  CHECK(w.run("plan --n two --p 3 --alpha 1 --beta 0.1 -o x.json").code == 1);
  CHECK(w.run("plan --n 2 --p 3 --alpha 1.2 -o x.json").code == 1);
  CHECK(w.run("plan --n 2 --p 3 --alpha 1.2 --beta 0.4 --M 3 -o x.json").code == 1);
  CHECK(w.run("frobnicate").code == 1);
  CHECK(w.run("build -i missing.json -o c.json").code == 1);

  std::ofstream(w / "broken.json") << "{\"schemaVersion\": 1, \"kind\": \"instance\"";
  CHECK(w.run("build -i broken.json -o c.json").code == 1);
  std::ofstream(w / "v2.json") << "{\"schemaVersion\": 2, \"kind\": \"instance\"}";
  CHECK(w.run("build -i v2.json -o c.json").code == 1);

  REQUIRE(w.run(std::string(kW1) + " -o w1.json").code == 0);
  CHECK(w.run("sample fiber --sigma '7|1' --depth 3 -i w1.json").code == 1);
  CHECK(w.run("build -i w1.json -o w1.json").code == 1);
}

TEST_CASE("build, sample and render on the worked planar instance") {
  Workdir w("w1");
  REQUIRE(w.run(std::string(kW1) + " -o w1.json").code == 0);
  const auto b = w.run("build -i w1.json -o c1.json");
  REQUIRE(b.code == 0);
  CHECK(b.out.find("71 moves") != std::string::npos);
  CHECK(read_json_file(w / "c1.json").at("genmap").at("status") == "built");

  REQUIRE(w.run("sample fiber --sigma '1|1' --depth 3 -i c1.json -o f.csv").code == 0);
  const auto csv = slurp(w / "f.csv");
  CHECK(count_of(csv, "\n") == 1 + 64);
  CHECK(csv.rfind("x1,x2\n", 0) == 0);

  REQUIRE(w.run("render -i c1.json --depth 2 -o fig.svg").code == 0);
  const auto svg = slurp(w / "fig.svg");
  CHECK(count_of(svg, "class=\"hole\"") == 12 + 144);
  CHECK(count_of(svg, "<circle") <= 10000);

  REQUIRE(w.run("build -i w1.json -o nogm.json --no-genmap").code == 0);
  CHECK(read_json_file(w / "nogm.json").at("genmap").at("status") == "skipped (--no-genmap)");
}

TEST_CASE("Paper-mode build is symbolic and verifies") {
  Workdir w("w2");
  REQUIRE(w.run("plan --n 2 --p 3 --alpha 1.2 --beta 0.4 -o w2.json").code == 0);
  REQUIRE(w.run("build -i w2.json -o c2.json").code == 0);
  CHECK(read_json_file(w / "c2.json").at("genmap").at("status") == "skipped (paper-mode magnitude)");
  const auto v = w.run("verify -i c2.json -o r2.json");
  CHECK(v.code == 0);
  const auto r = read_json_file(w / "r2.json");
  CHECK(r.at("passed") == true);
  CHECK(r.at("numbers").at("q").get<double>() == doctest::Approx(0.1362740783917778).epsilon(1e-12));
  CHECK(w.run("report -i r2.json").out.find("all hard checks pass") != std::string::npos);
}

TEST_CASE("plan, build and verify are byte-for-byte deterministic across runs and thread counts") {
  Workdir a("det_a"), b("det_b");
  for (const auto* w : {&a, &b}) {
    REQUIRE(w->run(std::string(kW1) + " -o w1.json").code == 0);
    REQUIRE(w->run("build -i w1.json -o c1.json").code == 0);
  }
  REQUIRE(a.run("verify -i c1.json -o r.json").code == 0);
  // the second verify runs single-threaded
  const std::string single = "cd '" + (b / "").string() + "' && QCE_THREADS=1 '" QCE_BIN "' verify -i c1.json -o r.json >/dev/null";
  REQUIRE(std::system(single.c_str()) == 0);
  for (const char* f : {"w1.json", "c1.json", "c1.cells.bin", "r.json"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(read_json_file(a / "r.json").at("passed") == true);
}

TEST_CASE("verify exits 3 on an injected inverted simplex and names its location") {
  Workdir w("inverted");
  REQUIRE(w.run(std::string(kW1) + " -o w1.json").code == 0);
  REQUIRE(w.run("build -i w1.json -o c1.json").code == 0);
  auto c = read_construction(w / "c1.json");
  auto& cell = c.genmap->script[3].cells[2];
  auto target = cell.target;
  std::swap(target[1], target[2]);
  cell = AffinePiece(cell.domain, target);
  write_construction(w / "bad.json", c);

  const auto v = w.run("verify -i bad.json -o r.json");
  CHECK(v.code == 3);
  CHECK(v.err.find("move 3") != std::string::npos);
  CHECK(v.err.find("simplex 2") != std::string::npos);
  CHECK(read_json_file(w / "r.json").at("passed") == false);
}
