#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "knlab/cli.hpp"
#include "knlab/error.hpp"
#include "knlab/functionals.hpp"

using namespace knlab;
using json = nlohmann::json;

namespace {

const std::string kData = KNLAB_TEST_DATA;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<json> records(const std::string& text) {
  std::vector<json> r;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) r.push_back(json::parse(line));
  return r;
}

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#') out.push_back(line);
  return out;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "knlab_test_cli";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("json-lines output starts with a self-describing header") {
  const Run r = cli({"functional", "mass", "--preset", "ball"});
  REQUIRE(r.code == kExitOk);
  const auto rec = records(r.out);
  REQUIRE(rec.size() == 2);
  const json& h = rec[0];
  CHECK(h["record"] == "header");
  CHECK(h["version"] == kToolVersion);
  CHECK(h["constants"]["sha256"] == ConstantsRegistry::builtin().digest());
  CHECK(h["conventions"]["signature"] == "+---");
  CHECK(h["conventions"]["eta_ij"] == "magnitude");
  CHECK(h["conventions"]["phi_calibration"] == 0.5);
  CHECK(h["config"].get<std::string>().find("command = functional mass") != std::string::npos);
  CHECK(h["config_sha256"] == sha256_hex(h["config"].get<std::string>()));
  CHECK(rec[1]["value"]["value"] == doctest::Approx(1.0));
}

TEST_CASE("every record carries its unit system and convention flags") {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {"field", "eval", "--preset", "ring", "--count", "3"},
           {"functional", "charge", "--preset", "ball"},
           {"nearfield", "expand", "--preset", "harmonic", "--count", "3"},
           {"couplings", "ledger", "--format", "jsonl"},
           {"source", "validate", "--preset", "shell"}}) {
    const Run r = cli(args);
    const auto rec = records(r.out);
    REQUIRE(rec.size() > 1);
    for (std::size_t i = 1; i < rec.size(); ++i) {
      CHECK(rec[i].contains("system"));
      CHECK(rec[i]["flags"].get<std::string>().find("signature=+---") == 0);
    }
  }
}

TEST_CASE("electron spin comes out as hbar/2") {
  const Run r = cli({"functional", "spin", "--preset", "electron"});
  REQUIRE(r.code == kExitOk);
  const json s = records(r.out).at(1);
  CHECK(s["ratio_to_hbar_half"] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s["S"][2]["cgs"] == doctest::Approx(1.054571817e-27 / 2).epsilon(1e-6));
}

TEST_CASE("couplings ledger defaults to a five-row table and gates on failures") {
  const Run r = cli({"couplings", "ledger"});
  CHECK(r.code == kExitCheckFailed);  // R2(b) with the measured proton mass
  const auto rows = data_lines(r.out);
  REQUIRE(rows.size() == 6);  // column names + R1..R5
  for (int i = 1; i <= 5; ++i) CHECK(rows[i].find("R" + std::to_string(i)) != std::string::npos);
  CHECK(r.out.find("# summary: passed=4 total=5 all_pass=false") != std::string::npos);
}

TEST_CASE("malformed source file exits 2 naming the line") {
  const Run r = cli({"source", "validate", "--source", kData + "/malformed.src"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("malformed.src:6") != std::string::npos);
  CHECK(r.err.find("angular_speed") != std::string::npos);
}

TEST_CASE("source files superpose their sections") {
  const Run r = cli({"source", "validate", "--source", kData + "/two_balls.src"});
  REQUIRE(r.code == kExitOk);
  const json s = records(r.out).at(1);
  CHECK(s["part_count"] == 2);
  CHECK(s["mass"]["value"] == doctest::Approx(2.0));
}

TEST_CASE("usage errors exit 2") {
  CHECK(cli({"functional", "mass"}).code == kExitUsage);
  CHECK(cli({"functional", "mass", "--preset", "nope"}).code == kExitUsage);
  CHECK(cli({"functional", "mass", "--preset", "ball", "--rel-tol", "-1"}).code == kExitUsage);
  CHECK(cli({"field", "eval", "--preset", "ball", "--component", "04"}).code == kExitUsage);
  CHECK(cli({"field", "eval", "--preset", "ball", "--count", "x"}).code == kExitUsage);
  CHECK(cli({"couplings", "ledger", "--format", "plot"}).code == kExitUsage);
  CHECK(cli({"bogus"}).code == kExitUsage);
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"--config", kData + "/missing.run"}).code == kExitUsage);
  const Run help = cli({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("couplings") != std::string::npos);
}

TEST_CASE("non-convergence exits 3 after writing partial results") {
  const Run r = cli({"field", "eval", "--preset", "ball", "--point", "0,3,0,0;0,0.5,0.2,0", "--radial-nodes", "2",
                     "--angular-nodes", "2", "--rel-tol", "1e-15", "--max-refinements", "1"});
  CHECK(r.code == kExitNumerical);
  const auto rec = records(r.out);
  REQUIRE(rec.size() == 3);
  CHECK(rec[2]["converged"] == false);
  CHECK(rec[2].contains("error"));
  CHECK(std::isfinite(rec[2]["value"]["value"].get<double>()));
}

TEST_CASE("singular field points exit 3") {
  const Run r = cli({"field", "eval", "--preset", "ring", "--quantity", "gauge", "--point", "0,1,0,0"});
  CHECK(r.code == kExitNumerical);
}

TEST_CASE("outputs are byte-identical across runs and worker counts") {
  const std::vector<std::string> base{"field", "eval", "--preset", "harmonic", "--system", "natural",
                                      "--count", "9", "--format", "csv"};
  auto with = [&](const char* w) {
    auto a = base;
    a.insert(a.end(), {"--workers", w});
    return cli(a).out;
  };
  const std::string one = with("1");
  CHECK(one == with("1"));
  CHECK(one == with("3"));
  CHECK(one == with("8"));
}

TEST_CASE("a run file and the equivalent flags give the same bytes") {
  const Run a = cli({"--config", kData + "/spin.run"});
  const Run b = cli({"functional", "spin", "--source", "preset:electron", "--format", "jsonl"});
  REQUIRE(a.code == kExitOk);
  CHECK(a.out == b.out);
  // flags override the file
  const Run c = cli({"--config", kData + "/spin.run", "--format", "table"});
  CHECK(c.out.rfind("# knlab", 0) == 0);
}

TEST_CASE("constants override changes the header digest and the results") {
  const auto path = scratch("heavy_proton.txt");
  std::string text = ConstantsRegistry::builtin().with_value("m_p", 1.67262192369e-22).source_text();
  std::ofstream(path) << text;
  const Run base = cli({"couplings", "ledger", "--format", "jsonl"});
  const Run over = cli({"couplings", "ledger", "--format", "jsonl", "--constants", path.string()});
  const auto b = records(base.out), o = records(over.out);
  CHECK(b[0]["constants"]["sha256"] != o[0]["constants"]["sha256"]);
  CHECK(o[0]["constants"]["sha256"] == sha256_hex(text));
  CHECK(b[2]["checks"][1]["discrepancy_log10"].get<double>() ==
        doctest::Approx(o[2]["checks"][1]["discrepancy_log10"].get<double>() + 4.0));
}

TEST_CASE("csv and plot formats") {
  const Run csv = cli({"report", "--format", "csv"});
  const auto rows = data_lines(csv.out);
  REQUIRE(rows.size() > 20);
  CHECK(rows[0].find("record,system,section,anchor,section_status,check,value") == 0);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].rfind("check,", 0) == 0);

  const Run plot = cli({"nearfield", "expand", "--preset", "harmonic", "--count", "4", "--format", "plot"});
  const auto pts = data_lines(plot.out);
  REQUIRE(pts.size() == 5);
  CHECK(pts[0] == "r,h00_series");
  CHECK(pts[1].find(',') != std::string::npos);
}

TEST_CASE("output can be written to a file") {
  const auto path = scratch("mass.jsonl");
  std::filesystem::remove(path);
  const Run r = cli({"functional", "mass", "--preset", "ball", "--out", path.string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.empty());
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(records(ss.str()).size() == 2);
}

TEST_CASE("fit from a two-column file") {
  const Run r = cli({"nearfield", "fit", "--input", kData + "/cornell.csv", "--m", "1"});
  const auto rec = records(r.out);
  REQUIRE(rec.size() == 3);
  CHECK(rec[1]["alpha"] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rec[1]["beta"] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(rec[2]["value"] == doctest::Approx(0.5));
  CHECK(r.code == kExitOk);
}

TEST_CASE("report covers every section in order") {
  const Run r = cli({"report"});
  const auto rec = records(r.out);
  std::vector<std::string> order;
  for (std::size_t i = 1; i < rec.size(); ++i) {
    if (rec[i]["record"] != "check") continue;
    const std::string s = rec[i]["section"];
    if (order.empty() || order.back() != s) order.push_back(s);
  }
  const std::vector<std::string> expected{"retarded-field",   "gauge-potential",      "mass-functional",
                                          "spin-functional",  "electron-preset",      "potential-extraction",
                                          "electromagnetic-potential", "charge-fraction", "retardation-series",
                                          "cornell-fit",      "couplings-ledger"};
  CHECK(order == expected);
  for (std::size_t i = 1; i < rec.size(); ++i) {
    if (rec[i]["record"] == "check" && rec[i]["section"] != "couplings-ledger") CHECK(rec[i]["section_status"] == "pass");
  }
  CHECK(rec.back()["record"] == "summary");
  CHECK(rec.back()["passed"] == 10);
  CHECK(r.code == kExitCheckFailed);
}

TEST_CASE("run config text round-trips through its canonical form") {
  RunConfig c = RunConfig::parse(
      "command = field eval\nsource = preset:ring\nworkers = 4\n[quadrature]\nrel_tol = 1e-8\n[params]\ncount = 5\n");
  CHECK(c.workers == 4);
  CHECK(c.quadrature.rel_tol == 1e-8);
  CHECK(c.params.at("count") == "5");
  const RunConfig back = RunConfig::parse(c.canonical());
  CHECK(back.canonical() == c.canonical());
  CHECK(c.canonical().find("workers") == std::string::npos);
  try {
    RunConfig::parse("command = report\ncolour = blue\n", "x.run");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}
