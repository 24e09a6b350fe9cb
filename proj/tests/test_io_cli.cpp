#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "entconv/entconv.hpp"
#include "entconv/io.hpp"

#ifndef ENTCONV_CLI_PATH
#error "ENTCONV_CLI_PATH must point at the built CLI binary"
#endif

using entconv::Spectrum;
using nlohmann::json;
using Catch::Matchers::ContainsSubstring;
using Spec = Spectrum<double>;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::string cmd = ENTCONV_CLI_PATH;
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult res;
  char buf[4096];
  while (fgets(buf, sizeof buf, pipe)) res.out += buf;
  const int status = pclose(pipe);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() /
             ("entconv_io_" + std::to_string(getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p);
  REQUIRE(f.good());
  f << text;
}

const char* kGeo06 = "{\"kind\":\"geometric\",\"q\":0.6}";
const char* kGeo04 = "{\"kind\":\"geometric\",\"q\":0.4}";
const char* kTp951 =
    "{\"kind\":\"tensor_power\",\"base\":{\"kind\":\"geometric\",\"q\":0.951},"
    "\"copies\":2}";
const char* kTp95 =
    "{\"kind\":\"tensor_power\",\"base\":{\"kind\":\"geometric\",\"q\":0.95},"
    "\"copies\":2}";

}  // namespace

TEST_CASE("spectrum specs load from JSON for every kind") {
  const auto g = entconv::io::spectrum_from_json<double>(
      json::parse(R"({"kind":"geometric","q":0.5})"));
  CHECK(g.kind() == entconv::SpectrumKind::Geometric);
  CHECK(g.param_q() == 0.5);

  const auto p = entconv::io::spectrum_from_json<double>(
      json::parse(R"({"kind":"power_law","r":0.25})"));
  CHECK(p.kind() == entconv::SpectrumKind::PowerLaw);
  CHECK(p.param_r() == 0.25);

  const auto l = entconv::io::spectrum_from_json<double>(
      json::parse(R"({"kind":"log_power","t":2.5})"));
  CHECK(l.kind() == entconv::SpectrumKind::LogPower);

  const auto f = entconv::io::spectrum_from_json<double>(
      json::parse(R"({"kind":"finite","values":[0.4,0.6]})"));
  CHECK(f.kind() == entconv::SpectrumKind::Finite);
  CHECK(f.rank_count() == 2);
  CHECK(f.value_at_rank(1) == 0.6);

  const auto t = entconv::io::spectrum_from_json<double>(json::parse(
      R"({"kind":"tensor_power","base":{"kind":"geometric","q":0.5},"copies":2})"));
  CHECK(t.kind() == entconv::SpectrumKind::TensorPower);

  CHECK_THROWS_WITH(entconv::io::spectrum_from_json<double>(json::parse("[1]")),
                    ContainsSubstring("string \"kind\" required"));
  CHECK_THROWS_WITH(entconv::io::spectrum_from_json<double>(
                        json::parse(R"({"kind":"geometric"})")),
                    ContainsSubstring("needs numeric \"q\""));
  CHECK_THROWS_WITH(entconv::io::spectrum_from_json<double>(
                        json::parse(R"({"kind":"bogus"})")),
                    ContainsSubstring("unknown kind \"bogus\""));
  CHECK_THROWS_WITH(entconv::io::spectrum_from_json<double>(
                        json::parse(R"({"kind":"finite"})")),
                    ContainsSubstring("needs a \"values\" array"));
  CHECK_THROWS_WITH(entconv::io::spectrum_from_json<double>(
                        json::parse(R"({"kind":"finite","values":[0.5,"x"]})")),
                    ContainsSubstring("must be numeric"));
  CHECK_THROWS_WITH(entconv::io::spectrum_from_json<double>(
                        json::parse(R"({"kind":"tensor_power","copies":2})")),
                    ContainsSubstring("needs \"base\""));
  CHECK_THROWS_WITH(
      entconv::io::spectrum_from_json<double>(json::parse(
          R"({"kind":"tensor_power","base":{"kind":"geometric","q":0.5},"copies":2.5})")),
      ContainsSubstring("integer \"copies\""));
  CHECK_THROWS_WITH(entconv::io::load_spectrum<double>("/nonexistent/x.json"),
                    ContainsSubstring("cannot open spectrum spec"));
}

TEST_CASE("CSV parsing reports 1-based line and column positions") {
  std::istringstream ok("1,2\r\n\r\n  \n3.5,4e-2\n");
  const auto m = entconv::io::parse_csv_matrix(ok, "t.csv");
  REQUIRE(m.size() == 2);
  CHECK(m[0] == std::vector<double>{1.0, 2.0});
  CHECK(m[1] == std::vector<double>{3.5, 0.04});

  std::istringstream spaced(" 1.5 , 2 \n");
  CHECK(entconv::io::parse_csv_matrix(spaced, "s.csv")[0] ==
        std::vector<double>{1.5, 2.0});

  std::istringstream bad("1,2\n3,x\n");
  CHECK_THROWS_WITH(entconv::io::parse_csv_matrix(bad, "t.csv"),
                    ContainsSubstring("t.csv: line 2, column 2") &&
                        ContainsSubstring("not a number: \"x\""));
  std::istringstream ragged("1,2\n3\n");
  CHECK_THROWS_WITH(entconv::io::parse_csv_matrix(ragged, "t.csv"),
                    ContainsSubstring("line 2: expected 2 columns, found 1"));
  std::istringstream blank("\n  \n");
  CHECK_THROWS_WITH(entconv::io::parse_csv_matrix(blank, "t.csv"),
                    ContainsSubstring("no data rows"));
}

TEST_CASE("finite spec JSON round trips through the loader") {
  const std::vector<double> vals = {0.5, 0.3, 0.2};
  const json j = entconv::io::finite_spec_json(vals);
  CHECK(j["kind"] == "finite");
  const auto s = entconv::io::spectrum_from_json<double>(j);
  REQUIRE(s.rank_count() == 3);
  for (entconv::Index n = 1; n <= 3; ++n)
    CHECK(s.value_at_rank(n) == vals[size_t(n - 1)]);
}

TEST_CASE("report builders expose the documented shapes") {
  const auto body = entconv::io::show_json(Spec::geometric(0.5), 3);
  CHECK(body["kind"] == "geometric");
  CHECK(body["rank"].is_null());
  REQUIRE(body["rows"].size() == 3);
  CHECK(body["rows"][0]["n"] == 1);
  CHECK(body["rows"][0]["lambda"].get<double>() == 0.75);

  const auto rep = entconv::compare(Spec::geometric(0.4), Spec::geometric(0.6),
                                    entconv::Relation::Standard);
  const auto cj = entconv::io::compare_json(rep);
  for (const char* key : {"verdict", "relation", "checked_through",
                          "witness_rank", "margin", "used_tolerance", "method"})
    CHECK(cj.contains(key));

  const auto mp = entconv::max_probability(Spec::finite({0.6, 0.4}),
                                           Spec::finite({0.5, 0.5}));
  const auto pj = entconv::io::prob_json(mp);
  CHECK(pj["p_lower"].get<double>() == 0.8);
  CHECK(pj["status"] == "exact");
  CHECK_FALSE(pj["rows_truncated"].get<bool>());
}

TEST_CASE("documented command lines reproduce their recorded outputs") {
  const auto ex1 = run_cli({"check", kGeo06, kGeo04, "--variant", "standard"});
  CHECK(ex1.code == 0);
  CHECK_THAT(ex1.out, ContainsSubstring("verdict: certified") &&
                          ContainsSubstring("geometric closed form"));

  const auto ex2 = run_cli({"--format", "json", "convert-slocc",
                            R"({"kind":"finite","values":[0.6,0.4]})",
                            R"({"kind":"finite","values":[0.5,0.5]})"});
  CHECK(ex2.code == 0);
  CHECK_THAT(ex2.out, ContainsSubstring("\"p_lower\":0.8,\"p_upper\":0.8"));
  const json parsed = json::parse(ex2.out);
  CHECK(parsed["probability"]["witness_index"] == 2);
  CHECK(parsed["probability"]["status"] == "exact");
  CHECK(parsed["p_used"].get<double>() == 0.8);
  CHECK(parsed["nu"] == json::array({0.6, 0.4}));

  const auto ex3 = run_cli({"show", R"({"kind":"finite","values":[1.0]})"});
  CHECK(ex3.code == 0);
  CHECK_THAT(ex3.out, ContainsSubstring("rank: 1") &&
                          ContainsSubstring("n=1") &&
                          ContainsSubstring("lambda=1") &&
                          ContainsSubstring("E_n=[1, 1]"));
  const auto ex3j =
      run_cli({"--format", "json", "show", R"({"kind":"finite","values":[1.0]})"});
  CHECK_THAT(ex3j.out,
             ContainsSubstring(
                 "\"rows\":[{\"lambda\":1.0,\"n\":1,\"tail\":[1.0,1.0]}]"));
}

TEST_CASE("identical configuration yields byte-identical reports") {
  const std::vector<std::string> slocc = {
      "--format", "json", "convert-slocc",
      R"({"kind":"geometric","q":0.8})", R"({"kind":"geometric","q":0.5})"};
  const auto a = run_cli(slocc);
  const auto b = run_cli(slocc);
  CHECK(a.code == 0);
  REQUIRE(a.out == b.out);

  const std::vector<std::string> mono = {
      "--format", "json", "monotone", R"({"kind":"geometric","q":0.6})",
      "--family", "squeeze", "--force-numeric"};
  const auto c = run_cli(mono);
  const auto d = run_cli(mono);
  CHECK(c.code == 0);
  REQUIRE(c.out == d.out);
}

TEST_CASE("exit codes distinguish certified, refuted, undecided, and bad input") {
  CHECK(run_cli({"check", kGeo06, kGeo04}).code == 0);
  const auto refuted = run_cli({"check", kGeo04, kGeo06});
  CHECK(refuted.code == 2);
  CHECK_THAT(refuted.out, ContainsSubstring("refuted"));

  const auto zero = run_cli({"convert-slocc", R"({"kind":"geometric","q":0.5})",
                             R"({"kind":"geometric","q":0.8})"});
  CHECK(zero.code == 2);
  CHECK_THAT(zero.out, ContainsSubstring("certified_zero"));

  const auto undecided = run_cli({"check", kTp951, kTp95});
  CHECK(undecided.code == 3);
  CHECK_THAT(undecided.out,
             ContainsSubstring("undecided") &&
                 ContainsSubstring("scan exhausted without closure"));

  const auto parse = run_cli({"show", "{\"kind\":"});
  CHECK(parse.code == 1);
  CHECK_THAT(parse.out, ContainsSubstring("inline spec:"));
  const auto unknown = run_cli({"show", R"({"kind":"bogus"})"});
  CHECK(unknown.code == 1);
  CHECK_THAT(unknown.out, ContainsSubstring("unknown kind"));
  const auto missing = run_cli({"ingest", "/nonexistent/a.csv"});
  CHECK(missing.code == 1);
  CHECK_THAT(missing.out, ContainsSubstring("cannot open CSV"));
}

TEST_CASE("requested-probability and plan subcommands report and branch") {
  const char* a = R"({"kind":"finite","values":[0.6,0.4]})";
  const char* b = R"({"kind":"finite","values":[0.5,0.5]})";
  const auto ok = run_cli({"convert-slocc", a, b, "0.3"});
  CHECK(ok.code == 0);
  CHECK_THAT(ok.out, ContainsSubstring("requested p: 0.3 -> certified"));
  const auto too_much = run_cli({"convert-slocc", a, b, "0.9"});
  CHECK(too_much.code == 2);
  CHECK_THAT(too_much.out, ContainsSubstring("refuted"));

  const auto plan = run_cli({"convert-locc", R"({"kind":"geometric","q":0.8})",
                             R"({"kind":"geometric","q":0.5})", "0.01"});
  CHECK(plan.code == 0);
  CHECK_THAT(plan.out, ContainsSubstring("case: infinite_b") &&
                           ContainsSubstring("distance_bound"));
  const auto noplan = run_cli({"convert-locc", R"({"kind":"geometric","q":0.5})",
                               R"({"kind":"geometric","q":0.8})", "0.01"});
  CHECK(noplan.code == 2);
  CHECK_THAT(noplan.out, ContainsSubstring("conversion not certified"));

  const auto inh = run_cli({"inhibit", R"({"kind":"geometric","q":0.5})",
                            R"({"kind":"power_law","r":0.5})", "--copies", "2",
                            "--kmax", "8"});
  CHECK(inh.code == 2);
  CHECK_THAT(inh.out, ContainsSubstring("verbatim violations") &&
                          ContainsSubstring("robust bound: holds"));
  const auto badsrc = run_cli({"inhibit", R"({"kind":"power_law","r":0.5})",
                               R"({"kind":"power_law","r":0.5})"});
  CHECK(badsrc.code == 1);
  CHECK_THAT(badsrc.out, ContainsSubstring("must be geometric"));

  const auto est = run_cli({"monotone", R"({"kind":"power_law","r":0.5})",
                            "--family", "power"});
  CHECK(est.code == 0);
  CHECK_THAT(est.out, ContainsSubstring("R-: [0.5, 0.5]"));
  const auto blocked = run_cli({"monotone", R"({"kind":"power_law","r":0.9})",
                                "--against", R"({"kind":"log_power","t":2.0})",
                                "--family", "power"});
  CHECK(blocked.code == 2);
  CHECK_THAT(blocked.out, ContainsSubstring("blocked_certified"));
  const auto conv = run_cli({"monotone", R"({"kind":"power_law","r":0.9})",
                             "--against", R"({"kind":"geometric","q":0.99})",
                             "--family", "power"});
  CHECK(conv.code == 0);
  CHECK_THAT(conv.out, ContainsSubstring("convertible_certified"));
}

TEST_CASE("ingested amplitudes round trip through the spec file") {
  const auto dir = scratch_dir();
  const std::string re_text =
      "0.31,-0.22,0.45,0.10\n0.05,0.64,-0.37,0.28\n-0.15,0.09,0.52,-0.41\n";
  const std::string im_text =
      "0.12,0.33,-0.26,0.07\n-0.44,0.18,0.25,-0.09\n0.21,-0.13,0.06,0.38\n";
  write_file(dir / "re.csv", re_text);
  write_file(dir / "im.csv", im_text);
  const auto spec_path = (dir / "spec.json").string();

  const auto run = run_cli({"--format", "json", "ingest",
                            (dir / "re.csv").string(),
                            (dir / "im.csv").string(), "-o", spec_path});
  REQUIRE(run.code == 0);
  const json out = json::parse(run.out);
  CHECK(out["renormalized"].get<bool>());
  CHECK(out["rank"].get<int64_t>() == 3);

  // the written spec must reproduce the direct decomposition
  entconv::Index rows = 0, cols = 0;
  const auto amps = entconv::io::amplitudes_from_csv<double>(
      (dir / "re.csv").string(), (dir / "im.csv").string(), rows, cols);
  REQUIRE(rows == 3);
  REQUIRE(cols == 4);
  const auto direct = entconv::schmidt_from_amplitudes<double>(amps, rows, cols);
  const auto reloaded = entconv::io::load_spectrum<double>(spec_path);
  REQUIRE(reloaded.rank_count() == entconv::Index(direct.coefficients.size()));
  for (entconv::Index n = 1; n <= reloaded.rank_count(); ++n)
    CHECK(std::abs(reloaded.value_at_rank(n) -
                   direct.coefficients[size_t(n - 1)]) <= 1e-10);

  // real-only variant
  const auto solo = run_cli({"ingest", (dir / "re.csv").string()});
  CHECK(solo.code == 0);
  CHECK_THAT(solo.out, ContainsSubstring("schmidt rank: 3"));

  write_file(dir / "bad.csv", "1,2\n3,oops\n");
  const auto bad = run_cli({"ingest", (dir / "bad.csv").string()});
  CHECK(bad.code == 1);
  CHECK_THAT(bad.out, ContainsSubstring("line 2, column 2"));

  std::filesystem::remove_all(dir);
}
