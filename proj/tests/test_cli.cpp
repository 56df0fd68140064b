#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "gfm/cli/commands.hpp"

using namespace gfm;
using namespace gfm::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = GFMCF_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "gfmcf_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

struct Run {
  int code;
  std::string err;
};

Run tool(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + GFMCF_TOOL_PATH + "\" " + args + " > \"" +
                          (dir / "stdout.txt").string() + "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream f(p);
  std::string line;
  while (std::getline(f, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

std::string config_text(const std::string& circuit, const std::string& control, const std::string& extra = "") {
  return "[circuit]\nomega1_hz = 50\nl_f_pu = 0.1298\nr_pu = 0.026\n" + circuit + "\n[control]\n" + control +
         "\n[operating_point]\nmode = light_load\n" + extra;
}

}  // namespace

TEST_CASE("shortest round-trip formatting", "[cli]") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-0.0) == "0");
  CHECK(format_double(10.0) == "10");
  CHECK(format_double(1e-5) == "1e-05");
  for (double v : {0.1 + 0.2, 314.1592653589793, -1.0 / 3.0, 6.02e23}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("config parsing", "[cli]") {
  SECTION("defaults and units") {
    std::istringstream in(config_text("scr = 10", "scheme = scheme1\nk_p_per_omega1 = 0.03"));
    const auto cfg = parse_config(in);
    CHECK(cfg.circuit.l_g == 0.1);
    CHECK_THAT(cfg.ctrl.k_p, Catch::Matchers::WithinRel(0.03 * kTwoPi * 50.0, 1e-15));
    CHECK_FALSE(cfg.sweep);
    CHECK(cfg.ctrl.vff_enabled == false);
  }
  SECTION("current-controlled schemes default to feedforward") {
    std::istringstream in(config_text("scr = 10", "scheme = 3pi\ng_a = 3\nk_i = 100\nr_a = 0.865"));
    CHECK(parse_config(in).ctrl.vff_enabled);
  }
  SECTION("errors name the field") {
    auto fails_on = [](const std::string& text, const std::string& field) {
      std::istringstream in(text);
      try {
        parse_config(in);
      } catch (const ConfigError& e) {
        return std::string(e.what()).find(field) != std::string::npos;
      }
      return false;
    };
    CHECK(fails_on(config_text("scr = 10\nl_g_pu = 0.1", "scheme = 1"), "exactly one of"));
    CHECK(fails_on(config_text("", "scheme = 1"), "exactly one of"));
    CHECK(fails_on(config_text("scr = ten", "scheme = 1"), "circuit.scr"));
    CHECK(fails_on(config_text("scr = 10", "scheme = 1\nkp = 0.03"), "control.kp"));
    CHECK(fails_on(config_text("scr = 10", "scheme = 7"), "control.scheme"));
    CHECK(fails_on(config_text("scr = 10", "scheme = 1\ng_a = 0.5"), "control"));
    CHECK(fails_on(config_text("scr = -1", "scheme = 1"), "circuit.scr"));
    CHECK(fails_on(config_text("scr = 10", "scheme = 1", "[sweep]\nparam = scr\nvalues =\n"), "empty grid"));
    CHECK(fails_on(config_text("scr = 10", "scheme = 1", "[sweep]\nparam = scr\nvalues = 1, 3, 2\n"), "sweep"));
    CHECK(fails_on(config_text("scr = 10", "scheme = 1", "[bogus]\nx = 1\n"), "bogus"));
    CHECK(fails_on(config_text("scr = 10", "scheme = 1", "[sim]\ndecimation = 2.5\n"), "sim.decimation"));
  }
  SECTION("sweep grids") {
    std::istringstream a(config_text("scr = 10", "scheme = 1", "[sweep]\nparam = scr\nstart = 10\nstop = 1.5\n"));
    const auto ca = parse_config(a);
    REQUIRE(ca.sweep);
    CHECK(ca.sweep->grid.size() == 25);
    CHECK(ca.sweep->grid.back() == 1.5);
    std::istringstream b(config_text("scr = 10", "scheme = 1", "[sweep]\nparam = k_p_per_omega1\nvalues = 0.01, 0.02\n"));
    CHECK(parse_config(b).sweep->grid == std::vector<double>{0.01, 0.02});
  }
  SECTION("shipped configs parse") {
    for (const auto& e : fs::directory_iterator(kConfigs)) {
      INFO(e.path());
      CHECK_NOTHROW(load_config(e.path().string()));
    }
  }
}

TEST_CASE("poles command", "[cli]") {
  const auto dir = scratch("poles");
  REQUIRE(tool("--config " + (kConfigs / "default.ini").string() + " --out " + (dir / "a").string() + " poles", dir).code == 0);
  const auto rows = csv_rows(dir / "a" / "poles.csv");
  REQUIRE(rows.size() == 3);
  CHECK(slurp(dir / "a" / "poles.csv").starts_with("scheme,param_name,param_value,source,re1,im1,re2,im2,re3,im3\n"));
  CHECK(rows[1][3] == "closed_form");
  CHECK(rows[2][3] == "exact");
  for (int r : {1, 2})
    for (int c : {4, 6, 8}) CHECK(std::stod(rows[r][c]) < 0.0);
  const auto summary = json::parse(slurp(dir / "a" / "summary.json"));
  CHECK(summary["diagnostics"]["conditions_met"] == true);
  CHECK(summary["verdicts"].size() == 5);

  // Byte-identical reruns.
  REQUIRE(tool("--config " + (kConfigs / "default.ini").string() + " --out " + (dir / "b").string() + " poles", dir).code == 0);
  CHECK(slurp(dir / "a" / "poles.csv") == slurp(dir / "b" / "poles.csv"));
  CHECK(slurp(dir / "a" / "summary.json") == slurp(dir / "b" / "summary.json"));

  // Scheme 2 at zero AVC gain reproduces scheme 1.
  write(dir / "s2.ini", config_text("scr = 10", "scheme = scheme2\nk_p_per_omega1 = 0.03\ng_a = 0"));
  REQUIRE(tool("--config " + (dir / "s2.ini").string() + " --out " + (dir / "c").string() + " poles", dir).code == 0);
  const auto rows2 = csv_rows(dir / "c" / "poles.csv");
  REQUIRE(rows2.size() == 3);
  CHECK(rows2[1][0] == "scheme2");
  CHECK(std::vector(rows2[1].begin() + 1, rows2[1].end()) == std::vector(rows[1].begin() + 1, rows[1].end()));
}

TEST_CASE("config errors exit with code 2", "[cli]") {
  const auto dir = scratch("config_errors");
  write(dir / "both.ini", config_text("scr = 10\nl_g_pu = 0.1", "scheme = 1"));
  const auto r = tool("--config " + (dir / "both.ini").string() + " --out " + dir.string() + " poles", dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("exactly one of") != std::string::npos);
  CHECK(tool("--config " + (dir / "missing.ini").string() + " poles", dir).code == 2);
  CHECK(tool("poles", dir).code == 2);
  CHECK(tool("--config " + (kConfigs / "default.ini").string() + " frobnicate", dir).code == 2);
}

TEST_CASE("freqresp command", "[cli]") {
  const auto dir = scratch("freqresp");
  const std::string cfg = "--config " + (kConfigs / "default.ini").string();
  REQUIRE(tool(cfg + " --out " + (dir / "a").string() + " freqresp", dir).code == 0);
  auto rows = csv_rows(dir / "a" / "bode.csv");
  CHECK(rows.size() == 201);
  CHECK(slurp(dir / "a" / "bode.csv").starts_with("freq_hz,source,mag_db,phase_deg\n"));

  const std::string cfg5 = "--config " + (kConfigs / "example5_scr11p6.ini").string();
  REQUIRE(tool(cfg5 + " --out " + (dir / "b").string() + " freqresp --band 1:25 --points 50", dir).code == 0);
  rows = csv_rows(dir / "b" / "bode.csv");
  REQUIRE(rows.size() == 51);
  CHECK(std::stod(rows[1][0]) == 1.0);
  CHECK(std::stod(rows[50][0]) == 25.0);

  REQUIRE(tool(cfg + " --out " + (dir / "c").string() + " freqresp --band 40:60 --points 3 --with-scan", dir).code == 0);
  rows = csv_rows(dir / "c" / "bode.csv");
  REQUIRE(rows.size() == 7);
  CHECK(rows[1][1] == "model");
  CHECK(rows[2][1] == "scan");
  CHECK(rows[1][0] == rows[2][0]);
  CHECK(std::abs(std::stod(rows[1][2]) - std::stod(rows[2][2])) < 0.2);

  write(dir / "unstable.ini", config_text("scr = 10", "scheme = 1\nk_p_per_omega1 = 0.08"));
  const auto r = tool("--config " + (dir / "unstable.ini").string() + " --out " + (dir / "d").string() +
                          " freqresp --points 3 --with-scan",
                      dir);
  CHECK(r.code == 3);
  CHECK(r.err.find("pole") != std::string::npos);
  CHECK(tool(cfg + " --out " + (dir / "e").string() + " freqresp --band 25:1", dir).code == 2);
}

TEST_CASE("simulate command", "[cli]") {
  const auto dir = scratch("simulate");
  write(dir / "flat.ini", config_text("scr = 10", "scheme = 1", "[sim]\nt_end = 0.1\n"));
  REQUIRE(tool("--config " + (dir / "flat.ini").string() + " --out " + (dir / "a").string() + " simulate --step 0", dir).code == 0);
  const auto rows = csv_rows(dir / "a" / "timeseries.csv");
  CHECK(rows.front() == std::vector<std::string>{"t_s", "p_pu", "e_d_pu", "e_q_pu", "i_d_pu", "i_q_pu", "theta_rad"});
  REQUIRE(rows.size() == 1 + 1201);  // 0.12 s at 1e-4 s
  double dev = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) dev = std::max(dev, std::abs(std::stod(rows[i][1])));
  CHECK(dev <= 1e-6);

  REQUIRE(tool("--config " + (dir / "flat.ini").string() + " --out " + (dir / "b").string() + " simulate --step 0.05", dir).code == 0);
  REQUIRE(tool("--config " + (dir / "flat.ini").string() + " --out " + (dir / "c").string() + " simulate --step 0.05", dir).code == 0);
  CHECK(slurp(dir / "b" / "timeseries.csv") == slurp(dir / "c" / "timeseries.csv"));

  write(dir / "diverge.ini",
        config_text("scr = 10", "scheme = 1\nk_p_per_omega1 = 0.08", "[sim]\nt_end = 5\ndivergence_limit = 10\n"));
  const auto r = tool("--config " + (dir / "diverge.ini").string() + " --out " + (dir / "d").string() + " simulate", dir);
  CHECK(r.code == 4);
  CHECK(fs::exists(dir / "d" / "timeseries.csv.aborted"));
  CHECK_FALSE(fs::exists(dir / "d" / "timeseries.csv"));
  CHECK(csv_rows(dir / "d" / "timeseries.csv.aborted").size() > 10);
}

TEST_CASE("sweep command", "[cli]") {
  const auto dir = scratch("sweep");
  REQUIRE(tool("--config " + (kConfigs / "sweep_kp_scheme1.ini").string() + " --out " + (dir / "a").string() + " sweep", dir).code == 0);
  const auto rows = csv_rows(dir / "a" / "sweep.csv");
  CHECK(slurp(dir / "a" / "sweep.csv").starts_with("index,scheme,param_name,param_value,source,re1,im1,re2,im2,re3,im3\n"));
  CHECK(rows.size() == 1 + 50);
  const auto j = json::parse(slurp(dir / "a" / "crossings.json"));
  REQUIRE(j["crossings"].size() == 1);
  const double x = j["crossings"][0]["value"];
  CHECK(std::abs(x - 0.052) / 0.052 < 0.1);
  const double lo = j["crossings"][0]["bracket"][0], hi = j["crossings"][0]["bracket"][1];
  CHECK(lo < x);
  CHECK(x < hi);

  REQUIRE(tool("--config " + (kConfigs / "sweep_ga_scheme3pi.ini").string() + " --out " + (dir / "b").string() + " sweep", dir).code == 0);
  const auto g = csv_rows(dir / "b" / "sweep.csv");
  std::vector<double> re;
  for (std::size_t i = 1; i < g.size(); ++i)
    if (g[i][4] == "closed_form") re.push_back(std::stod(g[i][5]));
  REQUIRE(re.size() == 25);
  for (std::size_t i = 1; i < re.size(); ++i) CHECK(re[i] < re[i - 1]);

  write(dir / "empty.ini", config_text("scr = 10", "scheme = 1", "[sweep]\nparam = scr\nvalues =\n"));
  CHECK(tool("--config " + (dir / "empty.ini").string() + " --out " + (dir / "c").string() + " sweep", dir).code == 2);
  CHECK(tool("--config " + (kConfigs / "default.ini").string() + " --out " + (dir / "d").string() + " sweep", dir).code == 2);
}

TEST_CASE("check command", "[cli]") {
  const auto dir = scratch("check");
  CHECK(tool("--config " + (kConfigs / "default.ini").string() + " --out " + (dir / "a").string() + " check", dir).code == 0);
  const auto ja = json::parse(slurp(dir / "a" / "report.json"));
  CHECK(ja["pass"] == true);
  CHECK(ja["verdicts"][0]["rule"] == "KpMax1");

  write(dir / "ex5.ini", config_text("scr = 10", "scheme = 3pi\ng_a = 3\nk_i = 100\nr_a = 0.865"));
  CHECK(tool("--config " + (dir / "ex5.ini").string() + " --out " + (dir / "b").string() + " check", dir).code == 5);
  const auto jb = json::parse(slurp(dir / "b" / "report.json"));
  CHECK(jb["verdicts"][3]["rule"] == "ScrSufficiency");
  CHECK(jb["verdicts"][3]["satisfied"] == false);
  CHECK(jb["verdicts"][3]["margin"].get<double>() < 0.0);

  // G_a - k_i/w1 = 5.5 and SCR 4.
  std::ostringstream ga;
  ga.precision(17);
  ga << 5.5 + 100.0 / (kTwoPi * 50.0);
  write(dir / "strong.ini", config_text("scr = 4", "scheme = 3pi\ng_a = " + ga.str() + "\nk_i = 100\nr_a = 0.865"));
  CHECK(tool("--config " + (dir / "strong.ini").string() + " --out " + (dir / "c").string() + " check", dir).code == 0);

  const std::string seeded = "--config " + (dir / "strong.ini").string() + " --seed 9 --out ";
  REQUIRE(tool(seeded + (dir / "d").string() + " check --samples 50", dir).code == 0);
  REQUIRE(tool(seeded + (dir / "e").string() + " check --samples 50", dir).code == 0);
  CHECK(slurp(dir / "d" / "report.json") == slurp(dir / "e" / "report.json"));
  const auto jd = json::parse(slurp(dir / "d" / "report.json"));
  REQUIRE(jd["randomized"].size() == 2);
  CHECK(jd["randomized"][0]["counterexamples"] == 0);
}
