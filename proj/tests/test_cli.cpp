#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "atsim/sweep.hpp"

using namespace atsim;
namespace fs = std::filesystem;

namespace {

const fs::path kTmp = fs::temp_directory_path() / "atsim_cli_test";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Runs the CLI with `args`; stdout goes to `log` when given.
int run_cli(const std::string& args, const fs::path& log = {}, const std::string& env = {}) {
  std::string cmd = env.empty() ? std::string() : env + " ";
  cmd += std::string(ATSIM_CLI) + " " + args;
  cmd += log.empty() ? " >/dev/null" : " >" + log.string();
  cmd += " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh(const std::string& name) {
  const fs::path p = kTmp / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

/// FNV digest over every file name and content in a directory, sorted.
std::string tree_hash(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
  }
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += f.string() + '\0' + slurp(dir / f) + '\0';
  return fnv1a_hex(all);
}

}  // namespace

TEST_CASE("run: reached trial writes metrics and transcript") {
  const fs::path out = fresh("run");
  CHECK(run_cli("run --case 3 --scenario 1 --goal 6,0 --seed 42 --out " + out.string()) == 0);
  REQUIRE(fs::exists(out / "3-1-42.json"));
  REQUIRE(fs::exists(out / "3-1-42.transcript.jsonl"));
  const auto record = nlohmann::json::parse(slurp(out / "3-1-42.json"));
  CHECK(record.at("metrics").at("reached") == true);
  CHECK(record.at("metrics").at("goal_error").get<double>() <= 1.0);
  CHECK(record.at("config").at("seed") == 42);

  std::ifstream transcript(out / "3-1-42.transcript.jsonl");
  std::string first, line, last;
  std::getline(transcript, first);
  while (std::getline(transcript, line)) last = line;
  CHECK(nlohmann::json::parse(first).at("ev") == "config");
  CHECK(nlohmann::json::parse(last).at("ev") == "end");
}

TEST_CASE("run: identical flags give identical files") {
  const fs::path a = fresh("det_a");
  const fs::path b = fresh("det_b");
  const std::string args = "run --case 1 --scenario 2 --goal 6.8,2 --seed 7 --timeout 20 --out ";
  const int ca = run_cli(args + a.string());
  const int cb = run_cli(args + b.string());
  CHECK(ca == cb);
  CHECK(tree_hash(a) == tree_hash(b));
  CHECK_FALSE(slurp(a / "1-2-7.transcript.jsonl").empty());
}

TEST_CASE("run: exit codes") {
  const fs::path out = fresh("codes");
  const std::string o = " --out " + out.string();
  CHECK(run_cli("run --case 2 --scenario 1 --timeout 0" + o) == 2);
  CHECK(run_cli("run --case 7" + o) == 1);
  CHECK(run_cli("run --scenario 9" + o) == 1);
  CHECK(run_cli("run --goal 6" + o) == 1);
  CHECK(run_cli("run --bogus" + o) == 1);
  CHECK(run_cli("run --config " + (out / "missing.json").string() + o) == 1);
  CHECK(run_cli("run --config " + write_file(out / "bad.json", "{\"case_id\": 3,").string() + o) == 1);
  CHECK(run_cli("run --config " + write_file(out / "unknown.json", R"({"cse_id": 3})").string() + o) == 1);
  CHECK(run_cli("frobnicate" + o) == 1);
  CHECK(run_cli("") == 1);

  // An obstacle only the Client sees, with feedback disabled by an
  // unreachable threshold, ends in a collision.
  const fs::path crash = write_file(out / "crash.json", R"({
    "case_id": 3, "scenario_id": 1, "goal": [6, 0], "trial_timeout": 60, "force": {"f_th": 1000},
    "scenario_overrides": {"static_obstacles": [{"type": "rect", "x_min": 2.0, "x_max": 2.5,
                                                 "y_min": -0.5, "y_max": 0.5}]}})");
  CHECK(run_cli("run --config " + crash.string() + o) == 3);
  const auto record = nlohmann::json::parse(slurp(out / "3-1-0.json"));
  CHECK(record.at("metrics").at("outcome") == "collision");
}

TEST_CASE("AT_SIM_OUT sets the default output directory") {
  const fs::path out = fresh("env");
  CHECK(run_cli("run --case 0 --scenario 1 --timeout 0", {}, "AT_SIM_OUT=" + out.string()) == 2);
  CHECK(fs::exists(out / "0-1-0.json"));
  const fs::path flag = fresh("env_flag");
  CHECK(run_cli("run --case 0 --scenario 1 --timeout 0 --out " + flag.string(), {}, "AT_SIM_OUT=" + out.string() + "/x") ==
        2);
  CHECK(fs::exists(flag / "0-1-0.json"));
  CHECK_FALSE(fs::exists(out / "x"));
}

TEST_CASE("sweep and report") {
  const fs::path out = fresh("sweep");
  const fs::path log = out / "stdout.txt";
  CHECK(run_cli("sweep --case 1,3 --scenario 2 --seed 1,2 --goal 6,0 --pairing cross --timeout 4 --jobs 1 --out " +
                  (out / "tree").string(),
              log) == 0);
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(out / "tree")) dirs.push_back(e.path());
  REQUIRE(dirs.size() == 1);
  const fs::path dir = dirs.front();
  for (const char* f : {"1-2-1.json", "1-2-2.json", "3-2-1.json", "3-2-2.json", "aggregate.csv", "report.md",
                        "sweep.json"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK(slurp(log).find(dir.string()) != std::string::npos);

  // Rerunning the same spec reproduces the CSV bytes.
  CHECK(run_cli("sweep --config " + (dir / "sweep.json").string() + " --out " + (out / "again").string()) == 0);
  CHECK(slurp(out / "again" / dir.filename() / "aggregate.csv") == slurp(dir / "aggregate.csv"));

  const fs::path from_dir = out / "report_dir.txt";
  const fs::path from_csv = out / "report_csv.txt";
  CHECK(run_cli("report " + dir.string(), from_dir) == 0);
  CHECK(run_cli("report " + (dir / "aggregate.csv").string(), from_csv) == 0);
  CHECK(slurp(from_dir) == slurp(from_csv));
  CHECK(slurp(from_dir).find("### throughput_client") != std::string::npos);
  CHECK(slurp(from_dir).find("2. ") != std::string::npos);

  CHECK(run_cli("report " + (dir / "1-2-1.json").string(), from_dir) == 0);
  CHECK(slurp(from_dir).find("(1) |") != std::string::npos);

  CHECK(run_cli("report") == 1);
  CHECK(run_cli("report " + fresh("empty").string()) == 1);
  CHECK(run_cli("sweep --case 1 --trials 0 --out " + out.string()) == 1);
}

TEST_CASE("serve refuses non-console cases and busy ports") {
  CHECK(run_cli("serve --case 0 --port 0 --out " + fresh("serve").string()) == 1);
  CHECK(run_cli("serve --case 1 --port 0 --out " + fresh("serve").string()) == 1);

  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  REQUIRE(::listen(fd, 1) == 0);
  socklen_t len = sizeof addr;
  REQUIRE(::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
  const int busy = ntohs(addr.sin_port);
  CHECK(run_cli("serve --case 2 --port " + std::to_string(busy) + " --out " + fresh("serve").string()) == 1);
  ::close(fd);
}

TEST_CASE("scenarios regenerates the shipped catalog") {
  const fs::path out = fresh("catalog");
  CHECK(run_cli("scenarios --out " + out.string()) == 0);
  for (int id = 1; id <= kScenarioCount; ++id) {
    const std::string name = std::to_string(id) + ".json";
    CHECK(slurp(out / name) == slurp(fs::path(ATSIM_SOURCE_DIR) / "scenarios" / name));
  }
}
