#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = EGB_CLI_PATH;
const std::string kSrc = EGB_SOURCE_DIR;

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CommandResult run(const std::string& args) {
  const std::string out_file = "/tmp/egb_cli_test_output.txt";
  const std::string cmd = kCli + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  CommandResult r;
  r.exit_code = WEXITSTATUS(status);
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string demo(const std::string& name) { return kSrc + "/demo/" + name; }

std::string write_prompt_file() {
  const std::string path = "/tmp/egb_cli_test_prompt.txt";
  std::ofstream(path) << "Problem: 12 + 30?\n";
  return path;
}

std::string model_flags() {
  return "--model scripted:" + demo("model.json") + " --verifier oracle:" +
         demo("oracle.json");
}

}  // namespace

TEST_CASE("solve happy path prints the answer and writes artifacts") {
  const std::string out = "/tmp/egb_cli_test_result.json";
  const std::string trace = "/tmp/egb_cli_test_trace.jsonl";
  CommandResult r = run("solve --method egb --tau 1.5 --K 4 --W 4 --seed 1 " +
                        model_flags() + " --prompt-file " + write_prompt_file() +
                        " --out " + out + " --trace-out " + trace + " --no-timing");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("answer: 42") != std::string::npos);

  auto result = nlohmann::json::parse(std::ifstream(out));
  CHECK(result["answer"] == "42");
  // The artifact echoes the full effective config, defaults included.
  CHECK(result["config"]["tau"] == 1.5);
  CHECK(result["config"]["beam_size"] == 4);
  CHECK(result["config"]["base_temperature"] == 0.7);
  CHECK(result["config"]["aggregation"] == "last");

  std::ifstream tf(trace);
  std::string first_line;
  std::getline(tf, first_line);
  CHECK(nlohmann::json::parse(first_line).contains("entropy_bits"));
}

TEST_CASE("invalid tau exits with the config error code and names the flag") {
  CommandResult r = run("solve --tau -1 " + model_flags() + " --prompt-file " +
                        write_prompt_file());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("tau") != std::string::npos);
}

TEST_CASE("invalid model spec and missing prompt are config errors") {
  CHECK(run("solve --model nonsense:foo --prompt x").exit_code == 2);
  CHECK(run("solve " + model_flags()).exit_code == 2);
  CHECK(run("solve --model remote --prompt x").exit_code == 2);  // no EGB_MODEL_URL
}

TEST_CASE("bench writes a report with accuracy and config echo") {
  const std::string out = "/tmp/egb_cli_test_report.json";
  CommandResult r = run("bench --dataset " + demo("dataset.jsonl") +
                        " --method egb --tau 1.5 --K 4 --W 4 --seed 3 --no-timing " +
                        model_flags() + " --out " + out);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("accuracy: 1") != std::string::npos);
  auto report = nlohmann::json::parse(std::ifstream(out));
  CHECK(report["aggregate"]["accuracy"] == 1.0);
  CHECK(report["config"]["beam_width"] == 4);
  CHECK(report["per_problem"].size() == 1);
}

TEST_CASE("sweep writes one report per value plus a summary CSV") {
  const std::string dir = "/tmp/egb_cli_test_sweep";
  fs::remove_all(dir);
  fs::create_directories(dir);
  CommandResult r = run("sweep --dataset " + demo("dataset.jsonl") +
                        " --axis tau --values 0,1.5,inf --K 2 --W 2 --seed 5 --no-timing " +
                        model_flags() + " --out-dir " + dir);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(dir + "/summary.csv"));
  CHECK(fs::exists(dir + "/report_tau_0.json"));
  CHECK(fs::exists(dir + "/report_tau_1.5.json"));
  CHECK(fs::exists(dir + "/report_tau_inf.json"));

  std::ifstream csv(dir + "/summary.csv");
  std::string header, row0;
  std::getline(csv, header);
  std::getline(csv, row0);
  CHECK(header.rfind("axis,value,method", 0) == 0);
  CHECK(row0.find("beam_search") != std::string::npos);  // tau=0 endpoint label
}

TEST_CASE("render converts a trace to a deterministic SVG") {
  const std::string trace = "/tmp/egb_cli_test_trace2.jsonl";
  const std::string svg = "/tmp/egb_cli_test_plot.svg";
  CommandResult solve = run("solve --method egb --tau 1.5 --K 2 --W 2 --seed 1 " +
                            model_flags() + " --prompt-file " + write_prompt_file() +
                            " --trace-out " + trace + " --no-timing");
  REQUIRE(solve.exit_code == 0);
  CommandResult r = run("render --trace " + trace + " --out " + svg + " --tau 1.5");
  CHECK(r.exit_code == 0);
  std::ifstream in(svg);
  std::string first;
  std::getline(in, first);
  CHECK(first.rfind("<svg", 0) == 0);

  const std::string svg2 = svg + ".again";
  run("render --trace " + trace + " --out " + svg2 + " --tau 1.5");
  std::stringstream a, b;
  a << std::ifstream(svg).rdbuf();
  b << std::ifstream(svg2).rdbuf();
  CHECK(a.str() == b.str());

  CHECK(run("render --trace /tmp/egb_cli_no_such_trace.jsonl --out " + svg).exit_code != 0);
}

TEST_CASE("config file values merge under explicit flags") {
  const std::string cfg_path = "/tmp/egb_cli_test_cfg.json";
  std::ofstream(cfg_path) << R"({"tau": 1.5, "beam_size": 2, "beam_width": 4})";
  const std::string out = "/tmp/egb_cli_test_cfg_result.json";
  CommandResult r = run("solve --config " + cfg_path + " --K 4 --seed 1 " + model_flags() +
                        " --prompt-file " + write_prompt_file() + " --out " + out +
                        " --no-timing");
  REQUIRE(r.exit_code == 0);
  auto result = nlohmann::json::parse(std::ifstream(out));
  CHECK(result["config"]["beam_size"] == 4);   // flag wins
  CHECK(result["config"]["beam_width"] == 4);  // file value kept
  CHECK(result["config"]["tau"] == 1.5);
}
