#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "egb/harness.hpp"
#include "egb/remote.hpp"
#include "egb/trace.hpp"

namespace {

using namespace egb;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string env_or(const char* name, const std::string& fallback = "") {
  const char* v = std::getenv(name);
  return v ? v : fallback;
}

/// Flag values shared by solve/bench/sweep, merged over an optional JSON
/// config file (flags win).
struct CommonFlags {
  std::string config_path;
  std::string tau;
  int K = -1, W = -1, max_steps = -1;
  long long seed = -1;
  std::string method;
  std::string aggregation;
  std::string model_spec = "scripted:demo/model.json";
  std::string verifier_spec = "oracle:demo/oracle.json";
  std::string model_vocab_path;
  int workers = 1;
  bool no_timing = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file (flags override it)");
  cmd->add_option("--tau", f.tau, "entropy threshold in bits; 'inf' disables branching");
  cmd->add_option("--K", f.K, "beam size");
  cmd->add_option("--W", f.W, "beam width (branches per uncertain beam)");
  cmd->add_option("--max-steps", f.max_steps, "maximum reasoning steps");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--method", f.method, "standard|beam_search|egb|self_consistency");
  cmd->add_option("--aggregation", f.aggregation, "last|min|product|mean");
  cmd->add_option("--model", f.model_spec, "scripted:<path>|ngram:<path>|remote");
  cmd->add_option("--verifier", f.verifier_spec, "oracle:<path>|scripted:<path>|remote");
  cmd->add_option("--model-vocab", f.model_vocab_path,
                  "JSON array of token texts (remote model only)");
  cmd->add_option("--workers", f.workers, "worker pool size");
  cmd->add_flag("--no-timing", f.no_timing,
                "report wall times as 0 so output artifacts are byte-stable");
}

SearchConfig build_config(const CommonFlags& f) {
  SearchConfig cfg;
  if (!f.config_path.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(f.config_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config file: ") + e.what());
    }
    cfg = config_from_json(j, cfg);
  }
  if (!f.tau.empty()) {
    if (f.tau == "inf" || f.tau == "infinity") {
      cfg.tau = kTauInfinity;
    } else {
      try {
        cfg.tau = std::stod(f.tau);
      } catch (const std::exception&) {
        throw ConfigError("invalid --tau value \"" + f.tau + "\"");
      }
    }
  }
  if (f.K >= 0) cfg.beam_size = f.K;
  if (f.W >= 0) cfg.beam_width = f.W;
  if (f.max_steps >= 0) cfg.max_steps = f.max_steps;
  if (f.seed >= 0) cfg.seed = static_cast<uint64_t>(f.seed);
  if (!f.method.empty()) cfg = config_for_method(method_from_string(f.method), cfg);
  if (!f.aggregation.empty()) cfg.aggregation = aggregation_rule_from_string(f.aggregation);
  if (f.no_timing) cfg.record_timing = false;
  cfg.validate();
  return cfg;
}

struct LoadedModel {
  std::shared_ptr<SequenceModel> model;
};

LoadedModel load_model(const CommonFlags& f) {
  const std::string& spec = f.model_spec;
  if (spec.rfind("scripted:", 0) == 0) {
    return {std::make_shared<ScriptedModel>(ScriptedModel::load(spec.substr(9)))};
  }
  if (spec.rfind("ngram:", 0) == 0) {
    return {std::make_shared<NgramModel>(load_ngram_model(spec.substr(6)))};
  }
  if (spec == "remote") {
    RemoteModelOptions opt;
    opt.transport.url = env_or("EGB_MODEL_URL");
    opt.transport.token = env_or("EGB_MODEL_TOKEN");
    if (opt.transport.url.empty())
      throw ConfigError("--model remote requires EGB_MODEL_URL");
    if (f.model_vocab_path.empty())
      throw ConfigError("--model remote requires --model-vocab");
    nlohmann::json v;
    try {
      v = nlohmann::json::parse(read_file(f.model_vocab_path));
      opt.vocab = v.get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("model vocab file: ") + e.what());
    }
    return {std::make_shared<RemoteModel>(std::move(opt))};
  }
  throw ConfigError("invalid --model spec \"" + spec + "\"");
}

std::shared_ptr<Verifier> load_verifier(const CommonFlags& f) {
  const std::string& spec = f.verifier_spec;
  if (spec.rfind("oracle:", 0) == 0) return OracleVerifier::load(spec.substr(7));
  if (spec.rfind("scripted:", 0) == 0) return ScriptedVerifier::load(spec.substr(9));
  if (spec == "remote") {
    RemoteOptions opt;
    opt.url = env_or("EGB_PRM_URL");
    opt.token = env_or("EGB_PRM_TOKEN");
    if (opt.url.empty()) throw ConfigError("--verifier remote requires EGB_PRM_URL");
    return std::make_shared<RemotePrmVerifier>(opt);
  }
  throw ConfigError("invalid --verifier spec \"" + spec + "\"");
}

nlohmann::json result_to_json(const SearchResult& result, const std::string& answer) {
  nlohmann::json beams = nlohmann::json::array();
  for (const Beam& b : result.all_beams) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& [text, score] : b.steps)
      steps.push_back({{"text", text}, {"score", score.value}});
    beams.push_back({{"id", b.id},
                     {"finished", b.finished},
                     {"solution", b.solution_text()},
                     {"steps", steps},
                     {"branch_events", b.branch_events.size()},
                     {"aggregate", b.steps.empty()
                                       ? 0.0
                                       : b.aggregate(result.config.aggregation)}});
  }
  return {{"answer", answer},
          {"config", config_to_json(result.config)},
          {"best_index", result.best_index},
          {"beams", beams},
          {"counters",
           {{"candidates_generated", result.total_candidates_generated},
            {"model_calls", result.total_model_calls},
            {"verifier_calls", result.total_verifier_calls},
            {"wall_time_ms", result.wall_time_ms}}},
          {"per_step_pool_sizes", result.per_step_pool_sizes}};
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file " + path);
  out << content;
  if (!out) throw Error("write failure for " + path);
}

int run_solve(const CommonFlags& f, const std::string& prompt_flag,
              const std::string& prompt_file, const std::string& trace_out,
              const std::string& out_path) {
  SearchConfig cfg = build_config(f);
  std::string prompt = prompt_flag;
  if (!prompt_file.empty()) prompt = read_file(prompt_file);
  if (prompt.empty()) throw ConfigError("solve requires --prompt or --prompt-file");

  LoadedModel lm = load_model(f);
  auto verifier = load_verifier(f);
  SearchResult result = run_search(prompt, cfg, *lm.model, *verifier);
  const std::string answer =
      extract_answer(result.best_beam().solution_text(), cfg.step_rule.terminal_markers);

  std::cout << "answer: " << answer << "\n"
            << "candidates=" << result.total_candidates_generated
            << " model_calls=" << result.total_model_calls
            << " verifier_calls=" << result.total_verifier_calls << "\n";
  if (!out_path.empty()) write_file(out_path, result_to_json(result, answer).dump(2) + "\n");
  if (!trace_out.empty()) {
    std::ostringstream sink;
    emit_trace(result, sink);
    write_file(trace_out, sink.str());
  }
  return 0;
}

int run_bench(const CommonFlags& f, const std::string& dataset_path,
              const std::string& out_path) {
  SearchConfig cfg = build_config(f);
  if (dataset_path.empty()) throw ConfigError("bench requires --dataset");
  auto dataset = load_dataset(dataset_path);
  LoadedModel lm = load_model(f);
  auto verifier = load_verifier(f);
  RunReport report = run_benchmark(dataset, cfg, *lm.model, *verifier, f.workers);
  std::cout << "accuracy: " << report.accuracy << " over " << report.per_problem.size()
            << " problems (" << report.failures << " failures)\n";
  if (!out_path.empty()) write_file(out_path, report_to_json(report).dump(2) + "\n");
  return 0;
}

int run_sweep(const CommonFlags& f, const std::string& dataset_path, const std::string& axis,
              const std::string& values_csv, const std::string& out_dir) {
  SearchConfig cfg = build_config(f);
  if (dataset_path.empty()) throw ConfigError("sweep requires --dataset");
  if (values_csv.empty()) throw ConfigError("sweep requires --values");
  std::vector<double> values;
  std::stringstream ss(values_csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "inf" || item == "infinity") {
      values.push_back(kTauInfinity);
    } else {
      try {
        values.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("invalid sweep value \"" + item + "\"");
      }
    }
  }
  auto dataset = load_dataset(dataset_path);
  LoadedModel lm = load_model(f);
  auto verifier = load_verifier(f);
  auto reports = sweep(dataset, cfg, sweep_axis_from_string(axis), values, *lm.model,
                       *verifier, f.workers);

  std::ostringstream csv;
  csv << "axis,value,method,accuracy,mean_candidates,total_budget,failures\n";
  for (size_t i = 0; i < reports.size(); ++i) {
    const RunReport& r = reports[i];
    const std::string vs = std::isinf(r.sweep_value)
                               ? "inf"
                               : ([&] {
                                   char buf[32];
                                   std::snprintf(buf, sizeof(buf), "%g", r.sweep_value);
                                   return std::string(buf);
                                 })();
    csv << r.sweep_axis << "," << vs << "," << r.method << "," << r.accuracy << ","
        << r.mean_candidates << "," << r.total_budget << "," << r.failures << "\n";
    if (!out_dir.empty())
      write_file(out_dir + "/report_" + axis + "_" + vs + ".json",
                 report_to_json(r).dump(2) + "\n");
    std::cout << r.sweep_axis << "=" << vs << " method=" << r.method
              << " accuracy=" << r.accuracy << "\n";
  }
  if (!out_dir.empty()) write_file(out_dir + "/summary.csv", csv.str());
  return 0;
}

int run_render(const std::string& trace_path, const std::string& out_path,
               const std::string& tau, bool no_varentropy, bool no_branches) {
  if (trace_path.empty()) throw ConfigError("render requires --trace");
  if (out_path.empty()) throw ConfigError("render requires --out");
  RenderOptions opt;
  opt.show_varentropy = !no_varentropy;
  opt.mark_branches = !no_branches;
  if (!tau.empty() && tau != "inf") {
    try {
      opt.threshold_line = std::stod(tau);
    } catch (const std::exception&) {
      throw ConfigError("invalid --tau value \"" + tau + "\"");
    }
  }
  render_trace(trace_path, out_path, opt);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropy-gated branching search"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string prompt, prompt_file, trace_out, out_path, dataset_path;
  std::string axis, values_csv, out_dir, trace_path, render_out, render_tau;
  bool no_varentropy = false, no_branches = false;

  CLI::App* solve = app.add_subcommand("solve", "solve one problem");
  add_common(solve, flags);
  solve->add_option("--prompt", prompt, "problem statement");
  solve->add_option("--prompt-file", prompt_file, "file with the problem statement");
  solve->add_option("--trace-out", trace_out, "write trace JSONL here");
  solve->add_option("--out", out_path, "write result JSON here");

  CLI::App* bench = app.add_subcommand("bench", "run a benchmark");
  add_common(bench, flags);
  bench->add_option("--dataset", dataset_path, "dataset JSONL");
  bench->add_option("--out", out_path, "write report JSON here");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "sweep one config axis");
  add_common(sweep_cmd, flags);
  sweep_cmd->add_option("--dataset", dataset_path, "dataset JSONL");
  sweep_cmd->add_option("--axis", axis, "tau|K|W|budget")->required();
  sweep_cmd->add_option("--values", values_csv, "comma-separated values; 'inf' allowed");
  sweep_cmd->add_option("--out-dir", out_dir, "directory for reports and summary CSV");

  CLI::App* render = app.add_subcommand("render", "render a trace to SVG");
  render->add_option("--trace", trace_path, "trace JSONL");
  render->add_option("--out", render_out, "output SVG path");
  render->add_option("--tau", render_tau, "draw the threshold line at this value");
  render->add_flag("--no-varentropy", no_varentropy, "hide the varentropy series");
  render->add_flag("--no-branches", no_branches, "hide branch markers");

  try {
    app.parse(argc, argv);
    if (solve->parsed()) return run_solve(flags, prompt, prompt_file, trace_out, out_path);
    if (bench->parsed()) return run_bench(flags, dataset_path, out_path);
    if (sweep_cmd->parsed())
      return run_sweep(flags, dataset_path, axis, values_csv, out_dir);
    if (render->parsed())
      return run_render(trace_path, render_out, render_tau, no_varentropy, no_branches);
    return 2;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const egb::TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return 3;
  } catch (const egb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const egb::ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
