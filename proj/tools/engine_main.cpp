// engine: command-line front end for ingest, query, serve and eval.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "threatrag/engine.hpp"
#include "threatrag/error.hpp"
#include "threatrag/server.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

int report_failure(const std::exception& e) {
  if (auto* err = dynamic_cast<const threatrag::Error*>(&e)) {
    std::cerr << "error [" << threatrag::to_string(err->code()) << "]: " << e.what() << "\n";
    switch (err->code()) {
      case threatrag::ErrorCode::config:
      case threatrag::ErrorCode::invalid_argument:
        return kUsageError;
      default:
        return kRuntimeFailure;
    }
  }
  std::cerr << "error: " << e.what() << "\n";
  return kRuntimeFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cyber-threat knowledge engine"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sources;

  auto* ingest = app.add_subcommand("ingest", "Load, chunk, embed and index the configured sources");
  ingest->add_option("--config", config_path, "Config file")->required();
  ingest->add_option("--source", sources, "Only this source (repeatable)");

  std::string query_text;
  std::optional<std::size_t> top_k;
  bool no_timing = false;
  auto* query = app.add_subcommand("query", "Answer one question from the indexed stores");
  query->add_option("text", query_text, "Question")->required();
  query->add_option("--config", config_path, "Config file")->required();
  query->add_option("--k", top_k, "Number of fused contexts")->check(CLI::PositiveNumber);
  query->add_flag("--no-timing", no_timing, "Report latency_ms as 0 (reproducible output)");

  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--config", config_path, "Config file")->required();

  std::string cases_path;
  std::string mode = "replay";
  std::optional<std::string> out_dir;
  auto* eval = app.add_subcommand("eval", "Score a case file and write report.json / report.csv");
  eval->add_option("--cases", cases_path, "JSON Lines case file")->required();
  eval->add_option("--mode", mode, "live or replay")->check(CLI::IsMember({"live", "replay"}));
  eval->add_option("--config", config_path, "Config file")->required();
  eval->add_option("--out", out_dir, "Report directory (default from config)");

  auto* chunks = app.add_subcommand("chunks", "Print the chunks of the configured sources as JSON Lines");
  chunks->add_option("--config", config_path, "Config file")->required();
  chunks->add_option("--source", sources, "Only this source (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    threatrag::Engine engine(threatrag::load_config(config_path));

    if (*ingest) {
      auto summary = engine.ingest(sources);
      std::cout << threatrag::to_json(summary).dump(2) << "\n";
      return summary.failed_sources.empty() ? kOk : kRuntimeFailure;
    }
    if (*query) {
      auto answer = engine.query(query_text, top_k);
      std::cout << threatrag::to_json(answer, !no_timing).dump(2) << "\n";
      return kOk;
    }
    if (*serve) {
      threatrag::serve_until_signal(engine);
      return kOk;
    }
    if (*eval) {
      auto outcome = engine.evaluate(cases_path, threatrag::parse_eval_mode(mode),
                                     out_dir ? std::optional<std::filesystem::path>(*out_dir) : std::nullopt);
      std::cout << threatrag::to_json(outcome).dump(2) << "\n";
      return outcome.hard_errors == 0 ? kOk : kRuntimeFailure;
    }
    if (*chunks) {
      auto all = engine.chunk_sources(sources);
      threatrag::write_chunks_jsonl(std::cout, all);
      return kOk;
    }
  } catch (const std::exception& e) {
    return report_failure(e);
  }
  return kUsageError;
}
