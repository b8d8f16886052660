// Command-line front end: simulate, train, eval, serve, replay.

#include <atomic>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "gvfswitch/engine.hpp"
#include "gvfswitch/offline.hpp"
#include "gvfswitch/server.hpp"

using namespace gvfswitch;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

EngineConfig base_config(const std::string& path) { return path.empty() ? EngineConfig{} : load_config(path); }

int cmd_simulate(double duration, std::optional<std::uint64_t> seed, const std::string& config_path,
                 const std::string& out) {
  EngineConfig config = base_config(config_path);
  config.mode = RunMode::Scripted;
  if (seed) config.seed = *seed;
  const auto ticks = static_cast<std::int64_t>(std::llround(duration * config.tick_rate_hz));
  Engine engine(config);
  engine.set_telemetry(false);
  engine.open_log(out);
  LoopOptions opt;
  opt.max_ticks = ticks;
  const LoopStats stats = run_loop(engine, opt);
  std::printf("simulated %lld ticks (seed %llu, config %s) -> %s\n", static_cast<long long>(stats.ticks),
              static_cast<unsigned long long>(config.seed), hash_hex(engine.config_hash()).c_str(), out.c_str());
  std::printf("core work: mean %.4f ms, p99 %.4f ms\n", stats.core_mean_ms, stats.core_p99_ms);
  return 0;
}

int cmd_train(const std::string& in, int passes, const std::string& out, const std::string& curve) {
  const TrainResult result = train_offline(in, passes);
  save_model(out, result.model);
  nlohmann::json j = nlohmann::json::array();
  std::printf("%-6s %-16s %12s %12s\n", "pass", "question", "online_rmse", "frozen_rmse");
  for (const auto& p : result.passes) {
    nlohmann::json qs = nlohmann::json::array();
    for (std::size_t q = 0; q < p.frozen.size(); ++q) {
      std::printf("%-6d %-16s %12.5f %12.5f\n", p.pass, p.frozen[q].id.c_str(), p.online[q].rmse, p.frozen[q].rmse);
      qs.push_back({{"id", p.frozen[q].id}, {"online_rmse", p.online[q].rmse}, {"frozen_rmse", p.frozen[q].rmse}});
    }
    j.push_back({{"pass", p.pass}, {"questions", qs}});
  }
  if (!curve.empty()) {
    std::ofstream f(curve);
    if (!f) throw FormatError("cannot write " + curve);
    f << j.dump(2) << '\n';
  }
  std::printf("model -> %s\n", out.c_str());
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& in, const std::string& report_path, bool online,
             bool allow_mismatch) {
  const SessionLog log = read_log(in);
  if (log.truncation) std::fprintf(stderr, "warning: %s\n", log.truncation->c_str());
  const ModelFile model = load_model(model_path, log.header.config_hash, allow_mismatch);
  EvalOptions opt;
  opt.online = online;
  opt.allow_mismatch = allow_mismatch;
  const EvalReport report = evaluate(model, log, opt);
  std::fputs(report_table(report).c_str(), stdout);
  if (!report_path.empty()) {
    std::ofstream f(report_path);
    if (!f) throw FormatError("cannot write " + report_path);
    f << report_to_json(report).dump(2) << '\n';
  }
  return 0;
}

struct ServeArgs {
  unsigned short port = 8765;
  std::string mode = "scripted";
  std::string model;
  std::string config;
  std::string log;
  std::string static_dir;
  double duration = 0.0;
  bool allow_mismatch = false;
};

int run_server(Engine& engine, const ServeArgs& args) {
  BoundedQueue<Command> commands(64);
  ServerOptions so;
  so.port = args.port;
  so.static_dir = args.static_dir;
  const auto ids = engine.question_ids();
  const std::string mode = run_mode_name(engine.config().mode);
  const double rate = engine.config().tick_rate_hz;
  TelemetryServer server(so, commands, [=](const std::string& role) { return hello_message(role, ids, mode, rate); });
  server.start();
  std::printf("listening on ws://127.0.0.1:%u (%s)\n", server.port(), mode.c_str());
  std::fflush(stdout);

  LoopOptions opt;
  opt.paced = true;
  opt.stop = &g_stop;
  opt.commands = &commands;
  if (args.duration > 0) opt.max_ticks = static_cast<std::int64_t>(std::llround(args.duration * rate));
  opt.on_tick = [&](const TickOutput& out) { server.publish(out.messages); };
  const LoopStats stats = run_loop(engine, opt);
  server.stop();
  std::printf("%lld ticks, %lld overruns, core mean %.4f ms, p99 %.4f ms, telemetry dropped %llu\n",
              static_cast<long long>(stats.ticks), static_cast<long long>(stats.overruns), stats.core_mean_ms,
              stats.core_p99_ms, static_cast<unsigned long long>(server.telemetry_dropped()));
  return 0;
}

int cmd_serve(const ServeArgs& args) {
  EngineConfig config = base_config(args.config);
  config.mode = parse_run_mode(args.mode);
  if (config.mode == RunMode::Replay) throw ConfigError("serve runs scripted or piloted; use replay for logs");
  Engine engine(config);
  if (!args.model.empty()) engine.load_model(load_model(args.model, engine.config_hash(), args.allow_mismatch),
                                             args.allow_mismatch);
  if (!args.log.empty()) engine.open_log(args.log);
  return run_server(engine, args);
}

int cmd_replay(const std::string& in, const ServeArgs& args) {
  const SessionLog log = read_log(in);
  if (log.truncation) std::fprintf(stderr, "warning: %s\n", log.truncation->c_str());
  EngineConfig config = config_from_log(log);
  config.mode = RunMode::Replay;
  Engine engine(config);
  if (!args.model.empty()) engine.load_model(load_model(args.model, engine.config_hash(), args.allow_mismatch),
                                             args.allow_mismatch);
  std::vector<TimeStepSample> samples;
  samples.reserve(log.records.size());
  for (const auto& r : log.records) samples.push_back(r.sample);
  engine.set_replay(std::move(samples));
  return run_server(engine, args);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predictive joint switching for a simulated myoelectric arm"};
  app.require_subcommand(1);

  double duration = 600.0;
  std::uint64_t seed = 0;
  std::string config_path, out, in, model, report, curve;
  int passes = 5;
  bool online = false, allow_mismatch = false;
  ServeArgs serve;

  auto* sim = app.add_subcommand("simulate", "headless scripted session to a log");
  sim->add_option("--duration", duration, "seconds")->check(CLI::PositiveNumber);
  auto* seed_opt = sim->add_option("--seed", seed);
  sim->add_option("--config", config_path)->check(CLI::ExistingFile);
  sim->add_option("--out", out)->required();

  auto* train = app.add_subcommand("train", "offline multi-pass training over a log");
  train->add_option("--in", in)->required()->check(CLI::ExistingFile);
  train->add_option("--passes", passes)->check(CLI::PositiveNumber);
  train->add_option("--out", out)->required();
  train->add_option("--curve", curve, "per-pass RMSE as JSON");

  auto* eval = app.add_subcommand("eval", "replay a log against a model and report");
  eval->add_option("--model", model)->required()->check(CLI::ExistingFile);
  eval->add_option("--in", in)->required()->check(CLI::ExistingFile);
  eval->add_option("--report", report, "JSON report path");
  eval->add_flag("--online", online, "keep learning during the replay");
  eval->add_flag("--allow-mismatch", allow_mismatch);

  auto* srv = app.add_subcommand("serve", "live engine with WebSocket telemetry");
  srv->add_option("--port", serve.port);
  srv->add_option("--mode", serve.mode)->check(CLI::IsMember({"scripted", "piloted"}));
  srv->add_option("--model", serve.model)->check(CLI::ExistingFile);
  srv->add_option("--config", serve.config)->check(CLI::ExistingFile);
  srv->add_option("--log", serve.log, "session log path");
  srv->add_option("--static", serve.static_dir, "directory served over plain HTTP");
  srv->add_option("--duration", serve.duration, "stop after this many seconds");
  srv->add_flag("--allow-mismatch", serve.allow_mismatch);

  auto* rep = app.add_subcommand("replay", "stream a recorded log at the tick rate");
  rep->add_option("--in", in)->required()->check(CLI::ExistingFile);
  rep->add_option("--port", serve.port);
  rep->add_option("--model", serve.model)->check(CLI::ExistingFile);
  rep->add_option("--static", serve.static_dir);
  rep->add_flag("--allow-mismatch", serve.allow_mismatch);

  CLI11_PARSE(app, argc, argv);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    if (*sim) return cmd_simulate(duration, seed_opt->count() ? std::optional(seed) : std::nullopt, config_path, out);
    if (*train) return cmd_train(in, passes, out, curve);
    if (*eval) return cmd_eval(model, in, report, online, allow_mismatch);
    if (*srv) return cmd_serve(serve);
    if (*rep) return cmd_replay(in, serve);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "gvfswitch: divergence in question '%s': %s\n", e.question_id().c_str(), e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gvfswitch: error: %s\n", e.what());
    return 1;
  }
  return 1;
}
