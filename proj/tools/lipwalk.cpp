// lipwalk: command-line front end for the LFPC walking toolkit.

#include <pthread.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lipwalk/analysis.hpp"
#include "lipwalk/errors.hpp"
#include "lipwalk/logging.hpp"
#include "lipwalk/report.hpp"
#include "lipwalk/scenario.hpp"
#include "lipwalk/ws_server.hpp"

namespace fs = std::filesystem;
using namespace lipwalk;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

// A gain flag accepts a number or one of the preset names.
GainSpec parse_gain(const std::string& text) {
  if (text == "b_min" || text == "b_cp" || text == "b_db" || text == "b_max") return text;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size()) throw InvalidParameter("gain must be a number or one of b_min, b_cp, b_db, b_max: " + text);
  return v;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

struct SimulateArgs {
  std::string config;
  std::string out = ".";
  std::string format;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& args) {
  const ScenarioConfig cfg = load_scenario(args.config);
  const WalkTrace trace = run_scenario(cfg, args.seed);
  for (const auto& w : trace.warnings) log(LogLevel::Warn, w);

  const fs::path dir(args.out);
  if (args.format.empty() || args.format == "csv") {
    std::ostringstream csv;
    write_samples_csv(csv, trace);
    const fs::path p = dir / cfg.output.samples_csv;
    write_file(p, csv.str());
    std::cout << "wrote " << p.string() << '\n';
  }
  if (args.format.empty() || args.format == "json") {
    const fs::path p = dir / cfg.output.summary_json;
    write_file(p, summary_json(trace).dump(2) + "\n");
    std::cout << "wrote " << p.string() << '\n';
  }
  return 0;
}

struct ModelArgs {
  double g = 10.0;
  double h = 1.0;
};

void add_model_flags(CLI::App* app, ModelArgs& m) {
  app->add_option("--g", m.g, "gravity (m/s^2)")->capture_default_str();
  app->add_option("--h", m.h, "CoM height (m)")->capture_default_str();
}

struct StabilityArgs {
  ModelArgs model;
  double period = 0.3;
  std::optional<std::string> b;
  std::string format = "text";
};

int cmd_stability(const StabilityArgs& args) {
  const ModelParams<double> model(args.model.g, args.model.h);
  std::optional<double> b;
  if (args.b) b = resolve_gain(parse_gain(*args.b), args.period, model);
  if (args.format == "json")
    std::cout << stability_json(args.period, model, b).dump(2) << '\n';
  else
    std::cout << stability_text(args.period, model, b);
  return 0;
}

struct RegionArgs {
  ModelArgs model;
  std::vector<double> t_range{0.05, 1.0};
  std::vector<double> b_range{0.0, 2.0};
  std::vector<int> grid{96, 201};
  std::string out = ".";
};

int cmd_region(const RegionArgs& args) {
  const ModelParams<double> model(args.model.g, args.model.h);
  const auto scan = region_scan<double>({args.t_range[0], args.t_range[1]}, {args.b_range[0], args.b_range[1]},
                                        args.grid[0], args.grid[1], model);
  const fs::path dir(args.out);
  std::ostringstream region, curves;
  write_region_csv(region, scan);
  write_curves_csv(curves, scan);
  write_file(dir / "region.csv", region.str());
  write_file(dir / "curves.csv", curves.str());
  std::cout << "wrote " << (dir / "region.csv").string() << '\n' << "wrote " << (dir / "curves.csv").string() << '\n';
  return 0;
}

struct GaitArgs {
  ModelArgs model;
  double period = 0.3;
  double a1 = 0.0;
  std::string b1;
  std::optional<double> a2;
  std::optional<std::string> b2;
  std::string format = "text";
};

int cmd_gait(const GaitArgs& args) {
  const ModelParams<double> model(args.model.g, args.model.h);
  GaitQuery q;
  q.period = args.period;
  q.leg1 = {args.a1, resolve_gain(parse_gain(args.b1), args.period, model)};
  if (args.a2 || args.b2)
    q.leg2 = LegParams<double>{args.a2.value_or(args.a1),
                               args.b2 ? resolve_gain(parse_gain(*args.b2), args.period, model) : q.leg1.b};
  if (args.format == "json")
    std::cout << gait_json(q, model).dump(2) << '\n';
  else
    std::cout << gait_text(q, model);
  return 0;
}

struct ServeArgs {
  ModelArgs model;
  std::string host = "127.0.0.1";
  int port = 8765;
  double tick_rate = 60.0;
  std::size_t footprint_cap = 64;
  double a_l = 0.0;
  double a_w = 0.0;
  double theta_deg = 0.0;
  std::string b = "b_db";
  double period = 0.3;
};

int cmd_serve(const ServeArgs& args) {
  ServeOptions opts;
  opts.host = args.host;
  opts.port = args.port;
  opts.model = ModelParams<double>(args.model.g, args.model.h);
  opts.gait = {args.a_l, args.a_w, args.theta_deg, resolve_gain(parse_gain(args.b), args.period, opts.model),
               args.period};
  opts.session.tick_rate = args.tick_rate;
  opts.session.footprint_cap = args.footprint_cap;
  // Validates the gait before any socket is opened.
  Session probe(opts.model, opts.gait, opts.initial, opts.session);
  (void)probe;

  // Block the stop signals in every thread, then wait for one here.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  SessionServer server(opts);
  const int port = server.start();
  std::cout << "listening on ws://" << opts.host << ':' << port << '\n' << std::flush;
  int sig = 0;
  sigwait(&signals, &sig);
  log(LogLevel::Info, "shutting down");
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"LFPC walking toolkit on the linear inverted pendulum"};
  app.require_subcommand(1);
  // --h is the CoM height, so help is long-form only.
  app.set_help_flag("--help", "print this help and exit");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "run a scenario file and write samples/summary");
  simulate->add_option("--config", sim.config, "scenario JSON")->required();
  simulate->add_option("--out", sim.out, "output directory")->capture_default_str();
  simulate->add_option("--format", sim.format, "write only one output")->check(CLI::IsMember({"csv", "json"}));
  simulate->add_option("--seed", sim.seed, "seed for random pushes")->capture_default_str();

  StabilityArgs stab;
  auto* stability = app.add_subcommand("stability", "special gains and regime for a step period");
  stability->add_option("--T", stab.period, "step period (s)")->capture_default_str();
  stability->add_option("--b", stab.b, "query gain (number or preset name)");
  stability->add_option("--format", stab.format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  add_model_flags(stability, stab.model);

  RegionArgs reg;
  auto* region = app.add_subcommand("region", "lambda2 grid over (T, b) plus bound curves");
  region->add_option("--T-range", reg.t_range, "T lo hi")->expected(2)->capture_default_str();
  region->add_option("--b-range", reg.b_range, "b lo hi")->expected(2)->capture_default_str();
  region->add_option("--grid", reg.grid, "points along T and b")->expected(2)->capture_default_str();
  region->add_option("--out", reg.out, "output directory")->capture_default_str();
  region->add_option("--format", "only csv is written")->check(CLI::IsMember({"csv"}));
  add_model_flags(region, reg.model);

  GaitArgs gait;
  auto* gaitcmd = app.add_subcommand("gait", "periodic gait of a period-1 or period-2 controller");
  gaitcmd->add_option("--T", gait.period, "step period (s)")->capture_default_str();
  gaitcmd->add_option("--a1", gait.a1, "leg 1 offset (m)")->capture_default_str();
  gaitcmd->add_option("--b1", gait.b1, "leg 1 gain (number or preset)")->required();
  gaitcmd->add_option("--a2", gait.a2, "leg 2 offset; makes a period-2 gait");
  gaitcmd->add_option("--b2", gait.b2, "leg 2 gain; makes a period-2 gait");
  gaitcmd->add_option("--format", gait.format)->check(CLI::IsMember({"text", "json"}))->capture_default_str();
  add_model_flags(gaitcmd, gait.model);

  ServeArgs srv;
  auto* serve = app.add_subcommand("serve", "live steering session over WebSocket");
  serve->add_option("--host", srv.host)->capture_default_str();
  serve->add_option("--port", srv.port, "0 picks a free port")->capture_default_str();
  serve->add_option("--tick-rate", srv.tick_rate, "updates per simulated second")->capture_default_str();
  serve->add_option("--footprint-cap", srv.footprint_cap)->capture_default_str();
  serve->add_option("--a-l", srv.a_l)->capture_default_str();
  serve->add_option("--a-w", srv.a_w)->capture_default_str();
  serve->add_option("--theta-deg", srv.theta_deg)->capture_default_str();
  serve->add_option("--b", srv.b, "gain (number or preset)")->capture_default_str();
  serve->add_option("--T", srv.period, "step period (s)")->capture_default_str();
  add_model_flags(serve, srv.model);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*stability) return cmd_stability(stab);
    if (*region) return cmd_region(reg);
    if (*gaitcmd) return cmd_gait(gait);
    if (*serve) return cmd_serve(srv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidParameter& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DegeneratePeriod& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NoIsolatedFixedPoint& e) {
    std::cerr << "error: no isolated fixed point (" << e.bound() << "): " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
