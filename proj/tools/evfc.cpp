// evfc: closed-loop runner, benchmark, key generation and networked roles.

#include <cxxabi.h>
#include <signal.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>

#include "evfc/harness.hpp"

namespace fs = std::filesystem;
using namespace evfc;

namespace {

std::string demangle(const char* name) {
  int status = 0;
  std::unique_ptr<char, void (*)(void*)> out(abi::__cxa_demangle(name, nullptr, nullptr, &status), std::free);
  return status == 0 ? out.get() : name;
}

void report(const std::exception& e, int depth = 0) {
  std::cerr << (depth == 0 ? "error: " : "  caused by: ") << demangle(typeid(e).name()) << ": " << e.what() << '\n';
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    report(inner, depth + 1);
  }
}

void init_logging() {
  auto logger = spdlog::stderr_color_mt("evfc");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] [pid %P] %v");
  const char* level = std::getenv("EVFC_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

/// Loop settings shared by run, bench, keygen and role. Flags given on the
/// command line override values from --config.
struct LoopFlags {
  std::string config;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void add(CLI::App* app, bool with_outputs) {
    app->add_option("--config", config, "key = value configuration file")->check(CLI::ExistingFile);
    add_key(app, "preset", "--preset", "parameter preset: paper, desk or toy");
    add_key(app, "mode", "--mode", "plain, encrypted or naive");
    add_key(app, "steps", "--steps", "number of control steps");
    add_key(app, "seed", "--seed", "seed for keys and encryption randomness");
    add_key(app, "n", "--n", "pixels per frame");
    add_key(app, "K", "--K", "feedback gain");
    add_key(app, "delta", "--delta", "gain scaling factor");
    add_key(app, "y0", "--y0", "initial stage position (pixels)");
    add_key(app, "stage_len", "--stage-len", "stage length (pixels)");
    add_key(app, "fg", "--fg", "stage brightness");
    add_key(app, "bg", "--bg", "background brightness");
    add_key(app, "timeout", "--timeout", "network timeout (seconds)");
    if (with_outputs) {
      add_key(app, "out", "--out", "CSV telemetry output");
      add_key(app, "trace", "--trace", "per-frame num/den output");
      add_key(app, "plot", "--plot", "gnuplot data output");
      add_key(app, "transport", "--transport", "inproc or tcp");
    }
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config.empty()) load_config_file(config, cfg);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) apply_setting(cfg, key, values.at(key));
    }
    return cfg;
  }

 private:
  void add_key(CLI::App* app, const std::string& key, const std::string& flag, const std::string& help) {
    options[key] = app->add_option(flag, values[key], help);
  }
};

void print_summary(const RunConfig& cfg, const RunResult& r) {
  const RunSummary& s = r.summary;
  std::printf("mode %s, preset %s, %zu steps\n", to_string(cfg.mode), cfg.preset.c_str(), s.steps);
  std::printf("  max |u_enc - u_plain|  %.3e\n", s.max_u_error);
  if (s.y_at_100) std::printf("  y(100)                 %.6f\n", *s.y_at_100);
  std::printf("  final y                %.6f\n", s.final_y);
  if (!std::isnan(s.min_noise_budget)) std::printf("  min noise budget       %.0f bits\n", s.min_noise_budget);
  std::printf("  mean time camera/server/actuator  %.4f / %.4f / %.4f s\n", s.mean_t_camera, s.mean_t_server,
              s.mean_t_actuator);
  if (s.held_frames) std::printf("  frames held (dark)     %zu\n", s.held_frames);
}

// ---- process orchestration for --transport tcp -----------------------------

pid_t spawn(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  const pid_t pid = fork();
  if (pid < 0) throw Error("fork failed");
  if (pid == 0) {
    execv("/proc/self/exe", argv.data());
    std::perror("execv");
    _exit(127);
  }
  return pid;
}

std::uint16_t wait_for_port(const std::string& path, pid_t owner, double timeout_s) {
  const auto stop = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  while (std::chrono::steady_clock::now() < stop) {
    if (fs::exists(path)) return static_cast<std::uint16_t>(std::stoul(read_file(path)));
    int status = 0;
    if (waitpid(owner, &status, WNOHANG) == owner) throw PeerUnavailable("role process exited before listening");
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  throw PeerUnavailable("role process did not report its port in time");
}

void write_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  out << std::setprecision(17) << "preset = " << cfg.preset << "\nmode = " << to_string(cfg.mode)
      << "\nsteps = " << cfg.steps << "\nn = " << cfg.n << "\nstage_len = " << cfg.stage_len << "\nfg = " << cfg.fg
      << "\nbg = " << cfg.bg << "\nK = " << cfg.gain << "\ndelta = " << cfg.delta << "\ny0 = " << cfg.y0
      << "\nseed = " << cfg.seed << "\ntimeout = " << cfg.timeout_s << '\n';
  if (!cfg.output_path.empty()) out << "out = " << fs::absolute(cfg.output_path).string() << '\n';
  if (!cfg.trace_path.empty()) out << "trace = " << fs::absolute(cfg.trace_path).string() << '\n';
  if (!cfg.plot_path.empty()) out << "plot = " << fs::absolute(cfg.plot_path).string() << '\n';
}

/// Designer step, then one process per role on loopback.
int run_tcp(const RunConfig& cfg, const ParamsPtr& params) {
  const fs::path work = fs::temp_directory_path() / ("evfc-" + std::to_string(getpid()));
  fs::create_directories(work);
  write_deployment(work.string(), design(cfg, params));
  const std::string config = (work / "run.conf").string();
  write_config(config, cfg);
  spdlog::info("designer: keys written to {}", work.string());

  std::vector<pid_t> children;
  auto cleanup = [&] {
    for (pid_t p : children) kill(p, SIGTERM);
    for (pid_t p : children) waitpid(p, nullptr, 0);
    fs::remove_all(work);
  };
  int failed = 0;
  try {
    const std::string aport = (work / "actuator.port").string(), sport = (work / "server.port").string();
    children.push_back(spawn({"evfc", "role", "actuator", "--config", config, "--keys", work.string(), "--listen",
                              "127.0.0.1:0", "--port-file", aport}));
    const std::string act = "127.0.0.1:" + std::to_string(wait_for_port(aport, children[0], cfg.timeout_s));
    children.push_back(spawn({"evfc", "role", "server", "--config", config, "--keys", work.string(), "--listen",
                              "127.0.0.1:0", "--port-file", sport, "--connect", act}));
    const std::string srv = "127.0.0.1:" + std::to_string(wait_for_port(sport, children[1], cfg.timeout_s));
    children.push_back(spawn({"evfc", "role", "camera", "--config", config, "--keys", work.string(), "--connect", srv,
                              "--plant", act}));
    for (pid_t p : children) {
      int status = 0;
      waitpid(p, &status, 0);
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ++failed;
    }
    children.clear();
  } catch (...) {
    cleanup();
    throw;
  }
  cleanup();
  if (failed) {
    std::cerr << "error: " << failed << " role process(es) failed\n";
    return 1;
  }
  std::printf("tcp run: %zu frames over three processes\n", cfg.steps);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Encrypted visual feedback control: simulation, benchmark and networked roles"};
  app.require_subcommand(1);

  LoopFlags run_flags, bench_flags, keygen_flags, role_flags;

  auto* run = app.add_subcommand("run", "closed-loop simulation");
  run_flags.add(run, true);

  auto* bench = app.add_subcommand("bench", "packed vs naive per-role timing");
  bench_flags.add(bench, false);
  std::size_t trials = 10;
  bench->add_option("--trials", trials, "number of frames to time")->check(CLI::PositiveNumber);

  auto* kg = app.add_subcommand("keygen", "generate keys and offline material into a directory");
  keygen_flags.add(kg, false);
  std::string keygen_out;
  kg->add_option("--out", keygen_out, "output directory")->required();

  auto* role = app.add_subcommand("role", "run one networked role");
  role_flags.add(role, true);
  std::string role_name, keys_dir, listen = "127.0.0.1:0", connect, plant, port_file;
  role->add_option("role", role_name, "camera, server or actuator")
      ->required()
      ->check(CLI::IsMember({"camera", "server", "actuator"}));
  role->add_option("--keys", keys_dir, "directory written by keygen")->required();
  role->add_option("--listen", listen, "host:port to listen on (server, actuator)");
  role->add_option("--connect", connect, "camera: server address; server: actuator address");
  role->add_option("--plant", plant, "camera: actuator address");
  role->add_option("--port-file", port_file, "write the bound port here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const RunConfig cfg = run_flags.resolve();
      const ParamsPtr params = validate(cfg);
      if (cfg.transport == Transport::tcp) {
        if (cfg.mode == Mode::plain) throw OutOfRange("plain mode has nothing to send over tcp");
        return run_tcp(cfg, params);
      }
      const RunResult r = run_simulation(cfg);
      write_outputs(cfg, r);
      print_summary(cfg, r);
    } else if (bench->parsed()) {
      RunConfig cfg = bench_flags.resolve();
      if (bench_flags.options["preset"]->count() == 0 && bench_flags.config.empty()) cfg.preset = "paper";
      const BenchResult b = benchmark(cfg, trials, [&](std::size_t i) { spdlog::info("trial {}/{}", i + 1, trials); });
      std::printf("preset %s, n = %zu, %zu trials (seconds per frame, mean +- std)\n", b.preset.c_str(), b.n,
                  b.trials);
      std::printf("%-9s %22s %22s %9s\n", "role", "packed", "naive", "ratio");
      auto row = [](const char* name, const RoleTiming& p, const RoleTiming& q) {
        std::printf("%-9s %12.4f +- %6.4f %12.4f +- %6.4f %9.2f\n", name, p.mean, p.stddev, q.mean, q.stddev,
                    q.mean / p.mean);
      };
      row("camera", b.packed.camera, b.naive.camera);
      row("server", b.packed.server, b.naive.server);
      row("actuator", b.packed.actuator, b.naive.actuator);
    } else if (kg->parsed()) {
      const RunConfig cfg = keygen_flags.resolve();
      write_deployment(keygen_out, design(cfg, validate(cfg)));
      std::printf("keys for preset %s (n = %zu) written to %s\n", cfg.preset.c_str(), cfg.n, keygen_out.c_str());
    } else if (role->parsed()) {
      RoleOptions opt;
      opt.cfg = role_flags.resolve();
      opt.keys_dir = keys_dir;
      opt.listen = Endpoint::parse(listen);
      if (!connect.empty()) opt.connect = Endpoint::parse(connect);
      if (!plant.empty()) opt.plant = Endpoint::parse(plant);
      opt.port_file = port_file;
      if (role_name == "camera") {
        if (connect.empty() || plant.empty()) throw OutOfRange("camera needs --connect and --plant");
        run_camera_role(opt);
      } else if (role_name == "server") {
        if (connect.empty()) throw OutOfRange("server needs --connect (actuator address)");
        run_server_role(opt);
      } else {
        const RunResult r = run_actuator_role(opt);
        print_summary(opt.cfg, r);
      }
    }
  } catch (const std::exception& e) {
    report(e);
    return 1;
  }
  return 0;
}
