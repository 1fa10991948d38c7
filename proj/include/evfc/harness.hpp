#pragma once

// Closed-loop simulation, role state machines, TCP deployment and the
// packed-vs-naive benchmark.

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "evfc/net.hpp"

namespace evfc {

enum class Mode { plain, encrypted, naive };
enum class Transport { inproc, tcp };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::plain: return "plain";
    case Mode::encrypted: return "encrypted";
    case Mode::naive: return "naive";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  if (s == "plain") return Mode::plain;
  if (s == "encrypted") return Mode::encrypted;
  if (s == "naive") return Mode::naive;
  throw OutOfRange("unknown mode '" + s + "'");
}

inline Transport parse_transport(const std::string& s) {
  if (s == "inproc") return Transport::inproc;
  if (s == "tcp") return Transport::tcp;
  throw OutOfRange("unknown transport '" + s + "'");
}

struct RunConfig {
  std::string preset = "desk";
  Mode mode = Mode::encrypted;
  std::size_t steps = 300;
  std::size_t n = 500;
  std::size_t stage_len = 3;
  int fg = 10;
  int bg = 0;
  double gain = 0.8;
  double delta = 1048576.0;
  double y0 = 30.0;
  std::uint64_t seed = 1;
  Transport transport = Transport::inproc;
  double timeout_s = 120.0;
  std::string output_path;
  std::string trace_path;
  std::string plot_path;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  s = s.substr(first, last - first + 1);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
  return s;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  if constexpr (std::is_unsigned_v<T>) {
    if (value.find('-') != std::string::npos) throw OutOfRange("negative value '" + value + "' for " + key);
  }
  std::istringstream in(value);
  T out{};
  in >> out;
  if (in.fail() || !in.eof()) throw OutOfRange("bad value '" + value + "' for " + key);
  return out;
}

}  // namespace detail

/// Sets one configuration key from its text form.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "preset") {
    cfg.preset = value;
  } else if (key == "mode") {
    cfg.mode = parse_mode(value);
  } else if (key == "steps") {
    cfg.steps = parse_number<std::size_t>(key, value);
  } else if (key == "n") {
    cfg.n = parse_number<std::size_t>(key, value);
  } else if (key == "stage_len") {
    cfg.stage_len = parse_number<std::size_t>(key, value);
  } else if (key == "fg") {
    cfg.fg = parse_number<int>(key, value);
  } else if (key == "bg") {
    cfg.bg = parse_number<int>(key, value);
  } else if (key == "K" || key == "gain") {
    cfg.gain = parse_number<double>(key, value);
  } else if (key == "delta") {
    cfg.delta = parse_number<double>(key, value);
  } else if (key == "y0") {
    cfg.y0 = parse_number<double>(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "transport") {
    cfg.transport = parse_transport(value);
  } else if (key == "timeout") {
    cfg.timeout_s = parse_number<double>(key, value);
  } else if (key == "out") {
    cfg.output_path = value;
  } else if (key == "trace") {
    cfg.trace_path = value;
  } else if (key == "plot") {
    cfg.plot_path = value;
  } else {
    throw OutOfRange("unknown configuration key '" + key + "'");
  }
}

/// Reads `key = value` lines; '#' starts a comment, [section] lines are ignored.
inline void load_config(std::istream& in, RunConfig& cfg) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw OutOfRange("config line " + std::to_string(lineno) + " has no '='");
    apply_setting(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

inline void load_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  load_config(in, cfg);
}

/// Checks security (via setup) and the overflow rule before any frame runs.
inline ParamsPtr validate(const RunConfig& cfg) {
  if (cfg.preset != "paper" && cfg.preset != "desk" && cfg.preset != "toy") {
    throw InvalidModulus("unknown preset '" + cfg.preset + "'");
  }
  if (cfg.fg < 0 || cfg.fg > 255 || cfg.bg < 0 || cfg.bg > 255) throw OutOfRange("brightness outside [0, 255]");
  ParamsPtr params = setup(cfg.preset);
  check_pipeline_config(*params, cfg.gain, cfg.delta, cfg.n);
  return params;
}

struct LoopRecord {
  std::size_t k = 0;
  double y_true = 0.0;
  double g_plain = 0.0;
  double g_enc = 0.0;
  double u_plain = 0.0;
  double u_enc = 0.0;
  double noise_budget_bits = std::numeric_limits<double>::quiet_NaN();
  double t_camera_s = 0.0;
  double t_server_s = 0.0;
  double t_actuator_s = 0.0;
};

struct RunSummary {
  std::size_t steps = 0;
  double max_u_error = 0.0;
  double final_y = 0.0;
  std::optional<double> y_at_100;
  double min_noise_budget = std::numeric_limits<double>::quiet_NaN();
  double mean_t_camera = 0.0;
  double mean_t_server = 0.0;
  double mean_t_actuator = 0.0;
  std::size_t held_frames = 0;
};

struct RunResult {
  std::vector<LoopRecord> records;
  std::vector<Reading> trace;
  RunSummary summary;
};

/// Error raised from inside the loop, with the step index attached. The
/// original exception is nested.
class StepError : public Error {
 public:
  StepError(std::size_t step, const std::string& what)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- designer --------------------------------------------------------------

/// Everything the designer produces offline, before role separation.
struct Deployment {
  ParamsPtr params;
  KeySet keys;
  DesignerBundle bundle;
};

inline Deployment design(const RunConfig& cfg, const ParamsPtr& params) {
  Deployment d;
  d.params = params;
  d.keys = keygen(params, power_of_two_steps(cfg.n), cfg.seed);
  Rng rng(cfg.seed + 0x5bd1e995ULL);
  const Encryptor enc(params, d.keys.pk);
  const BatchEncoder encoder(params);
  d.bundle.packed = offline_setup(enc, encoder, cfg.gain, cfg.delta, cfg.n, rng);
  d.bundle.naive_c_K = naive_offline_setup(enc, cfg.gain, cfg.delta, cfg.n, rng).c_K;
  return d;
}

/// Key directory layout; each role reads only its own subdirectory.
///   params.bin
///   camera/pk.bin
///   server/rlk.bin server/galois.bin server/bundle.bin
///   actuator/sk.bin
inline void write_deployment(const std::string& dir, const Deployment& d) {
  namespace fs = std::filesystem;
  const SchemeParams& p = *d.params;
  for (const char* sub : {"camera", "server", "actuator"}) fs::create_directories(fs::path(dir) / sub);
  write_file((fs::path(dir) / "params.bin").string(), serialize_params(p));
  write_file((fs::path(dir) / "camera" / "pk.bin").string(), serialize(p, d.keys.pk));
  write_file((fs::path(dir) / "server" / "rlk.bin").string(), serialize(p, d.keys.rlk));
  write_file((fs::path(dir) / "server" / "galois.bin").string(), serialize(p, d.keys.galois));
  write_file((fs::path(dir) / "server" / "bundle.bin").string(), serialize(p, d.bundle));
  write_file((fs::path(dir) / "actuator" / "sk.bin").string(), serialize(p, d.keys.sk));
}

inline ParamsPtr load_params(const std::string& dir) {
  return deserialize_params(read_file((std::filesystem::path(dir) / "params.bin").string()));
}

// ---- roles -----------------------------------------------------------------

/// What the camera sends per frame: one packed ciphertext, or n for naive.
struct CameraPayload {
  std::vector<Ciphertext> cts;
};

/// Camera: sees the stage, encrypts. Holds only the public key.
class CameraRole {
 public:
  CameraRole(const RunConfig& cfg, ParamsPtr params, PublicKey pk)
      : cfg_(cfg), params_(params), encoder_(params), enc_(params, std::move(pk)), rng_(cfg.seed ^ 0x9e3779b97f4a7c15ULL) {}

  Image observe(double y) const { return synthesize_image(y, cfg_.n, cfg_.stage_len, cfg_.fg, cfg_.bg); }

  CameraPayload capture(const Image& img) {
    CameraPayload out;
    if (cfg_.mode == Mode::naive) {
      out.cts = naive_camera_encrypt(enc_, img, rng_);
    } else {
      out.cts.push_back(camera_encrypt(enc_, encoder_, img, rng_));
    }
    return out;
  }

  const Encryptor& encryptor() const noexcept { return enc_; }

 private:
  RunConfig cfg_;
  ParamsPtr params_;
  BatchEncoder encoder_;
  Encryptor enc_;
  Rng rng_;
};

/// Server: evaluates. Holds evaluation keys and the offline bundle; no
/// secret key exists in its state.
class ServerRole {
 public:
  ServerRole(const RunConfig& cfg, ParamsPtr params, EvaluationKeys keys, DesignerBundle bundle)
      : cfg_(cfg),
        params_(params),
        keys_(std::move(keys)),
        packed_(std::move(bundle.packed)),
        naive_(DesignerBundle{packed_, std::move(bundle.naive_c_K)}.naive(*params)),
        eval_(params) {
    if (packed_.n != cfg.n) throw ParameterMismatch("offline bundle was built for a different pixel count");
  }

  ServerResult evaluate(const CameraPayload& in) const {
    if (cfg_.mode == Mode::naive) return naive_server_evaluate(eval_, naive_, in.cts, keys_.relin);
    if (in.cts.size() != 1) throw ProtocolDesync("packed mode expects one ciphertext per frame");
    return server_evaluate(eval_, packed_, in.cts.front(), keys_);
  }

  const EvaluationKeys& keys() const noexcept { return keys_; }
  const Evaluator& evaluator() const noexcept { return eval_; }

 private:
  RunConfig cfg_;
  ParamsPtr params_;
  EvaluationKeys keys_;
  OfflineBundle packed_;
  NaiveBundle naive_;
  Evaluator eval_;
};

/// Actuator: decrypts, divides, drives the plant. Holds the secret key.
class ActuatorRole {
 public:
  struct Output {
    Reading reading;
    double u = 0.0;
    double g = std::numeric_limits<double>::quiet_NaN();
    double noise_budget_bits = 0.0;
    bool held = false;
  };

  ActuatorRole(const RunConfig& cfg, ParamsPtr params, SecretKey sk, std::int64_t k_quantized)
      : cfg_(cfg), params_(params), encoder_(params), sk_(std::move(sk)), k_quantized_(k_quantized) {}

  /// Decrypts both results; on a zero denominator holds the last input.
  Output decode(const ServerResult& r) {
    auto num = detail::decrypt_and_measure(*params_, sk_, r.c_num);
    auto den = detail::decrypt_and_measure(*params_, sk_, r.c_den);
    Output out;
    out.noise_budget_bits = std::min(num.noise.budget_bits, den.noise.budget_bits);
    if (out.noise_budget_bits <= 0.0) throw NoiseOverflow("result noise budget exhausted");
    if (cfg_.mode == Mode::naive) {
      out.reading = {num.message.coeff(0), den.message.coeff(0)};
    } else {
      out.reading = {encoder_.unpack(num.message)[0], encoder_.unpack(den.message)[0]};
    }
    if (out.reading.den == 0) {
      out.u = last_u_;
      out.held = true;
      return out;
    }
    out.u = control_from_reading(out.reading, cfg_.delta);
    if (k_quantized_ != 0) {
      out.g = static_cast<double>(out.reading.num) /
              (static_cast<double>(k_quantized_) * static_cast<double>(out.reading.den));
    }
    last_u_ = out.u;
    return out;
  }

 private:
  RunConfig cfg_;
  ParamsPtr params_;
  BatchEncoder encoder_;
  SecretKey sk_;
  std::int64_t k_quantized_ = 0;
  double last_u_ = 0.0;
};

/// Plain reference controller, run on the same frames as the encrypted loop.
class PlainController {
 public:
  explicit PlainController(double gain) : gain_(gain) {}

  struct Output {
    double g = std::numeric_limits<double>::quiet_NaN();
    double u = 0.0;
    bool held = false;
  };

  Output step(const Image& img) {
    Output out;
    try {
      out.g = centroid(img).g;
      out.u = control_law(out.g, gain_);
      last_u_ = out.u;
    } catch (const AllDarkImage&) {
      out.u = last_u_;
      out.held = true;
    }
    return out;
  }

 private:
  double gain_;
  double last_u_ = 0.0;
};

// ---- summaries and file output ---------------------------------------------

inline RunSummary summarize(const std::vector<LoopRecord>& records, double final_y, std::size_t held) {
  RunSummary s;
  s.steps = records.size();
  s.final_y = final_y;
  s.held_frames = held;
  double min_noise = std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    s.max_u_error = std::max(s.max_u_error, std::abs(r.u_enc - r.u_plain));
    if (r.k == 100) s.y_at_100 = r.y_true;
    if (!std::isnan(r.noise_budget_bits)) min_noise = std::min(min_noise, r.noise_budget_bits);
    s.mean_t_camera += r.t_camera_s;
    s.mean_t_server += r.t_server_s;
    s.mean_t_actuator += r.t_actuator_s;
  }
  if (!records.empty()) {
    const auto n = static_cast<double>(records.size());
    s.mean_t_camera /= n;
    s.mean_t_server /= n;
    s.mean_t_actuator /= n;
  }
  if (std::isfinite(min_noise)) s.min_noise_budget = min_noise;
  return s;
}

inline constexpr const char* kCsvHeader =
    "k,y_true,g_plain,g_enc,u_plain,u_enc,noise_budget_bits,t_camera_s,t_server_s,t_actuator_s";

inline void write_csv(std::ostream& out, const std::vector<LoopRecord>& records) {
  out << kCsvHeader << '\n';
  out << std::setprecision(17);
  for (const auto& r : records) {
    out << r.k << ',' << r.y_true << ',' << r.g_plain << ',' << r.g_enc << ',' << r.u_plain << ',' << r.u_enc << ','
        << r.noise_budget_bits << ',' << r.t_camera_s << ',' << r.t_server_s << ',' << r.t_actuator_s << '\n';
  }
}

inline void write_trace(std::ostream& out, const std::vector<Reading>& trace) {
  out << "k,num,den\n";
  for (std::size_t k = 0; k < trace.size(); ++k) out << k << ',' << trace[k].num << ',' << trace[k].den << '\n';
}

/// gnuplot data file plus a script next to it (PATH.gp).
inline void write_plot(const std::string& path, const std::vector<LoopRecord>& records) {
  {
    std::ofstream data(path);
    if (!data) throw Error("cannot open " + path);
    data << "# k y_true u_plain u_enc\n" << std::setprecision(17);
    for (const auto& r : records) data << r.k << ' ' << r.y_true << ' ' << r.u_plain << ' ' << r.u_enc << '\n';
  }
  std::ofstream script(path + ".gp");
  script << "set xlabel 'k'\nset ylabel 'u'\n"
         << "plot '" << path << "' using 1:3 with lines title 'plain', \\\n"
         << "     '" << path << "' using 1:4 with points pt 7 ps 0.4 title 'encrypted'\n";
}

inline void write_outputs(const RunConfig& cfg, const RunResult& r) {
  if (!cfg.output_path.empty()) {
    std::ofstream out(cfg.output_path);
    if (!out) throw Error("cannot open " + cfg.output_path);
    write_csv(out, r.records);
  }
  if (!cfg.trace_path.empty()) {
    std::ofstream out(cfg.trace_path);
    if (!out) throw Error("cannot open " + cfg.trace_path);
    write_trace(out, r.trace);
  }
  if (!cfg.plot_path.empty()) write_plot(cfg.plot_path, r.records);
}

// ---- loop bookkeeping shared by inproc and tcp ------------------------------

/// Per-step bookkeeping done at the actuator, which owns the plant.
class LoopLedger {
 public:
  explicit LoopLedger(const RunConfig& cfg) : cfg_(cfg), plain_(cfg.gain), plant_{cfg.y0} {}

  double y() const noexcept { return plant_.y; }

  /// Encrypted or naive step: record, then advance the plant with u_enc.
  void close_step(std::size_t k, const Image& frame, const ActuatorRole::Output& a, double t_cam, double t_srv,
                  double t_act) {
    const auto ref = plain_.step(frame);
    LoopRecord rec{k, plant_.y, ref.g, a.g, ref.u, a.u, a.noise_budget_bits, t_cam, t_srv, t_act};
    if (a.held) ++held_;
    result_.records.push_back(rec);
    result_.trace.push_back(a.reading);
    plant_ = plant_step(plant_, a.u);
  }

  /// Plain step: the reference is the controller.
  void close_plain_step(std::size_t k, const Image& frame) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto ref = plain_.step(frame);
    const double t_srv = seconds_since(t0);
    const Centroid c = ref.held ? Centroid{} : centroid(frame);
    LoopRecord rec{k, plant_.y, ref.g, ref.g, ref.u, ref.u, std::numeric_limits<double>::quiet_NaN(), 0.0, t_srv, 0.0};
    if (ref.held) ++held_;
    result_.records.push_back(rec);
    result_.trace.push_back({c.weighted, c.total});
    plant_ = plant_step(plant_, ref.u);
  }

  RunResult finish() {
    result_.summary = summarize(result_.records, plant_.y, held_);
    return std::move(result_);
  }

 private:
  RunConfig cfg_;
  PlainController plain_;
  PlantState plant_;
  RunResult result_;
  std::size_t held_ = 0;
};

template <class F>
auto at_step(std::size_t k, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StepError&) {
    throw;
  } catch (const std::exception& e) {
    std::throw_with_nested(StepError(k, e.what()));
  }
}

// ---- in-process run --------------------------------------------------------

inline RunResult run_plain(const RunConfig& cfg) {
  LoopLedger ledger(cfg);
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    at_step(k, [&] {
      ledger.close_plain_step(k, synthesize_image(ledger.y(), cfg.n, cfg.stage_len, cfg.fg, cfg.bg));
    });
  }
  return ledger.finish();
}

/// Runs the closed loop in one process. Roles are still separate objects and
/// exchange only ciphertexts.
inline RunResult run_inproc(const RunConfig& cfg, const Deployment& d) {
  CameraRole camera(cfg, d.params, d.keys.pk);
  ServerRole server(cfg, d.params, d.keys.evaluation_keys(), d.bundle);
  ActuatorRole actuator(cfg, d.params, d.keys.sk, d.bundle.packed.k_quantized);
  LoopLedger ledger(cfg);
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    at_step(k, [&] {
      const Image frame = camera.observe(ledger.y());
      auto t0 = std::chrono::steady_clock::now();
      const CameraPayload payload = camera.capture(frame);
      const double t_cam = seconds_since(t0);
      t0 = std::chrono::steady_clock::now();
      const ServerResult result = server.evaluate(payload);
      const double t_srv = seconds_since(t0);
      t0 = std::chrono::steady_clock::now();
      const ActuatorRole::Output out = actuator.decode(result);
      const double t_act = seconds_since(t0);
      ledger.close_step(k, frame, out, t_cam, t_srv, t_act);
      if (k % 50 == 0) spdlog::debug("step {}: y = {:.4f}, u = {:.6f}", k, ledger.y(), out.u);
    });
  }
  return ledger.finish();
}

inline RunResult run_simulation(const RunConfig& cfg) {
  const ParamsPtr params = validate(cfg);
  if (cfg.mode == Mode::plain) return run_plain(cfg);
  const Deployment d = design(cfg, params);
  return run_inproc(cfg, d);
}

// ---- networked roles -------------------------------------------------------
//
// Topology: the actuator listens; the server listens and connects to the
// actuator; the camera connects to the server, and to the actuator for the
// plant link (it needs the stage position to render frames).
//
// Per frame k:
//   actuator -> camera : state  #k  [y]
//   camera   -> server : frame  #k  [t_cam] ciphertexts
//   server   -> actuator: result #k [t_cam, t_srv] c_num c_den
// After the last frame the camera sends bye, which the server forwards.

struct RoleOptions {
  RunConfig cfg;
  std::string keys_dir;
  Endpoint listen;
  Endpoint connect;  // server: actuator address; camera: server address
  Endpoint plant;    // camera: actuator address
  std::string port_file;
  /// Called once the listener is bound (tests use it to learn ephemeral ports).
  std::function<void(const Endpoint&)> on_listening;
};

inline std::chrono::milliseconds role_timeout(const RunConfig& cfg) {
  return std::chrono::milliseconds(static_cast<long long>(cfg.timeout_s * 1000));
}

inline void announce(const RoleOptions& opt, const Endpoint& bound) {
  if (!opt.port_file.empty()) {
    const std::string tmp = opt.port_file + ".tmp";
    write_file(tmp, std::to_string(bound.port) + "\n");
    std::filesystem::rename(tmp, opt.port_file);
  }
  if (opt.on_listening) opt.on_listening(bound);
}

inline void run_camera_role(const RoleOptions& opt) {
  namespace fs = std::filesystem;
  const RunConfig& cfg = opt.cfg;
  const ParamsPtr params = load_params(opt.keys_dir);
  CameraRole camera(cfg, params,
                    deserialize<PublicKey>(*params, read_file((fs::path(opt.keys_dir) / "camera" / "pk.bin").string())));
  const auto timeout = role_timeout(cfg);
  Channel server(connect_with_retry(opt.connect, timeout), params->digest(), timeout);
  server.hello(RoleId::camera);
  Channel plant(connect_with_retry(opt.plant, timeout), params->digest(), timeout);
  plant.hello(RoleId::camera);
  spdlog::info("camera: connected to server {} and actuator {}", opt.connect.str(), opt.plant.str());

  for (std::size_t k = 0; k < cfg.steps; ++k) {
    at_step(k, [&] {
      const Message state = plant.expect(MessageTag::state, k);
      if (state.scalars.size() != 1) throw ProtocolDesync("malformed state message");
      const Image frame = camera.observe(state.scalars[0]);
      const auto t0 = std::chrono::steady_clock::now();
      const CameraPayload payload = camera.capture(frame);
      const double t_cam = seconds_since(t0);
      Message m{MessageTag::frame, k, {t_cam}, {}};
      for (const auto& c : payload.cts) m.items.push_back(serialize(*params, c));
      server.send(m);
    });
  }
  server.send({MessageTag::bye, cfg.steps, {}, {}});
  spdlog::info("camera: sent {} frames", cfg.steps);
}

inline void run_server_role(const RoleOptions& opt) {
  namespace fs = std::filesystem;
  const RunConfig& cfg = opt.cfg;
  const ParamsPtr params = load_params(opt.keys_dir);
  const fs::path dir = fs::path(opt.keys_dir) / "server";
  EvaluationKeys keys{deserialize<RelinKey>(*params, read_file((dir / "rlk.bin").string())),
                      deserialize<GaloisKeys>(*params, read_file((dir / "galois.bin").string()))};
  ServerRole server(cfg, params, std::move(keys),
                    deserialize<DesignerBundle>(*params, read_file((dir / "bundle.bin").string())));
  const auto timeout = role_timeout(cfg);

  Listener listener(opt.listen);
  announce(opt, listener.endpoint());
  Channel actuator(connect_with_retry(opt.connect, timeout), params->digest(), timeout);
  actuator.hello(RoleId::server);
  Channel camera(listener.accept(timeout), params->digest(), timeout);
  if (camera.expect_hello() != RoleId::camera) throw ProtocolDesync("server expected the camera to connect");
  spdlog::info("server: camera connected, actuator at {}", opt.connect.str());

  for (std::size_t k = 0; k < cfg.steps; ++k) {
    at_step(k, [&] {
      const Message in = camera.expect(MessageTag::frame, k);
      if (in.scalars.size() != 1) throw ProtocolDesync("malformed frame message");
      CameraPayload payload;
      for (const auto& item : in.items) payload.cts.push_back(deserialize<Ciphertext>(*params, item));
      const auto t0 = std::chrono::steady_clock::now();
      const ServerResult r = server.evaluate(payload);
      const double t_srv = seconds_since(t0);
      actuator.send({MessageTag::result,
                     k,
                     {in.scalars[0], t_srv},
                     {serialize(*params, r.c_num), serialize(*params, r.c_den)}});
    });
  }
  camera.expect(MessageTag::bye, cfg.steps);
  actuator.send({MessageTag::bye, cfg.steps, {}, {}});
  spdlog::info("server: evaluated {} frames", cfg.steps);
}

inline RunResult run_actuator_role(const RoleOptions& opt) {
  namespace fs = std::filesystem;
  const RunConfig& cfg = opt.cfg;
  const ParamsPtr params = load_params(opt.keys_dir);
  SecretKey sk = deserialize<SecretKey>(*params, read_file((fs::path(opt.keys_dir) / "actuator" / "sk.bin").string()));
  const std::int64_t kq = quantize_gain(cfg.gain, cfg.delta, params->t());
  ActuatorRole actuator(cfg, params, std::move(sk), kq);
  const auto timeout = role_timeout(cfg);

  Listener listener(opt.listen);
  announce(opt, listener.endpoint());
  Channel server, camera;
  bool server_seen = false, camera_seen = false;
  for (int i = 0; i < 2; ++i) {
    Channel c(listener.accept(timeout), params->digest(), timeout);
    const RoleId who = c.expect_hello();
    if (who == RoleId::server && !std::exchange(server_seen, true)) {
      server = std::move(c);
    } else if (who == RoleId::camera && !std::exchange(camera_seen, true)) {
      camera = std::move(c);
    } else {
      throw ProtocolDesync("unexpected or duplicate peer at the actuator");
    }
  }
  spdlog::info("actuator: server and camera connected");

  LoopLedger ledger(cfg);
  for (std::size_t k = 0; k < cfg.steps; ++k) {
    at_step(k, [&] {
      const double y = ledger.y();
      camera.send({MessageTag::state, k, {y}, {}});
      const Message in = server.expect(MessageTag::result, k);
      if (in.scalars.size() != 2 || in.items.size() != 2) throw ProtocolDesync("malformed result message");
      const ServerResult r{deserialize<Ciphertext>(*params, in.items[0]), deserialize<Ciphertext>(*params, in.items[1])};
      const auto t0 = std::chrono::steady_clock::now();
      const ActuatorRole::Output out = actuator.decode(r);
      const double t_act = seconds_since(t0);
      const Image frame = synthesize_image(y, cfg.n, cfg.stage_len, cfg.fg, cfg.bg);
      ledger.close_step(k, frame, out, in.scalars[0], in.scalars[1], t_act);
    });
  }
  server.expect(MessageTag::bye, cfg.steps);
  spdlog::info("actuator: applied {} inputs", cfg.steps);
  RunResult result = ledger.finish();
  write_outputs(cfg, result);
  return result;
}

/// Runs the three roles on loopback inside one process, one thread each.
/// Same message flow as separate processes.
inline RunResult run_tcp_threads(const RunConfig& cfg, const std::string& keys_dir) {
  std::promise<Endpoint> actuator_at, server_at;
  RoleOptions a{cfg, keys_dir, {"127.0.0.1", 0}, {}, {}, {}, [&](const Endpoint& e) { actuator_at.set_value(e); }};
  a.cfg.output_path.clear();
  a.cfg.trace_path.clear();
  a.cfg.plot_path.clear();
  auto actuator = std::async(std::launch::async, [a] { return run_actuator_role(a); });
  const Endpoint act = actuator_at.get_future().get();

  RoleOptions s{cfg, keys_dir, {"127.0.0.1", 0}, act, {}, {}, [&](const Endpoint& e) { server_at.set_value(e); }};
  auto server = std::async(std::launch::async, [s] { run_server_role(s); });
  const Endpoint srv = server_at.get_future().get();

  RoleOptions c{cfg, keys_dir, {}, srv, act, {}, {}};
  auto camera = std::async(std::launch::async, [c] { run_camera_role(c); });
  camera.get();
  server.get();
  return actuator.get();
}

// ---- benchmark -------------------------------------------------------------

struct RoleTiming {
  double mean = 0.0;
  double stddev = 0.0;
};

struct BenchRow {
  RoleTiming camera;
  RoleTiming server;
  RoleTiming actuator;
};

struct BenchResult {
  std::string preset;
  std::size_t n = 0;
  std::size_t trials = 0;
  BenchRow packed;
  BenchRow naive;
};

inline RoleTiming mean_std(const std::vector<double>& xs) {
  RoleTiming t;
  if (xs.empty()) return t;
  for (double x : xs) t.mean += x;
  t.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - t.mean) * (x - t.mean);
    t.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return t;
}

/// Per-role wall-clock per frame, packed and naive on identical frames.
/// Trials run sequentially.
inline BenchResult benchmark(const RunConfig& base, std::size_t trials,
                             const std::function<void(std::size_t)>& progress = {}) {
  if (trials == 0) throw OutOfRange("benchmark needs at least one trial");
  const ParamsPtr params = validate(base);
  RunConfig packed_cfg = base, naive_cfg = base;
  packed_cfg.mode = Mode::encrypted;
  naive_cfg.mode = Mode::naive;
  const Deployment d = design(base, params);
  CameraRole cam_p(packed_cfg, params, d.keys.pk), cam_n(naive_cfg, params, d.keys.pk);
  const ServerRole srv_p(packed_cfg, params, d.keys.evaluation_keys(), d.bundle);
  const ServerRole srv_n(naive_cfg, params, d.keys.evaluation_keys(), d.bundle);
  ActuatorRole act_p(packed_cfg, params, d.keys.sk, d.bundle.packed.k_quantized);
  ActuatorRole act_n(naive_cfg, params, d.keys.sk, d.bundle.packed.k_quantized);

  std::vector<double> t[2][3];
  Rng rng(base.seed + 17);
  const double reach = static_cast<double>(base.n / 2) - static_cast<double>(base.stage_len) - 1.0;
  // trial 0 is an untimed warm-up for both paths (first-touch allocations)
  for (std::size_t trial = 0; trial <= trials; ++trial) {
    const Image frame = cam_p.observe(rng.uniform_real(-reach, reach));
    Reading readings[2];
    int row = 0;
    for (auto* roles : {&cam_p, &cam_n}) {
      const ServerRole& srv = row == 0 ? srv_p : srv_n;
      ActuatorRole& act = row == 0 ? act_p : act_n;
      auto t0 = std::chrono::steady_clock::now();
      const CameraPayload payload = roles->capture(frame);
      t[row][0].push_back(seconds_since(t0));
      t0 = std::chrono::steady_clock::now();
      const ServerResult r = srv.evaluate(payload);
      t[row][1].push_back(seconds_since(t0));
      t0 = std::chrono::steady_clock::now();
      readings[row] = act.decode(r).reading;
      t[row][2].push_back(seconds_since(t0));
      ++row;
    }
    if (!(readings[0] == readings[1])) throw Error("packed and naive readings differ on the same frame");
    if (trial == 0) {
      for (auto& row_times : t) {
        for (auto& v : row_times) v.clear();
      }
    } else if (progress) {
      progress(trial - 1);
    }
  }
  BenchResult out{base.preset, base.n, trials, {}, {}};
  out.packed = {mean_std(t[0][0]), mean_std(t[0][1]), mean_std(t[0][2])};
  out.naive = {mean_std(t[1][0]), mean_std(t[1][1]), mean_std(t[1][2])};
  return out;
}

}  // namespace evfc
