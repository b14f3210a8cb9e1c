#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "cipherloop/engine/simulation.hpp"
#include "cipherloop/error.hpp"

using namespace cipherloop;
using namespace cipherloop::engine;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> transport;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Options& o, bool config_required) {
  auto* c = cmd->add_option("--config", o.config, "Run configuration (JSON)");
  if (config_required) c->required();
  cmd->add_option("--seed", o.seed, "Override the configured seed");
  cmd->add_option("--transport", o.transport, "Message transport")
      ->check(CLI::IsMember({"inproc", "threaded", "tcp"}));
  cmd->add_option("--out", o.out, "Output directory");
}

RunConfig resolve(const Options& o) {
  RunConfig cfg = load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.transport) cfg.transport = parse_transport(*o.transport);
  if (o.out) cfg.out_dir = *o.out;
  return cfg;
}

SimulationResult run_and_write(const RunConfig& cfg) {
  const auto run = run_simulation(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  const std::filesystem::path dir(cfg.out_dir);
  write_results_csv((dir / "results.csv").string(), run);
  write_timing_csv((dir / "timing.csv").string(), run);
  write_trace_csv((dir / "trace.csv").string(), run.trace);
  std::printf("%zu steps, %zu frames, |x(0)| = %.6g, |x(T)| = %.6g, audit violations %zu\n", run.steps.size(),
              run.frames_sent, cfg.x0.norm(), run.x_final.norm(),
              run.cloud_violations + run.actuator_violations + run.order_violations);
  std::printf("wrote %s/{results,timing,trace}.csv\n", cfg.out_dir.c_str());
  return run;
}

int cmd_run(const Options& o) {
  run_and_write(resolve(o));
  return 0;
}

int cmd_verify(const Options& o) {
  const RunConfig cfg = resolve(o);
  const auto run = run_and_write(cfg);
  const auto r = verify(cfg, run);
  std::printf("max |u_enc - u_fixed| = %.17g (%zu/%zu steps bit-exact)\n", r.max_fixed_deviation,
              cfg.steps - r.mismatched_steps, cfg.steps);
  std::printf("max |u_enc - u_float| = %.6g, declared tolerance %.6g: %s\n", r.max_float_deviation, r.tolerance,
              r.within_tolerance ? "within" : "exceeded");
  std::printf("closed loop |x(T)| / |x(0)| = %.6g\n", r.x0_norm > 0 ? r.xT_norm / r.x0_norm : 0.0);
  std::printf("%s\n", r.bit_exact ? "VERIFY OK" : "VERIFY FAILED: encrypted output differs from the fixed-point oracle");
  return r.bit_exact ? 0 : 1;
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.model.A = qp::Matrix{{1, 1}, {0, 1}};
  cfg.model.B = qp::Matrix{{0}, {1}};
  cfg.model.P = qp::Matrix::Identity(2, 2);
  cfg.model.Q = qp::Matrix::Identity(2, 2);
  cfg.model.R = qp::Matrix::Identity(1, 1);
  cfg.model.state_parts = {1, 1};
  cfg.model.input_parts = {1, 0};
  cfg.lower = qp::Vector::Constant(1, -1.0);
  cfg.upper = qp::Vector::Constant(1, 1.0);
  cfg.x0 = qp::Vector{{5.0, 0.0}};
  return cfg;
}

std::string hex(const BigUint& v) { return v.mpz().get_str(16); }

int cmd_keygen(const Options& o) {
  RunConfig cfg = o.config.empty() ? default_config() : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.transport) cfg.transport = parse_transport(*o.transport);
  const std::string dir = o.out ? *o.out : cfg.out_dir;
  cfg.validate();
  write_config(cfg, dir);

  // Key distribution only: the public keys the Actuator publishes for this seed.
  Session s(cfg);
  s.initialize();
  const auto& mpk = s.actuator().master_keys().mpk;
  const auto& dpk = s.actuator().dgk_key().pk;
  const nlohmann::json keys = {
      {"seed", cfg.seed},
      {"ahe", {{"bits", mpk.bits()}, {"n", hex(mpk.n)}, {"fingerprint", mpk.fingerprint}}},
      {"dgk",
       {{"bits", dpk.n.bit_length()},
        {"n", hex(dpk.n)},
        {"g", hex(dpk.g)},
        {"h", hex(dpk.h)},
        {"u", hex(dpk.u)},
        {"t_bits", dpk.t_bits},
        {"fingerprint", dpk.fingerprint}}}};
  const auto path = std::filesystem::path(dir) / "public_keys.json";
  std::ofstream(path) << keys.dump(2) << "\n";
  std::printf("wrote %s/config.json, model.json, public_keys.json\n", dir.c_str());
  return 0;
}

void configure_logging() {
  const char* env = std::getenv("CIPHERLOOP_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::ConfigInvalid:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NonPsd:
    case ErrorCode::BudgetExceeded:
    case ErrorCode::BlindingOverflow:
    case ErrorCode::BitWidthMismatch:
      return 2;
    default:
      return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Encrypted MPC over labeled homomorphic encryption"};
  app.require_subcommand(1);
  Options run_opts, verify_opts, keygen_opts;
  auto* run = app.add_subcommand("run", "Run the encrypted closed loop and write CSV results");
  add_common(run, run_opts, true);
  auto* ver = app.add_subcommand("verify", "Run and compare against the fixed-point and float oracles");
  add_common(ver, verify_opts, true);
  auto* keygen = app.add_subcommand("keygen", "Write a configuration and the public keys for its seed");
  add_common(keygen, keygen_opts, false);
  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_opts);
    if (*ver) return cmd_verify(verify_opts);
    return cmd_keygen(keygen_opts);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
