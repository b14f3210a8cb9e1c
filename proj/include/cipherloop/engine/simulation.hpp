#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cipherloop/engine/audit.hpp"
#include "cipherloop/engine/layout.hpp"
#include "cipherloop/engine/parties.hpp"
#include "cipherloop/engine/runtime.hpp"
#include "cipherloop/qp.hpp"

namespace cipherloop::engine {

enum class TransportMode { Lockstep, Threaded, Tcp };

TransportMode parse_transport(const std::string& s);
std::string to_string(TransportMode mode);

struct RunConfig {
  KeySizes keys;
  FpParams fp;
  std::size_t horizon = 4;
  std::size_t iterations = 40;
  std::size_t steps = 20;
  /// Carries the subsystem partition in state_parts / input_parts.
  qp::SystemModel model;
  /// Per-step input bounds, length m.
  qp::Vector lower, upper;
  qp::Vector x0;
  std::uint64_t seed = 1;
  TransportMode transport = TransportMode::Lockstep;
  /// Declared bound on |u_enc - u_float| per component.
  double float_tolerance = 1.0 / 1024.0;
  std::string model_path;
  std::string out_dir = "out";

  qp::BoxConstraints stacked_box() const;
  /// ConfigInvalid / DimensionMismatch / NonPsd / BudgetExceeded /
  /// BlindingOverflow / BitWidthMismatch.
  void validate() const;
};

/// JSON config; the model path is resolved against the config's directory.
/// ParseError on malformed files.
RunConfig load_config(const std::string& path);
/// JSON model with arrays A, B, P, Q, R (row-major nested lists) and l_u, h_u.
void load_model(const std::string& path, RunConfig& cfg);
/// Writes `config.json` and `model.json` into dir; load_config reads them back.
void write_config(const RunConfig& cfg, const std::string& dir);

/// The five parties wired to a runtime, plus the instrumentation every run
/// carries: frame trace, taint audit and label ledger.
class Session {
 public:
  explicit Session(const RunConfig& cfg);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Key distribution, label allocation, offline secrets and input upload.
  void initialize();
  /// One encrypted MPC step from the plant state x; returns u(t) as
  /// fixed-point integers, as received by the Actuator.
  qp::IntVector run_mpc_step(std::uint32_t t, const qp::Vector& x);

  const Layout& layout() const { return layout_; }
  SetupParty& setup() { return *setup_; }
  CloudParty& cloud() { return *cloud_; }
  ActuatorParty& actuator() { return *actuator_; }
  const Trace& trace() const { return trace_; }
  const TaintAudit& audit() const { return audit_; }
  const LabelLedger& ledger() const { return ledger_; }
  std::size_t frames_sent() const { return runtime_->frames_sent(); }

 private:
  RunConfig cfg_;
  Layout layout_;
  Trace trace_;
  TaintAudit audit_;
  LabelLedger ledger_;
  std::unique_ptr<SetupParty> setup_;
  std::vector<std::unique_ptr<SubsystemParty>> subsystems_;
  std::unique_ptr<CloudParty> cloud_;
  std::unique_ptr<ActuatorParty> actuator_;
  std::unique_ptr<Runtime> runtime_;
  bool initialized_ = false;
};

struct StepRecord {
  std::uint32_t t = 0;
  qp::Vector x;          // state the input was computed from
  qp::IntVector u_raw;   // fixed-point u(t)
  qp::Vector u;          // decoded u(t)
  double seconds = 0;
  std::size_t frames = 0;
  std::size_t bytes = 0;
};

struct SimulationResult {
  std::vector<StepRecord> steps;
  qp::Vector x_final;
  double init_seconds = 0;
  std::vector<TraceRecord> trace;
  std::size_t frames_sent = 0;
  std::size_t audited = 0;
  std::size_t cloud_violations = 0;
  std::size_t actuator_violations = 0;
  std::size_t order_violations = 0;
  std::vector<std::string> audit_details;
  std::map<std::string, std::size_t> labels_recorded;
  std::map<std::string, std::size_t> labels_expected;
  std::size_t label_duplicates = 0;
  std::size_t secrets_expected = 0;
  std::size_t secrets_used = 0;
  std::size_t swaps = 0;
  std::size_t swap_draws = 0;
};

SimulationResult run_simulation(const RunConfig& cfg);

/// Plaintext closed loop with fgm_solve_fixed: the bit-exact oracle.
struct FixedOracle {
  std::vector<qp::IntVector> u;   // per step, m entries
  std::vector<qp::IntVector> U0;  // initial iterate per step
  std::vector<qp::Vector> x;      // state per step
  qp::Vector x_final;
};

FixedOracle fixed_closed_loop(const RunConfig& cfg);

struct VerifyReport {
  bool bit_exact = false;
  std::size_t mismatched_steps = 0;
  double max_fixed_deviation = 0;
  double max_float_deviation = 0;
  double tolerance = 0;
  bool within_tolerance = false;
  double x0_norm = 0;
  double xT_norm = 0;
};

/// Compares an encrypted run against the fixed-point oracle (exact) and a
/// float FGM started from the same state and warm start (tolerance).
VerifyReport verify(const RunConfig& cfg, const SimulationResult& run);

/// results.csv: t, u_0.., x_0..  (deterministic for a fixed seed)
void write_results_csv(const std::string& path, const SimulationResult& run);
/// timing.csv: t, seconds, frames, bytes
void write_timing_csv(const std::string& path, const SimulationResult& run);
/// trace.csv: t, k, from, to, type, bytes
void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace);

}  // namespace cipherloop::engine
