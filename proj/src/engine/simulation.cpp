#include "cipherloop/engine/simulation.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"
#include <spdlog/spdlog.h>

#include "cipherloop/error.hpp"

namespace cipherloop::engine {

namespace {

using nlohmann::json;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::ConfigInvalid, where + ": unknown key '" + key + "'");
  }
}

qp::Vector to_vector(const json& j, const std::string& name) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, name + ": expected a list of numbers");
  qp::Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::ParseError, name + ": non-numeric entry");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

qp::Matrix to_matrix(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::ParseError, name + ": expected a non-empty list of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array()) throw Error(ErrorCode::ParseError, name + ": rows must be lists");
  const std::size_t cols = j[0].size();
  qp::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw Error(ErrorCode::ParseError, name + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw Error(ErrorCode::ParseError, name + ": non-numeric entry");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

template <typename T>
T get(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string(key) + ": " + e.what());
  }
}

std::vector<std::size_t> to_sizes(const json& j, const std::string& name) {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, name + ": expected a list of sizes");
  std::vector<std::size_t> out;
  for (const auto& v : j) {
    if (!v.is_number_unsigned()) throw Error(ErrorCode::ParseError, name + ": sizes must be non-negative integers");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  return out;
}

}  // namespace

TransportMode parse_transport(const std::string& s) {
  if (s == "inproc" || s == "lockstep") return TransportMode::Lockstep;
  if (s == "threaded") return TransportMode::Threaded;
  if (s == "tcp") return TransportMode::Tcp;
  throw Error(ErrorCode::ConfigInvalid, "unknown transport '" + s + "' (inproc, threaded, tcp)");
}

std::string to_string(TransportMode mode) {
  switch (mode) {
    case TransportMode::Lockstep: return "inproc";
    case TransportMode::Threaded: return "threaded";
    case TransportMode::Tcp: return "tcp";
  }
  return "inproc";
}

qp::BoxConstraints RunConfig::stacked_box() const { return qp::BoxConstraints::repeat(lower, upper, horizon); }

void RunConfig::validate() const {
  model.validate();
  const Layout layout = Layout::make(model, horizon, iterations, steps);
  if (static_cast<std::size_t>(lower.size()) != model.m() || static_cast<std::size_t>(upper.size()) != model.m()) {
    throw Error(ErrorCode::DimensionMismatch, "l_u and h_u need m entries");
  }
  stacked_box().validate(layout.dim());
  if (static_cast<std::size_t>(x0.size()) != model.n()) throw Error(ErrorCode::DimensionMismatch, "x0 needs n entries");
  if (!(float_tolerance > 0)) throw Error(ErrorCode::ConfigInvalid, "float_tolerance must be positive");
  if (keys.dgk.n_bits < 128 || keys.dgk.t_bits < 8 || keys.dgk.t_bits * 2 >= keys.dgk.n_bits) {
    throw Error(ErrorCode::ConfigInvalid, "DGK sizes out of range");
  }
  check_key_budget(fp, keys);
  const double limit = std::ldexp(1.0, fp.int_bits);
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (std::abs(lower[i]) >= limit || std::abs(upper[i]) >= limit) {
      throw Error(ErrorCode::ConfigInvalid, "input bounds exceed the fixed-point range");
    }
  }
}

void load_model(const std::string& path, RunConfig& cfg) {
  const json j = read_json(path);
  reject_unknown(j, {"A", "B", "P", "Q", "R", "l_u", "h_u"}, path);
  for (const char* key : {"A", "B", "P", "Q", "R", "l_u", "h_u"}) {
    if (!j.contains(key)) throw Error(ErrorCode::ParseError, path + ": missing '" + key + "'");
  }
  cfg.model.A = to_matrix(j["A"], "A");
  cfg.model.B = to_matrix(j["B"], "B");
  cfg.model.P = to_matrix(j["P"], "P");
  cfg.model.Q = to_matrix(j["Q"], "Q");
  cfg.model.R = to_matrix(j["R"], "R");
  cfg.lower = to_vector(j["l_u"], "l_u");
  cfg.upper = to_vector(j["h_u"], "h_u");
  cfg.model_path = path;
}

RunConfig load_config(const std::string& path) {
  const json j = read_json(path);
  reject_unknown(j,
                 {"model", "ahe_bits", "dgk", "fixed_point", "horizon", "iterations", "steps", "x0", "seed",
                  "transport", "float_tolerance", "out", "partition"},
                 path);
  RunConfig cfg;
  if (!j.contains("model") || !j["model"].is_string()) throw Error(ErrorCode::ParseError, "config needs 'model'");
  std::filesystem::path model = j["model"].get<std::string>();
  if (model.is_relative()) model = std::filesystem::path(path).parent_path() / model;
  load_model(model.string(), cfg);

  cfg.keys.ahe_bits = get<std::size_t>(j, "ahe_bits", cfg.keys.ahe_bits);
  if (j.contains("dgk")) {
    const auto& d = j["dgk"];
    reject_unknown(d, {"n_bits", "t_bits", "u_bits"}, "dgk");
    cfg.keys.dgk.n_bits = get<std::size_t>(d, "n_bits", cfg.keys.dgk.n_bits);
    cfg.keys.dgk.t_bits = get<std::size_t>(d, "t_bits", cfg.keys.dgk.t_bits);
    cfg.keys.dgk.u_bits = get<std::size_t>(d, "u_bits", cfg.keys.dgk.u_bits);
  }
  if (j.contains("fixed_point")) {
    const auto& f = j["fixed_point"];
    reject_unknown(f, {"int_bits", "frac_bits", "stat_bits"}, "fixed_point");
    cfg.fp.int_bits = get<int>(f, "int_bits", cfg.fp.int_bits);
    cfg.fp.frac_bits = get<int>(f, "frac_bits", cfg.fp.frac_bits);
    cfg.fp.stat_bits = get<int>(f, "stat_bits", cfg.fp.stat_bits);
  }
  cfg.horizon = get<std::size_t>(j, "horizon", cfg.horizon);
  cfg.iterations = get<std::size_t>(j, "iterations", cfg.iterations);
  cfg.steps = get<std::size_t>(j, "steps", cfg.steps);
  if (!j.contains("x0")) throw Error(ErrorCode::ParseError, "config needs 'x0'");
  cfg.x0 = to_vector(j["x0"], "x0");
  cfg.seed = get<std::uint64_t>(j, "seed", cfg.seed);
  cfg.transport = parse_transport(get<std::string>(j, "transport", "inproc"));
  cfg.float_tolerance = get<double>(j, "float_tolerance", cfg.float_tolerance);
  cfg.out_dir = get<std::string>(j, "out", cfg.out_dir);
  if (j.contains("partition")) {
    const auto& p = j["partition"];
    reject_unknown(p, {"state", "input"}, "partition");
    if (!p.contains("state") || !p.contains("input")) {
      throw Error(ErrorCode::ParseError, "partition needs 'state' and 'input'");
    }
    cfg.model.state_parts = to_sizes(p["state"], "partition.state");
    cfg.model.input_parts = to_sizes(p["input"], "partition.input");
  }
  cfg.validate();
  return cfg;
}

namespace {

json matrix_json(const qp::Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const qp::Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

}  // namespace

void write_config(const RunConfig& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const json model = {{"A", matrix_json(cfg.model.A)}, {"B", matrix_json(cfg.model.B)},
                      {"P", matrix_json(cfg.model.P)}, {"Q", matrix_json(cfg.model.Q)},
                      {"R", matrix_json(cfg.model.R)}, {"l_u", vector_json(cfg.lower)},
                      {"h_u", vector_json(cfg.upper)}};
  json config = {
      {"model", "model.json"},
      {"ahe_bits", cfg.keys.ahe_bits},
      {"dgk", {{"n_bits", cfg.keys.dgk.n_bits}, {"t_bits", cfg.keys.dgk.t_bits}, {"u_bits", cfg.keys.dgk.u_bits}}},
      {"fixed_point",
       {{"int_bits", cfg.fp.int_bits}, {"frac_bits", cfg.fp.frac_bits}, {"stat_bits", cfg.fp.stat_bits}}},
      {"horizon", cfg.horizon},
      {"iterations", cfg.iterations},
      {"steps", cfg.steps},
      {"x0", vector_json(cfg.x0)},
      {"seed", cfg.seed},
      {"transport", to_string(cfg.transport)},
      {"float_tolerance", cfg.float_tolerance},
      {"out", cfg.out_dir}};
  if (!cfg.model.state_parts.empty()) {
    config["partition"] = {{"state", cfg.model.state_parts}, {"input", cfg.model.input_parts}};
  }
  const std::filesystem::path base(dir);
  open_out((base / "model.json").string()) << model.dump(2) << "\n";
  open_out((base / "config.json").string()) << config.dump(2) << "\n";
}

// -------------------------------------------------------------- Session

Session::Session(const RunConfig& cfg)
    : cfg_(cfg), layout_((cfg.validate(), Layout::make(cfg.model, cfg.horizon, cfg.iterations, cfg.steps))),
      audit_(cfg.fp.stat_bits) {
  const Rng master = Rng::from_seed(cfg_.seed);
  const auto box = cfg_.stacked_box();
  actuator_ = std::make_unique<ActuatorParty>(layout_, cfg_.fp, cfg_.keys, master.split("actuator"), &ledger_);
  setup_ = std::make_unique<SetupParty>(layout_, cfg_.fp, cfg_.model, master.split("setup"), &ledger_);
  cloud_ = std::make_unique<CloudParty>(layout_, cfg_.fp, master.split("cloud"));
  for (std::size_t i = 0; i < layout_.subsystems(); ++i) {
    const auto coords = layout_.input_coords(i);
    qp::Vector lo(static_cast<Eigen::Index>(coords.size())), hi(static_cast<Eigen::Index>(coords.size()));
    for (std::size_t q = 0; q < coords.size(); ++q) {
      lo[static_cast<Eigen::Index>(q)] = box.lower[static_cast<Eigen::Index>(coords[q])];
      hi[static_cast<Eigen::Index>(q)] = box.upper[static_cast<Eigen::Index>(coords[q])];
    }
    subsystems_.push_back(std::make_unique<SubsystemParty>(layout_, i, cfg_.fp, std::move(lo), std::move(hi),
                                                           master.split(subsystem_name(i)), &ledger_));
  }
  std::vector<Party*> parties = {setup_.get(), cloud_.get(), actuator_.get()};
  for (auto& s : subsystems_) parties.push_back(s.get());
  const Observers obs{&trace_, &audit_};
  switch (cfg_.transport) {
    case TransportMode::Lockstep: runtime_ = std::make_unique<LockstepRuntime>(parties, obs); break;
    case TransportMode::Threaded: runtime_ = std::make_unique<ThreadedRuntime>(parties, obs); break;
    case TransportMode::Tcp: runtime_ = std::make_unique<TcpRuntime>(parties, obs); break;
  }
}

Session::~Session() { runtime_.reset(); }

void Session::initialize() {
  if (initialized_) throw Error(ErrorCode::ProtocolOrderViolation, "session already initialized");
  PartyMessage start;
  start.from = party::kDriver;
  start.to = party::kActuator;
  start.type = MsgType::Start;
  runtime_->send(start);
  std::set<PartyId> done;
  while (done.size() < 2) {
    const PartyMessage msg = runtime_->receive();
    if (msg.type != MsgType::InitDone || (msg.from != party::kCloud && msg.from != party::kActuator)) {
      throw Error(ErrorCode::ProtocolOrderViolation, "driver expected InitDone, got " + to_string(msg.type));
    }
    done.insert(msg.from);
  }
  initialized_ = true;
}

qp::IntVector Session::run_mpc_step(std::uint32_t t, const qp::Vector& x) {
  if (!initialized_) throw Error(ErrorCode::ProtocolOrderViolation, "step before initialization");
  if (static_cast<std::size_t>(x.size()) != layout_.n) throw Error(ErrorCode::DimensionMismatch, "state size");
  for (std::size_t i = 0; i < layout_.subsystems(); ++i) {
    PartyMessage m;
    m.from = party::kDriver;
    m.to = subsystem_id(i);
    m.type = MsgType::Measure;
    m.tag = {t, 0, phase::kMeasurement};
    const std::size_t off = layout_.state_offset(i);
    for (std::size_t j = 0; j < layout_.n_parts[i]; ++j) {
      m.payload.ints.emplace_back(std::bit_cast<std::uint64_t>(x[static_cast<Eigen::Index>(off + j)]));
    }
    runtime_->send(m);
  }
  const PartyMessage out = runtime_->receive();
  if (out.type != MsgType::Output || out.from != party::kActuator || out.tag.t != t) {
    throw Error(ErrorCode::ProtocolOrderViolation, "driver expected the output of step " + std::to_string(t));
  }
  if (out.payload.ints.size() != layout_.m) throw Error(ErrorCode::DimensionMismatch, "output size");
  qp::IntVector u;
  for (const auto& v : out.payload.ints) u.push_back(unzigzag(v));
  return u;
}

// ----------------------------------------------------------- Simulation

SimulationResult run_simulation(const RunConfig& cfg) {
  SimulationResult res;
  Session s(cfg);
  auto t0 = std::chrono::steady_clock::now();
  s.initialize();
  res.init_seconds = seconds_since(t0);
  spdlog::info("initialization done in {:.2f} s ({} frames)", res.init_seconds, s.trace().frames());

  qp::Vector x = cfg.x0;
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    const std::size_t frames0 = s.trace().frames();
    const std::size_t bytes0 = s.trace().bytes();
    t0 = std::chrono::steady_clock::now();
    StepRecord rec;
    rec.t = static_cast<std::uint32_t>(t);
    rec.x = x;
    rec.u_raw = s.run_mpc_step(rec.t, x);
    rec.seconds = seconds_since(t0);
    rec.frames = s.trace().frames() - frames0;
    rec.bytes = s.trace().bytes() - bytes0;
    rec.u = qp::decode_vector(rec.u_raw, cfg.fp);
    x = qp::plant_step(cfg.model, x, rec.u);
    spdlog::info("step {:>3}: u0 = {: .6f}, |x| = {:.6f}, {:.2f} s", t, rec.u[0], x.norm(), rec.seconds);
    res.steps.push_back(std::move(rec));
  }
  res.x_final = x;
  res.trace = s.trace().records();
  res.frames_sent = s.frames_sent();
  const auto& audit = s.audit();
  res.audited = audit.inspected();
  res.cloud_violations = audit.cloud_violations();
  res.actuator_violations = audit.actuator_violations();
  res.order_violations = audit.order_violations();
  res.audit_details = audit.details();
  const auto& layout = s.layout();
  res.labels_expected["setup"] = layout.setup_label_count();
  res.labels_expected["actuator"] = layout.actuator_label_count();
  for (std::size_t i = 0; i < layout.subsystems(); ++i) {
    res.labels_expected[subsystem_name(i)] = layout.subsystem_label_count(i);
  }
  for (const auto& [owner, _] : res.labels_expected) res.labels_recorded[owner] = s.ledger().count(owner);
  res.label_duplicates = s.ledger().duplicates();
  res.secrets_expected = layout.steps * layout.iterations * layout.dim();
  res.secrets_used = s.actuator().secrets_used();
  res.swaps = s.cloud().swaps();
  res.swap_draws = s.cloud().swap_draws();
  return res;
}

FixedOracle fixed_closed_loop(const RunConfig& cfg) {
  cfg.validate();
  const auto qpd = qp::condense(cfg.model, cfg.horizon);
  const auto fq = qp::encode_qp(qpd, cfg.stacked_box(), cfg.fp);
  const std::size_t m = cfg.model.m();
  FixedOracle o;
  qp::IntVector warm(qpd.dim(), mpz_class(0));
  qp::Vector x = cfg.x0;
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    o.x.push_back(x);
    o.U0.push_back(warm);
    const auto UK = qp::fgm_solve_fixed(fq, qp::encode_vector(x, cfg.fp), cfg.iterations, warm);
    qp::IntVector u(UK.begin(), UK.begin() + static_cast<std::ptrdiff_t>(m));
    warm = qp::warm_start(UK, m);
    x = qp::plant_step(cfg.model, x, qp::decode_vector(u, cfg.fp));
    o.u.push_back(std::move(u));
  }
  o.x_final = x;
  return o;
}

VerifyReport verify(const RunConfig& cfg, const SimulationResult& run) {
  if (run.steps.size() != cfg.steps) throw Error(ErrorCode::DimensionMismatch, "run has the wrong number of steps");
  const FixedOracle oracle = fixed_closed_loop(cfg);
  const auto qpd = qp::condense(cfg.model, cfg.horizon);
  const auto box = cfg.stacked_box();
  VerifyReport r;
  r.tolerance = cfg.float_tolerance;
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    const auto& step = run.steps[t];
    if (step.u_raw != oracle.u[t]) ++r.mismatched_steps;
    const qp::Vector u_fixed = qp::decode_vector(oracle.u[t], cfg.fp);
    r.max_fixed_deviation = std::max(r.max_fixed_deviation, (step.u - u_fixed).cwiseAbs().maxCoeff());
    const qp::Vector U0 = qp::decode_vector(oracle.U0[t], cfg.fp);
    const qp::Vector U = qp::fgm_solve(qpd, box, step.x, cfg.iterations, U0);
    const qp::Vector u_float = qp::extract_first_input(U, cfg.model.m());
    r.max_float_deviation = std::max(r.max_float_deviation, (step.u - u_float).cwiseAbs().maxCoeff());
  }
  r.bit_exact = r.mismatched_steps == 0;
  r.within_tolerance = r.max_float_deviation <= r.tolerance;
  r.x0_norm = cfg.x0.norm();
  r.xT_norm = run.x_final.norm();
  return r;
}

void write_results_csv(const std::string& path, const SimulationResult& run) {
  auto out = open_out(path);
  const std::size_t m = run.steps.empty() ? 0 : static_cast<std::size_t>(run.steps[0].u.size());
  const std::size_t n = run.steps.empty() ? 0 : static_cast<std::size_t>(run.steps[0].x.size());
  out << "t";
  for (std::size_t i = 0; i < m; ++i) out << ",u" << i;
  for (std::size_t i = 0; i < n; ++i) out << ",x" << i;
  out << "\n";
  for (const auto& s : run.steps) {
    out << s.t;
    for (Eigen::Index i = 0; i < s.u.size(); ++i) out << "," << num(s.u[i]);
    for (Eigen::Index i = 0; i < s.x.size(); ++i) out << "," << num(s.x[i]);
    out << "\n";
  }
}

void write_timing_csv(const std::string& path, const SimulationResult& run) {
  auto out = open_out(path);
  out << "t,seconds,frames,bytes\n";
  out << "init," << num(run.init_seconds) << ",,\n";
  for (const auto& s : run.steps) out << s.t << "," << num(s.seconds) << "," << s.frames << "," << s.bytes << "\n";
}

void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace) {
  auto out = open_out(path);
  out << "t,k,from,to,type,bytes\n";
  for (const auto& r : trace) {
    out << r.tag.t << "," << r.tag.k << "," << party_name(r.from) << "," << party_name(r.to) << ","
        << to_string(r.type) << "," << r.bytes << "\n";
  }
}

}  // namespace cipherloop::engine
