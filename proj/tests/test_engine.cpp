#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cipherloop/engine/simulation.hpp"
#include "cipherloop/engine/truncation.hpp"
#include "cipherloop/error.hpp"
#include "doctest.h"

using namespace cipherloop;
using namespace cipherloop::engine;
using namespace cipherloop::fixedpoint;

namespace {

qp::SystemModel double_integrator() {
  qp::SystemModel m;
  m.A = qp::Matrix{{1, 1}, {0, 1}};
  m.B = qp::Matrix{{0}, {1}};
  m.P = qp::Matrix::Identity(2, 2);
  m.Q = qp::Matrix::Identity(2, 2);
  m.R = qp::Matrix::Identity(1, 1);
  m.state_parts = {1, 1};
  m.input_parts = {1, 0};
  return m;
}

RunConfig small_config(std::uint64_t seed = 7) {
  RunConfig cfg;
  cfg.keys.ahe_bits = 512;
  cfg.keys.dgk = dgk::Params{256, 40, 16};
  cfg.fp = FpParams{8, 8, 40};
  cfg.horizon = 2;
  cfg.iterations = 3;
  cfg.steps = 2;
  cfg.model = double_integrator();
  cfg.lower = qp::Vector::Constant(1, -1.0);
  cfg.upper = qp::Vector::Constant(1, 1.0);
  cfg.x0 = qp::Vector{{2.0, 0.0}};
  cfg.seed = seed;
  cfg.float_tolerance = 0.05;
  return cfg;
}

RunConfig scalar_config() {
  RunConfig cfg = small_config();
  cfg.model.A = qp::Matrix{{1.0}};
  cfg.model.B = qp::Matrix{{1.0}};
  cfg.model.P = cfg.model.Q = cfg.model.R = qp::Matrix{{1.0}};
  cfg.model.state_parts = {1};
  cfg.model.input_parts = {1};
  cfg.horizon = 1;
  cfg.iterations = 1;
  cfg.steps = 1;
  cfg.x0 = qp::Vector{{0.75}};
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cipherloop_" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

BigUint decrypt_label(Session& s, const labhe::Label& label, const LabCiphertext& c) {
  const auto& act = s.actuator();
  const auto ps = labhe::decrypt_offline(act.master_keys().msk, act.keyring(), labhe::identity_program(label));
  return labhe::decrypt_online(ps, c);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("frames round-trip with a 12-byte header") {
  auto rng = Rng::from_seed(900);
  const auto sk = paillier::keygen(256, rng).second;
  PartyMessage msg;
  msg.from = party::kCloud;
  msg.to = party::kActuator;
  msg.type = MsgType::CmpBlinded;
  msg.tag = {70000, 513, phase::kOutput};
  msg.payload.ahe = {paillier::encrypt(sk.pk, 5, rng), paillier::encrypt(sk.pk, 6, rng)};
  msg.payload.blind_bits = 40;
  const Bytes frame = encode_frame(msg);
  CHECK(frame.size() == kFrameHeaderBytes + encode_payload(msg.payload).size());
  const std::uint32_t len = (std::uint32_t{frame[0]} << 24) | (std::uint32_t{frame[1]} << 16) |
                            (std::uint32_t{frame[2]} << 8) | frame[3];
  CHECK(len + 4 == frame.size());
  CHECK(frame[4] == static_cast<std::uint8_t>(MsgType::CmpBlinded));
  const auto back = decode_frame(frame, msg.from, msg.to);
  CHECK(back.type == msg.type);
  CHECK(back.tag == msg.tag);
  CHECK(back.payload.ahe == msg.payload.ahe);
  CHECK(back.payload.blind_bits == 40);

  Bytes cut(frame.begin(), frame.end() - 3);
  CHECK(code_of([&] { decode_frame(cut, 0, 0); }) == ErrorCode::ParseError);
  Bytes bad = frame;
  bad[4] = 200;
  CHECK(code_of([&] { decode_frame(bad, 0, 0); }) == ErrorCode::ParseError);
}

TEST_CASE("zigzag maps signed integers onto naturals") {
  for (int v : {0, -1, 1, -2, 2, -1000, 1000}) CHECK(unzigzag(zigzag(v)) == v);
  CHECK(zigzag(-1) == BigUint(1));
  CHECK(zigzag(1) == BigUint(2));
}

TEST_CASE("interactive truncation is an exact floor") {
  auto rng = Rng::from_seed(901);
  const auto ahe = paillier::keygen(512, rng).second;
  const auto dk = dgk::keygen(dgk::Params{256, 40, 16}, rng).second;
  const FpParams fp{16, 16, 40};
  const BigUint& n = ahe.pk.n;

  const mpz_class six = mpz_class(6) << 32;
  const auto c = paillier::encrypt(ahe.pk, to_residue(six, n), rng);
  CHECK(to_signed(paillier::decrypt(ahe, interactive_truncate(c, ahe, dk, fp, rng)), n) == mpz_class(6) << 16);

  const int width = truncation_width(fp);
  std::size_t ok = 0;
  const std::size_t trials = 10000;
  for (std::size_t i = 0; i < trials; ++i) {
    mpz_class v = rng.bits(static_cast<std::size_t>(width - 1)).mpz();
    if (rng.next_bit()) v = -v;
    const auto cv = paillier::encrypt(ahe.pk, to_residue(v, n), rng);
    const auto out = to_signed(paillier::decrypt(ahe, interactive_truncate(cv, ahe, dk, fp, rng)), n);
    ok += out == floor_shift(v, fp.frac_bits);
  }
  CHECK(ok == trials);
}

TEST_CASE("truncation budget") {
  auto rng = Rng::from_seed(902);
  const auto small = paillier::keygen(96, rng).second;
  CHECK(code_of([&] { check_truncation_budget(FpParams{16, 16, 40}, small.pk.n); }) == ErrorCode::BudgetExceeded);
  auto cfg = small_config();
  cfg.fp.stat_bits = 480;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = small_config();
  cfg.keys.ahe_bits = 256;
  cfg.fp.stat_bits = 230;
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::BudgetExceeded);
}

TEST_CASE("setup matrices decrypt to the fixed-point QP") {
  const auto cfg = small_config();
  Session s(cfg);
  s.initialize();
  const auto& L = s.layout();
  const auto& fq = s.setup().fixed_qp();
  const BigUint& n = s.actuator().master_keys().mpk.n;
  for (std::size_t i = 0; i < L.dim(); ++i) {
    for (std::size_t j = 0; j < L.dim(); ++j) {
      const auto hm = L.hm_label(i, j);
      const auto he = L.he_label(i, j);
      CHECK(to_signed(decrypt_label(s, hm, s.cloud().setup_input(hm)), n) == fq.hm[i * L.dim() + j]);
      CHECK(to_signed(decrypt_label(s, he, s.cloud().setup_input(he)), n) == fq.he[i * L.dim() + j]);
    }
    for (std::size_t j = 0; j < L.n; ++j) {
      const auto fl = L.fl_label(i, j);
      CHECK(to_signed(decrypt_label(s, fl, s.cloud().setup_input(fl)), n) == fq.fl[i * L.n + j]);
    }
  }
  const auto eta = L.eta_label();
  CHECK(to_signed(decrypt_label(s, eta, s.cloud().setup_input(eta)), n) == fq.e);
  const auto& sk = *s.actuator().master_keys().msk;
  const auto box = qp::encode_vector(cfg.stacked_box().upper, cfg.fp);
  REQUIRE(s.cloud().upper_bounds().size() == L.dim());
  for (std::size_t i = 0; i < L.dim(); ++i) {
    CHECK(to_signed(paillier::decrypt(sk, s.cloud().upper_bounds()[i]), n) == box[i]);
  }
}

TEST_CASE("one iteration on the scalar example matches the fixed-point oracle") {
  const auto cfg = scalar_config();
  const auto run = run_simulation(cfg);
  const auto oracle = fixed_closed_loop(cfg);
  const auto fq = qp::encode_qp(qp::condense(cfg.model, 1), cfg.stacked_box(), cfg.fp);
  const auto x = qp::encode_vector(cfg.x0, cfg.fp);
  const qp::IntVector U0(1, mpz_class(0));
  REQUIRE(run.steps.size() == 1);
  CHECK(run.steps[0].u_raw == qp::fixed_iteration(fq, x, U0, U0));
  CHECK(run.steps[0].u_raw == oracle.u[0]);
  CHECK(run.steps[0].u_raw[0] != 0);
}

TEST_CASE("small closed loop is bit-exact and clean") {
  const auto cfg = small_config();
  const auto run = run_simulation(cfg);
  const auto report = verify(cfg, run);
  CHECK(report.bit_exact);
  CHECK(report.within_tolerance);
  CHECK(run.cloud_violations == 0);
  CHECK(run.actuator_violations == 0);
  CHECK(run.order_violations == 0);
  CHECK(run.label_duplicates == 0);
  CHECK(run.secrets_used == run.secrets_expected);
  CHECK(run.labels_recorded == run.labels_expected);
  CHECK(run.trace.size() == run.frames_sent);
  CHECK(run.audited == run.frames_sent);
}

TEST_CASE("degenerate box forces U = 0") {
  auto cfg = small_config();
  cfg.lower.setZero();
  cfg.upper.setZero();
  const auto run = run_simulation(cfg);
  for (const auto& s : run.steps) CHECK(s.u_raw == qp::IntVector(1, mpz_class(0)));
  CHECK(verify(cfg, run).bit_exact);
}

TEST_CASE("a box wider than the iterates leaves the projection inactive") {
  auto cfg = small_config();
  cfg.lower.setConstant(-100.0);
  cfg.upper.setConstant(100.0);
  const auto run = run_simulation(cfg);
  // Oracle without any clamp: bounds far outside the representable range.
  auto fq = qp::encode_qp(qp::condense(cfg.model, cfg.horizon), cfg.stacked_box(), cfg.fp);
  for (auto& v : fq.lower) v = -(mpz_class(1) << 200);
  for (auto& v : fq.upper) v = mpz_class(1) << 200;
  qp::IntVector warm(fq.dim, mpz_class(0));
  for (const auto& s : run.steps) {
    const auto UK = qp::fgm_solve_fixed(fq, qp::encode_vector(s.x, cfg.fp), cfg.iterations, warm);
    CHECK(s.u_raw == qp::IntVector(UK.begin(), UK.begin() + 1));
    warm = qp::warm_start(UK, 1);
  }
}

TEST_CASE("zero state gives zero input") {
  auto cfg = small_config();
  cfg.x0.setZero();
  const auto run = run_simulation(cfg);
  for (const auto& s : run.steps) CHECK(s.u_raw == qp::IntVector(1, mpz_class(0)));
  const auto report = verify(cfg, run);
  CHECK(report.max_fixed_deviation == 0.0);
  CHECK(report.max_float_deviation == 0.0);
}

TEST_CASE("seeded runs are reproducible and transports agree") {
  const auto dir = temp_dir("determinism");
  auto cfg = small_config(11);
  const auto a = run_simulation(cfg);
  const auto b = run_simulation(cfg);
  write_results_csv((dir / "a.csv").string(), a);
  write_results_csv((dir / "b.csv").string(), b);
  CHECK(slurp((dir / "a.csv").string()) == slurp((dir / "b.csv").string()));
  CHECK(a.swaps == b.swaps);

  for (auto mode : {TransportMode::Threaded, TransportMode::Tcp}) {
    cfg.transport = mode;
    const auto c = run_simulation(cfg);
    CAPTURE(to_string(mode));
    write_results_csv((dir / "c.csv").string(), c);
    CHECK(slurp((dir / "a.csv").string()) == slurp((dir / "c.csv").string()));
    CHECK(c.trace.size() == a.trace.size());
    CHECK(c.cloud_violations + c.actuator_violations + c.order_violations == 0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("trace.csv has one row per frame") {
  const auto dir = temp_dir("trace");
  const auto run = run_simulation(small_config());
  write_trace_csv((dir / "trace.csv").string(), run.trace);
  std::ifstream in(dir / "trace.csv");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == run.frames_sent + 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("per-coordinate swaps are fair") {
  std::size_t swaps = 0, draws = 0;
  for (std::uint64_t seed = 20; seed < 25; ++seed) {
    auto cfg = small_config(seed);
    cfg.horizon = 4;
    cfg.iterations = 10;
    cfg.steps = 3;
    const auto run = run_simulation(cfg);
    swaps += run.swaps;
    draws += run.swap_draws;
  }
  REQUIRE(draws >= 1000);
  const double freq = static_cast<double>(swaps) / static_cast<double>(draws);
  CHECK(freq > 0.45);
  CHECK(freq < 0.55);
}

TEST_CASE("taint audit flags inadmissible payloads") {
  TaintAudit audit(40);
  PartyMessage m;
  m.from = subsystem_id(0);
  m.to = party::kCloud;
  m.type = MsgType::Measurement;
  m.tag = {0, 0, phase::kMeasurement};
  m.payload.ints = {BigUint(3)};
  audit.inspect(m);
  CHECK(audit.cloud_violations() == 1);

  PartyMessage b;
  b.from = party::kCloud;
  b.to = party::kActuator;
  b.type = MsgType::TruncBlinded;
  b.tag = {0, 0, phase::kTruncBlinded};
  b.payload.blind_bits = 39;
  audit.inspect(b);
  CHECK(audit.actuator_violations() == 1);

  b.payload.blind_bits = 40;
  audit.inspect(b);
  CHECK(audit.order_violations() == 1);
  CHECK(audit.actuator_violations() == 1);

  PartyMessage leak;
  leak.from = party::kSetup;
  leak.to = party::kActuator;
  leak.type = MsgType::SetupInputs;
  audit.inspect(leak);
  CHECK(audit.actuator_violations() == 2);
  CHECK(audit.details().size() == 4);
}

TEST_CASE("label ledger counts reuse") {
  LabelLedger ledger;
  const labhe::Label l{"setup", "Hm", 0, 1};
  ledger.record("setup", l);
  ledger.record("setup", labhe::Label{"setup", "Hm", 0, 2});
  CHECK(ledger.duplicates() == 0);
  ledger.record("setup", l);
  CHECK(ledger.duplicates() == 1);
  CHECK(ledger.count("setup") == 3);
  CHECK(ledger.total() == 3);
}

TEST_CASE("config loading") {
  const auto dir = temp_dir("config");
  const auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream(dir / name) << body;
    return (dir / name).string();
  };
  write("model.json", R"({"A": [[1, 1], [0, 1]], "B": [[0], [1]], "P": [[1, 0], [0, 1]],
                          "Q": [[1, 0], [0, 1]], "R": [[1]], "l_u": [-1], "h_u": [1]})");
  const auto good = write("good.json", R"({"model": "model.json", "x0": [5, 0], "steps": 3, "seed": 9,
                                           "partition": {"state": [1, 1], "input": [1, 0]}})");
  const auto cfg = load_config(good);
  CHECK(cfg.steps == 3);
  CHECK(cfg.seed == 9);
  CHECK(cfg.model.state_parts == std::vector<std::size_t>{1, 1});
  CHECK(cfg.model.n() == 2);

  write("broken.json", R"({"A": [[1, 1], [0, 1]], "B": )");
  const auto broken = write("uses_broken.json", R"({"model": "broken.json", "x0": [5, 0]})");
  CHECK(code_of([&] { load_config(broken); }) == ErrorCode::ParseError);

  write("ragged.json", R"({"A": [[1, 1], [0]], "B": [[0], [1]], "P": [[1, 0], [0, 1]],
                           "Q": [[1, 0], [0, 1]], "R": [[1]], "l_u": [-1], "h_u": [1]})");
  CHECK(code_of([&] { load_config(write("r.json", R"({"model": "ragged.json", "x0": [5, 0]})")); }) ==
        ErrorCode::ParseError);
  CHECK(code_of([&] { load_config(write("u.json", R"({"model": "model.json", "x0": [5, 0], "stepz": 3})")); }) ==
        ErrorCode::ConfigInvalid);
  CHECK(code_of([&] { load_config(write("x.json", R"({"model": "model.json", "x0": [5]})")); }) ==
        ErrorCode::DimensionMismatch);
  CHECK(code_of([&] {
          load_config(write("t.json", R"({"model": "model.json", "x0": [5, 0], "transport": "udp"})"));
        }) == ErrorCode::ConfigInvalid);
  std::filesystem::remove_all(dir);
}

TEST_CASE("driver misuse") {
  Session s(small_config());
  CHECK(code_of([&] { s.run_mpc_step(0, qp::Vector::Zero(2)); }) == ErrorCode::ProtocolOrderViolation);
  s.initialize();
  CHECK(code_of([&] { s.initialize(); }) == ErrorCode::ProtocolOrderViolation);
  CHECK(code_of([&] { s.run_mpc_step(0, qp::Vector::Zero(3)); }) == ErrorCode::DimensionMismatch);
}
