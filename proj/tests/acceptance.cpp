#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "cipherloop/compare.hpp"
#include "cipherloop/dgk.hpp"
#include "cipherloop/engine/simulation.hpp"
#include "cipherloop/labhe.hpp"
#include "cipherloop/numtheory.hpp"
#include "cipherloop/ot.hpp"
#include "cipherloop/paillier.hpp"
#include "cipherloop/qp.hpp"

using namespace cipherloop;

namespace {

// Pinned tolerances.
constexpr double kFloatTolerance = 1.0 / 1024.0;
constexpr double kCondenseRelTol = 1e-10;
constexpr double kContraction = 0.1;
constexpr double kPaillierSeconds = 30;
constexpr double kDgkSeconds = 120;
constexpr double kEndToEndSeconds = 300;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), s);
  std::fflush(stdout);
}

std::string ratio(std::size_t ok, std::size_t total) { return std::to_string(ok) + "/" + std::to_string(total); }

BigUint to_mod(std::int64_t v, const BigUint& n) {
  const mpz_class z = v;
  mpz_class r = z % n.mpz();
  if (r < 0) r += n.mpz();
  return BigUint(r);
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome paillier_homomorphism() {
  const auto t0 = std::chrono::steady_clock::now();
  auto rng = Rng::from_seed(1001);
  std::size_t ok = 0, total = 0;
  const auto toy = paillier::PrivateKey::from_primes(5, 7);
  const auto& tpk = toy.pk;
  for (std::uint64_t a = 0; a < 35; ++a) {
    const auto ca = paillier::encrypt(tpk, a, rng);
    for (std::uint64_t b = 0; b < 35; ++b) {
      const auto cb = paillier::encrypt(tpk, b, rng);
      total += 2;
      ok += paillier::decrypt(toy, paillier::add(tpk, ca, cb)) == BigUint((a + b) % 35);
      ok += paillier::decrypt(toy, paillier::cmlt(tpk, b, ca)) == BigUint((a * b) % 35);
    }
  }
  const auto sk = paillier::keygen(512, rng).second;
  const auto& pk = sk.pk;
  for (int i = 0; i < 1000; ++i) {
    const BigUint a = sample_below(pk.n, rng), b = sample_below(pk.n, rng), k = sample_below(pk.n, rng);
    const auto ca = paillier::encrypt(pk, a, rng), cb = paillier::encrypt(pk, b, rng);
    total += 2;
    ok += paillier::decrypt(sk, paillier::add(pk, ca, cb)) == mod_add(a, b, pk.n);
    ok += paillier::decrypt(sk, paillier::cmlt(pk, k, ca)) == mod_mul(k, a, pk.n);
  }
  const double s = elapsed(t0);
  return {ok == total && s < kPaillierSeconds,
          ratio(ok, total) + " exact, " + std::to_string(static_cast<int>(s)) + " s < 30 s"};
}

Outcome dgk_plain_comparison() {
  const auto t0 = std::chrono::steady_clock::now();
  auto rng = Rng::from_seed(1002);
  const auto sk = dgk::keygen(dgk::Params{128, 16, 8}, rng).second;
  std::size_t ok = 0, total = 0;
  for (std::size_t l = 1; l <= 6; ++l) {
    for (std::uint64_t alpha = 0; alpha < (1u << l); ++alpha) {
      for (std::uint64_t beta = 0; beta < (1u << l); ++beta) {
        const auto [da, db] = compare::dgk_compare_plain(alpha, beta, l, sk, rng);
        ++total;
        ok += (da != db) == (alpha <= beta);
      }
    }
  }
  const double s = elapsed(t0);
  return {ok == total && s < kDgkSeconds, ratio(ok, total) + " pairs with l <= 6 correct"};
}

Outcome encrypted_comparison() {
  auto rng = Rng::from_seed(1003);
  const auto ahe = paillier::keygen(512, rng).second;
  const auto dk = dgk::keygen(dgk::Params{}, rng).second;
  std::size_t ok = 0;
  const std::size_t trials = 500;
  for (std::size_t i = 0; i < trials; ++i) {
    const auto a = static_cast<std::int64_t>(rng.next_u64() % 65536) - 32768;
    const auto b = static_cast<std::int64_t>(rng.next_u64() % 65536) - 32768;
    const auto ca = paillier::encrypt(ahe.pk, to_mod(a, ahe.pk.n), rng);
    const auto cb = paillier::encrypt(ahe.pk, to_mod(b, ahe.pk.n), rng);
    ok += compare::dgk_compare_encrypted(ca, cb, 16, 40, ahe, dk, rng) == (a <= b);
  }
  return {ok == trials, ratio(ok, trials) + " signed 16-bit pairs"};
}

Outcome oblivious_transfer() {
  auto rng = Rng::from_seed(1004);
  const auto sk = paillier::keygen(512, rng).second;
  const auto& pk = sk.pk;
  std::size_t ok = 0, total = 0, distinct = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const BigUint s0 = sample_below(pk.n, rng), s1 = sample_below(pk.n, rng);
    const auto c0 = paillier::encrypt(pk, s0, rng), c1 = paillier::encrypt(pk, s1, rng);
    for (bool i : {false, true}) {
      const BigUint& want = i ? s1 : s0;
      total += 2;
      ok += ot::ot_choose(c0, c1, i, sk, rng) == want;
      const auto fresh = ot::ot_prime(c0, c1, i, sk, rng);
      ok += paillier::decrypt(sk, fresh) == want;
      distinct += fresh != c0 && fresh != c1;
    }
  }
  return {ok == total && distinct == 2000,
          ratio(ok, total) + " transfers exact, " + ratio(distinct, 2000) + " OT' outputs fresh"};
}

Outcome labhe_degree_two() {
  auto krng = Rng::from_seed(1005);
  const auto mk = labhe::init(512, krng);
  std::vector<labhe::UserKey> users;
  labhe::UserKeyring ring;
  for (int u = 0; u < 3; ++u) {
    users.push_back(labhe::keygen(mk.mpk, krng));
    ring["user" + std::to_string(u)] = labhe::recover_user_key(*mk.msk, users.back().upk);
  }
  const BigUint& n = mk.mpk.n;
  auto rng = Rng::from_seed(1006);
  std::size_t ok = 0, mixed = 0;
  const std::size_t trials = 1000;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::size_t nv = 1 + rng.next_u64() % 8;
    std::vector<BigUint> ms;
    std::vector<labhe::LabCiphertext> cts;
    std::vector<labhe::Label> labels;
    labhe::ProgramBuilder pb;
    std::vector<labhe::ProgramBuilder::NodeRef> refs;
    for (std::size_t i = 0; i < nv; ++i) {
      const std::size_t u = i % users.size();
      labels.push_back({"user" + std::to_string(u), "v", static_cast<std::uint32_t>(trial),
                        static_cast<std::uint32_t>(i)});
      ms.push_back(sample_below(n, rng));
      cts.push_back(labhe::encrypt(mk.mpk, users[u].usk, labels.back(), ms.back(), rng));
      refs.push_back(pb.input(labels.back()));
    }
    const BigUint konst = sample_below(n, rng);
    auto acc = pb.constant(konst);
    BigUint expect = konst;
    for (std::size_t i = 0; i < nv; ++i) {
      if (rng.next_bit()) continue;
      const BigUint c = sample_below(n, rng);
      acc = pb.add(acc, pb.scale(c, refs[i]));
      expect = mod_add(expect, mod_mul(c, ms[i], n), n);
    }
    const std::size_t products = rng.next_u64() % 4;
    for (std::size_t q = 0; q < products; ++q) {
      const std::size_t i = rng.next_u64() % nv, j = rng.next_u64() % nv;
      const BigUint d = sample_below(n, rng);
      const auto term = pb.scale(d, pb.mul(refs[i], refs[j]));
      if (rng.next_bit()) {
        acc = pb.add(acc, term);
        expect = mod_add(expect, mod_mul(d, mod_mul(ms[i], ms[j], n), n), n);
      } else {
        acc = pb.sub(acc, term);
        expect = mod_sub(expect, mod_mul(d, mod_mul(ms[i], ms[j], n), n), n);
      }
    }
    mixed += products > 0;
    const auto p = pb.build(acc);
    std::vector<labhe::LabCiphertext> ordered;
    for (const auto& l : p.labels()) {
      for (std::size_t i = 0; i < nv; ++i) {
        if (labels[i] == l) ordered.push_back(cts[i]);
      }
    }
    const auto out = p.evaluate(mk.mpk, ordered);
    const auto ps = labhe::decrypt_offline(mk.msk, ring, p);
    ok += labhe::decrypt_online(ps, out) == expect &&
          labhe::decrypt_online(ps, out, labhe::DecryptPath::Ciphertext) == expect;
  }
  return {ok == trials, ratio(ok, trials) + " programs exact, " + std::to_string(mixed) + " with Pair/Collapsed adds"};
}

qp::Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale) {
  qp::Matrix M(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      M(i, j) = scale * (2.0 * static_cast<double>(rng.next_u64() >> 11) / 9007199254740992.0 - 1.0);
    }
  }
  return M;
}

Outcome condensation() {
  auto rng = Rng::from_seed(1007);
  std::size_t ok = 0, total = 0;
  double worst = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const auto n = static_cast<Eigen::Index>(1 + rng.next_u64() % 4);
    const auto m = static_cast<Eigen::Index>(1 + rng.next_u64() % 4);
    const std::size_t N = 1 + rng.next_u64() % 6;
    qp::SystemModel model;
    model.A = random_matrix(rng, n, n, 1.0);
    const double radius = model.A.eigenvalues().cwiseAbs().maxCoeff();
    if (radius > 0) model.A *= 0.9 / radius;
    model.B = random_matrix(rng, n, m, 1.0);
    const auto spd = [&](Eigen::Index d) {
      const qp::Matrix G = random_matrix(rng, d, d, 1.0);
      return qp::Matrix(G * G.transpose() + 0.5 * qp::Matrix::Identity(d, d));
    };
    model.P = spd(n);
    model.Q = spd(n);
    model.R = spd(m);
    const auto qpd = qp::condense(model, N);
    const auto dim = static_cast<Eigen::Index>(qpd.dim());
    for (int t = 0; t < 50; ++t) {
      const qp::Vector x = random_matrix(rng, n, 1, 2.0);
      const qp::Vector U = random_matrix(rng, dim, 1, 2.0);
      // The constant term x'(...)x is the objective at U = 0.
      const double direct = qp::objective(model, x, U) - qp::objective(model, x, qp::Vector::Zero(dim));
      const double condensed = 0.5 * U.dot(qpd.H * U) + U.dot(qpd.F.transpose() * x);
      const double rel = std::fabs(direct - condensed) / std::max(1.0, std::fabs(direct));
      worst = std::max(worst, rel);
      ++total;
      ok += rel < kCondenseRelTol;
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, ", max relative error %.2e < 1e-10", worst);
  return {ok == total, ratio(ok, total) + buf};
}

struct EndToEnd {
  engine::RunConfig cfg;
  engine::SimulationResult run;
  engine::VerifyReport report;
  double seconds = 0;
};

const EndToEnd& end_to_end() {
  static const EndToEnd e = [] {
    EndToEnd out;
    out.cfg = engine::load_config(CIPHERLOOP_DEFAULT_CONFIG);
    const auto t0 = std::chrono::steady_clock::now();
    out.run = engine::run_simulation(out.cfg);
    out.seconds = elapsed(t0);
    out.report = engine::verify(out.cfg, out.run);
    return out;
  }();
  return e;
}

Outcome bit_exact() {
  const auto& e = end_to_end();
  const auto& c = e.cfg;
  const bool shape = c.horizon == 4 && c.iterations == 40 && c.steps == 20 && c.fp.frac_bits == 16 &&
                     c.keys.ahe_bits == 512 && c.model.n() == 2 && c.model.m() == 1;
  char buf[192];
  std::snprintf(buf, sizeof buf, "%zu/%zu steps bit-exact, max |u_enc - u_float| = %.3e <= 2^-10, %.0f s <= 300 s",
                c.steps - e.report.mismatched_steps, c.steps, e.report.max_float_deviation, e.seconds);
  return {shape && e.report.bit_exact && e.report.max_float_deviation <= kFloatTolerance &&
              e.seconds <= kEndToEndSeconds,
          buf};
}

Outcome closed_loop() {
  const auto& e = end_to_end();
  char buf[128];
  std::snprintf(buf, sizeof buf, "|x(T)| = %.3e <= 0.1 * |x(0)| = %.3e", e.report.xT_norm,
                kContraction * e.report.x0_norm);
  return {e.report.xT_norm <= kContraction * e.report.x0_norm, buf};
}

Outcome confidentiality() {
  const auto& r = end_to_end().run;
  const std::size_t v = r.cloud_violations + r.actuator_violations + r.order_violations;
  return {v == 0 && r.audited == r.trace.size() && r.audited > 0,
          std::to_string(r.audited) + " frames audited, cloud " + std::to_string(r.cloud_violations) +
              ", actuator " + std::to_string(r.actuator_violations) + ", order " +
              std::to_string(r.order_violations) + " violations"};
}

Outcome label_hygiene() {
  const auto& r = end_to_end().run;
  bool counts = r.labels_expected.size() == r.labels_recorded.size();
  std::size_t recorded = 0, expected = 0;
  for (const auto& [owner, want] : r.labels_expected) {
    const auto it = r.labels_recorded.find(owner);
    counts = counts && it != r.labels_recorded.end() && it->second == want;
    expected += want;
    if (it != r.labels_recorded.end()) recorded += it->second;
  }
  return {counts && r.label_duplicates == 0 && r.secrets_used == r.secrets_expected,
          std::to_string(r.label_duplicates) + " reused labels, labels " + ratio(recorded, expected) +
              ", program secrets " + ratio(r.secrets_used, r.secrets_expected)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  report(1, "Paillier homomorphism", paillier_homomorphism);
  report(2, "DGK comparison", dgk_plain_comparison);
  report(3, "Encrypted comparison", encrypted_comparison);
  report(4, "OT and OT'", oblivious_transfer);
  report(5, "LabHE degree-2 evaluation", labhe_degree_two);
  report(6, "Condensation oracle", condensation);
  report(7, "Bit-exact end-to-end", bit_exact);
  report(8, "Closed-loop behavior", closed_loop);
  report(9, "Structural confidentiality", confidentiality);
  report(10, "Label hygiene", label_hygiene);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
