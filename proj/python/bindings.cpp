#include <optional>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cipherloop/compare.hpp"
#include "cipherloop/dgk.hpp"
#include "cipherloop/engine/simulation.hpp"
#include "cipherloop/error.hpp"
#include "cipherloop/fixedpoint.hpp"
#include "cipherloop/paillier.hpp"
#include "cipherloop/qp.hpp"

namespace py = pybind11;
using namespace cipherloop;

namespace {

BigUint to_big(const py::int_& v) {
  const std::string s = py::str(v);
  if (!s.empty() && s[0] == '-') throw Error(ErrorCode::InvalidArgument, "expected a non-negative integer");
  return BigUint::from_dec(s);
}

py::int_ to_py(const mpz_class& v) {
  return py::reinterpret_steal<py::int_>(PyLong_FromString(v.get_str().c_str(), nullptr, 10));
}

py::int_ to_py(const BigUint& v) { return to_py(v.mpz()); }

mpz_class to_mpz(const py::int_& v) { return mpz_class(std::string(py::str(v))); }

py::list to_py(const qp::IntVector& v) {
  py::list out;
  for (const auto& x : v) out.append(to_py(x));
  return out;
}

/// Paillier key pair with its own seeded randomness.
class PaillierKeys {
 public:
  PaillierKeys(std::size_t bits, std::uint64_t seed) : rng_(Rng::from_seed(seed)) {
    auto [pk, sk] = paillier::keygen(bits, rng_);
    sk_ = std::move(sk);
  }
  py::int_ n() const { return to_py(sk_.pk.n); }
  py::int_ encrypt(const py::int_& m) { return to_py(paillier::encrypt(sk_.pk, to_big(m) % sk_.pk.n, rng_).value); }
  py::int_ decrypt(const py::int_& c) const { return to_py(paillier::decrypt(sk_, wrap(c))); }
  py::int_ add(const py::int_& a, const py::int_& b) const {
    return to_py(paillier::add(sk_.pk, wrap(a), wrap(b)).value);
  }
  py::int_ cmlt(const py::int_& k, const py::int_& c) const {
    return to_py(paillier::cmlt(sk_.pk, to_big(k), wrap(c)).value);
  }
  bool compare(const py::int_& a, const py::int_& b, std::size_t bits) {
    if (!dgk_) dgk_ = dgk::keygen(dgk::Params{}, rng_).second;
    const auto ca = paillier::encrypt(sk_.pk, fixedpoint::to_residue(to_mpz(a), sk_.pk.n), rng_);
    const auto cb = paillier::encrypt(sk_.pk, fixedpoint::to_residue(to_mpz(b), sk_.pk.n), rng_);
    return compare::dgk_compare_encrypted(ca, cb, bits, 40, sk_, *dgk_, rng_);
  }

 private:
  paillier::Ciphertext wrap(const py::int_& c) const { return {to_big(c), sk_.pk.fingerprint}; }

  Rng rng_;
  paillier::PrivateKey sk_;
  std::optional<dgk::PrivateKey> dgk_;
};

engine::RunConfig resolve(const std::string& path, std::optional<std::uint64_t> seed,
                          std::optional<std::string> transport) {
  auto cfg = engine::load_config(path);
  if (seed) cfg.seed = *seed;
  if (transport) cfg.transport = engine::parse_transport(*transport);
  return cfg;
}

py::dict result_dict(const engine::SimulationResult& r) {
  py::list u, u_raw, x, seconds;
  for (const auto& s : r.steps) {
    u.append(s.u);
    u_raw.append(to_py(s.u_raw));
    x.append(s.x);
    seconds.append(s.seconds);
  }
  py::dict d;
  d["u"] = u;
  d["u_raw"] = u_raw;
  d["x"] = x;
  d["x_final"] = r.x_final;
  d["seconds"] = seconds;
  d["frames"] = r.frames_sent;
  d["cloud_violations"] = r.cloud_violations;
  d["actuator_violations"] = r.actuator_violations;
  d["order_violations"] = r.order_violations;
  d["label_duplicates"] = r.label_duplicates;
  d["secrets_used"] = r.secrets_used;
  d["secrets_expected"] = r.secrets_expected;
  return d;
}

}  // namespace

PYBIND11_MODULE(_cipherloop, m) {
  m.doc() = "Encrypted MPC over labeled homomorphic encryption";

  py::register_exception<Error>(m, "Error");

  py::class_<fixedpoint::FpParams>(m, "FpParams")
      .def(py::init([](int i, int f, int s) { return fixedpoint::FpParams{i, f, s}; }), py::arg("int_bits") = 16,
           py::arg("frac_bits") = 16, py::arg("stat_bits") = 40)
      .def_readwrite("int_bits", &fixedpoint::FpParams::int_bits)
      .def_readwrite("frac_bits", &fixedpoint::FpParams::frac_bits)
      .def_readwrite("stat_bits", &fixedpoint::FpParams::stat_bits)
      .def("total_bits", &fixedpoint::FpParams::total_bits);

  m.def("encode", [](double x, const fixedpoint::FpParams& fp) { return to_py(fixedpoint::encode_int(x, fp)); },
        py::arg("x"), py::arg("fp"), "Signed fixed-point integer round(x 2^frac_bits).");
  m.def("decode", [](const py::int_& v, int scale) { return fixedpoint::decode_int(to_mpz(v), scale); },
        py::arg("v"), py::arg("scale"));

  py::class_<PaillierKeys>(m, "PaillierKeys")
      .def(py::init<std::size_t, std::uint64_t>(), py::arg("bits") = 512, py::arg("seed") = 1)
      .def_property_readonly("n", &PaillierKeys::n)
      .def("encrypt", &PaillierKeys::encrypt)
      .def("decrypt", &PaillierKeys::decrypt)
      .def("add", &PaillierKeys::add)
      .def("cmlt", &PaillierKeys::cmlt)
      .def("compare", &PaillierKeys::compare, py::arg("a"), py::arg("b"), py::arg("bits") = 16,
           "Encrypted DGK comparison of signed a, b; returns a <= b.");

  m.def(
      "condense",
      [](const qp::Matrix& A, const qp::Matrix& B, const qp::Matrix& P, const qp::Matrix& Q, const qp::Matrix& R,
         std::size_t horizon) {
        const auto qpd = qp::condense(qp::SystemModel{A, B, P, Q, R, {}, {}}, horizon);
        py::dict d;
        d["H"] = qpd.H;
        d["F"] = qpd.F;
        d["L"] = qpd.L;
        d["eta"] = qpd.eta;
        return d;
      },
      py::arg("A"), py::arg("B"), py::arg("P"), py::arg("Q"), py::arg("R"), py::arg("horizon"));

  m.def(
      "run",
      [](const std::string& config, std::optional<std::uint64_t> seed, std::optional<std::string> transport) {
        const auto cfg = resolve(config, seed, transport);
        engine::SimulationResult r;
        {
          py::gil_scoped_release release;
          r = engine::run_simulation(cfg);
        }
        return result_dict(r);
      },
      py::arg("config"), py::arg("seed") = py::none(), py::arg("transport") = py::none(),
      "Encrypted closed loop from a JSON config.");

  m.def(
      "verify",
      [](const std::string& config, std::optional<std::uint64_t> seed) {
        const auto cfg = resolve(config, seed, std::nullopt);
        engine::SimulationResult run;
        engine::VerifyReport rep;
        {
          py::gil_scoped_release release;
          run = engine::run_simulation(cfg);
          rep = engine::verify(cfg, run);
        }
        py::dict d = result_dict(run);
        d["bit_exact"] = rep.bit_exact;
        d["max_fixed_deviation"] = rep.max_fixed_deviation;
        d["max_float_deviation"] = rep.max_float_deviation;
        d["tolerance"] = rep.tolerance;
        d["within_tolerance"] = rep.within_tolerance;
        return d;
      },
      py::arg("config"), py::arg("seed") = py::none(),
      "Encrypted run compared against the fixed-point and float oracles.");

  m.def(
      "fixed_oracle",
      [](const std::string& config) {
        const auto o = engine::fixed_closed_loop(engine::load_config(config));
        py::list u;
        for (const auto& v : o.u) u.append(to_py(v));
        return u;
      },
      py::arg("config"), "Fixed-point plaintext closed loop: u(t) per step as integers.");
}
