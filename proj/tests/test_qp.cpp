#include <cmath>

#include "cipherloop/error.hpp"
#include "cipherloop/qp.hpp"
#include "cipherloop/rng.hpp"
#include "doctest.h"

using namespace cipherloop;
using namespace cipherloop::qp;

namespace {

double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng.next_u64() >> 11) / 9007199254740992.0);
}

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale) {
  Matrix M(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) M(i, j) = uniform(rng, -scale, scale);
  return M;
}

Matrix random_spd(Rng& rng, Eigen::Index n) {
  const Matrix G = random_matrix(rng, n, n, 1.0);
  return G * G.transpose() + 0.5 * Matrix::Identity(n, n);
}

SystemModel double_integrator() {
  SystemModel m;
  m.A = Matrix{{1, 1}, {0, 1}};
  m.B = Matrix{{0}, {1}};
  m.P = Matrix::Identity(2, 2);
  m.Q = Matrix::Identity(2, 2);
  m.R = Matrix::Identity(1, 1);
  return m;
}

SystemModel random_model(Rng& rng, Eigen::Index n, Eigen::Index m) {
  SystemModel s;
  s.A = random_matrix(rng, n, n, 0.5);
  s.B = random_matrix(rng, n, m, 1.0);
  s.P = random_spd(rng, n);
  s.Q = random_spd(rng, n);
  s.R = random_spd(rng, m);
  return s;
}

QPData scalar_qp() {
  QPData qp;
  qp.H = Matrix{{2.0}};
  qp.F = Matrix{{0.0}, {1.0}};
  qp.L = 2.0;
  qp.kappa = 1.0;
  qp.eta = 0.0;
  qp.horizon = 1;
  return qp;
}

// Projected gradient with a small fixed step, run to convergence.
Vector projected_gradient(const QPData& qp, const BoxConstraints& box, const Vector& x) {
  Vector U = Vector::Zero(static_cast<Eigen::Index>(qp.dim()));
  const double step = 0.5 / qp.L;
  const Vector lin = qp.F.transpose() * x;
  for (int k = 0; k < 200000; ++k) {
    const Vector next = box.project(U - step * (qp.H * U + lin));
    if ((next - U).norm() < 1e-14) return next;
    U = next;
  }
  return U;
}

}  // namespace

TEST_CASE("condense on the double integrator") {
  const auto qp = condense(double_integrator(), 1);
  CHECK(qp.H.rows() == 1);
  CHECK(qp.H(0, 0) == doctest::Approx(2.0));
  CHECK(qp.F(0, 0) == doctest::Approx(0.0));
  CHECK(qp.F(1, 0) == doctest::Approx(1.0));
  CHECK(qp.L == doctest::Approx(2.0));
  CHECK(qp.eta == doctest::Approx(0.0));

  auto m = double_integrator();
  m.B.setZero();
  const auto z = condense(m, 3);
  CHECK((z.H - Matrix::Identity(3, 3)).norm() < 1e-12);
  CHECK(z.F.norm() < 1e-12);
}

TEST_CASE("condensed objective matches the trajectory objective") {
  auto rng = Rng::from_seed(700);
  for (int inst = 0; inst < 10; ++inst) {
    const auto model = random_model(rng, 3, 2);
    const auto qp = condense(model, 4);
    const auto dim = static_cast<Eigen::Index>(qp.dim());
    const Vector x_ref = random_matrix(rng, 3, 1, 2.0);
    const Vector U_ref = random_matrix(rng, dim, 1, 2.0);
    const double base_direct = objective(model, x_ref, U_ref);
    const double base_qp = 0.5 * U_ref.dot(qp.H * U_ref) + U_ref.dot(qp.F.transpose() * x_ref);
    for (int t = 0; t < 100; ++t) {
      const Vector U = random_matrix(rng, dim, 1, 2.0);
      const double direct = objective(model, x_ref, U) - base_direct;
      const double condensed = 0.5 * U.dot(qp.H * U) + U.dot(qp.F.transpose() * x_ref) - base_qp;
      REQUIRE(std::fabs(direct - condensed) <= 1e-10 * std::max(1.0, std::fabs(direct)));
    }
  }
}

TEST_CASE("step constants") {
  auto rng = Rng::from_seed(701);
  const auto qp = condense(random_model(rng, 4, 2), 3);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(qp.H);
  CHECK(qp.L >= eig.eigenvalues().maxCoeff() * (1 - 1e-9));
  CHECK(qp.eta >= 0.0);
  CHECK(qp.eta < 1.0);
  CHECK(qp.kappa == doctest::Approx(eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff()));
}

TEST_CASE("model validation") {
  auto m = double_integrator();
  m.R = Matrix{{-1.0}};
  try {
    condense(m, 2);
    FAIL("expected NonPsd");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPsd);
  }
  m = double_integrator();
  m.B = Matrix{{0}, {1}, {2}};
  CHECK_THROWS_AS(condense(m, 2), Error);
}

TEST_CASE("fgm on the scalar example") {
  const auto qp = scalar_qp();
  const Vector x{{0.0, 1.0}};
  const Vector U0 = Vector::Zero(1);
  const auto box = BoxConstraints::repeat(Vector::Constant(1, -1.0), Vector::Constant(1, 1.0), 1);
  CHECK(std::fabs(fgm_solve(qp, box, x, 20, U0)[0] + 0.5) < 1e-9);
  const auto pos = BoxConstraints::repeat(Vector::Constant(1, 0.0), Vector::Constant(1, 1.0), 1);
  CHECK(fgm_solve(qp, pos, x, 20, U0)[0] == 0.0);
  CHECK(fgm_solve(qp, box, Vector::Zero(2), 20, U0)[0] == 0.0);
}

TEST_CASE("fgm matches a projected gradient oracle") {
  auto rng = Rng::from_seed(702);
  for (int inst = 0; inst < 12; ++inst) {
    const auto n = static_cast<Eigen::Index>(1 + rng.next_u64() % 3);
    const auto m = static_cast<Eigen::Index>(1 + rng.next_u64() % 2);
    const std::size_t N = 1 + rng.next_u64() % 3;
    const auto model = random_model(rng, n, m);
    const auto qp = condense(model, N);
    const auto box = BoxConstraints::repeat(Vector::Constant(m, -0.5), Vector::Constant(m, 0.7), N);
    const Vector x = random_matrix(rng, n, 1, 2.0);
    const Vector U = fgm_solve(qp, box, x, 500, Vector::Zero(static_cast<Eigen::Index>(qp.dim())));
    CHECK((U - box.project(U)).norm() == 0.0);
    CHECK((U - projected_gradient(qp, box, x)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("fixed-point fgm") {
  const auto qp = scalar_qp();
  const Vector x{{0.0, 1.0}};
  const auto box = BoxConstraints::repeat(Vector::Constant(1, -1.0), Vector::Constant(1, 1.0), 1);
  for (int f : {16, 30}) {
    const FpParams fp{16, f, 40};
    const auto fq = encode_qp(qp, box, fp);
    const auto U = fgm_solve_fixed(fq, encode_vector(x, fp), 20, IntVector(1, 0));
    const double err = std::fabs(decode_vector(U, fp)[0] + 0.5);
    CHECK(err <= std::ldexp(1.0, f == 16 ? -10 : -24));
  }
  const FpParams fp;
  const auto fq = encode_qp(qp, box, fp);
  CHECK(fgm_solve_fixed(fq, IntVector(2, 0), 20, IntVector(1, 0))[0] == 0);
}

TEST_CASE("fixed-point iteration equals the rounded float iteration") {
  // With exact arithmetic and floor truncation the integer iteration stays
  // within a few ulps of the float iteration on the same coefficients.
  auto rng = Rng::from_seed(703);
  const auto qp = condense(double_integrator(), 4);
  const auto box = BoxConstraints::repeat(Vector::Constant(1, -1.0), Vector::Constant(1, 1.0), 4);
  const FpParams fp;
  const auto fq = encode_qp(qp, box, fp);
  for (int t = 0; t < 20; ++t) {
    const Vector x = random_matrix(rng, 2, 1, 3.0);
    const Vector Uf = fgm_solve(qp, box, x, 40, Vector::Zero(4));
    const Vector Ui = decode_vector(fgm_solve_fixed(fq, encode_vector(x, fp), 40, IntVector(4, 0)), fp);
    CHECK((Uf - Ui).cwiseAbs().maxCoeff() < std::ldexp(1.0, -10));
  }
}

TEST_CASE("fixed-point overflow is reported") {
  // t = U - fl x with fl = -1: two values near the top of the range overflow.
  FixedQP fq;
  fq.fp = FpParams{4, 8, 40};
  fq.dim = 1;
  fq.n = 1;
  fq.hm = {0};
  fq.he = {0};
  fq.fl = {fixedpoint::encode_int(-1.0, fq.fp)};
  fq.e = 0;
  fq.lower = {fixedpoint::encode_int(-1.0, fq.fp)};
  fq.upper = {fixedpoint::encode_int(1.0, fq.fp)};
  const IntVector half{fixedpoint::encode_int(7.5, fq.fp)};
  CHECK(fixed_iteration(fq, half, half, half)[0] == fq.upper[0]);
  const IntVector big{fixedpoint::encode_int(15.9, fq.fp)};
  try {
    fixed_iteration(fq, big, big, big);
    FAIL("expected Overflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Overflow);
  }
}

TEST_CASE("plant and warm start") {
  const auto m = double_integrator();
  CHECK(plant_step(m, Vector::Zero(2), Vector::Zero(1)).norm() == 0.0);
  CHECK(plant_step(m, Vector{{1.0, 0.0}}, Vector::Zero(1)) == Vector{{1.0, 0.0}});
  CHECK_THROWS_AS(plant_step(m, Vector::Zero(3), Vector::Zero(1)), Error);
  CHECK(warm_start(Vector{{3.0, 4.0}}, 1) == Vector{{4.0, 0.0}});
  CHECK(warm_start(Vector::Zero(4), 2) == Vector::Zero(4));
  CHECK(extract_first_input(Vector{{3.0, 4.0}}, 1) == Vector{{3.0}});
  CHECK_THROWS_AS(warm_start(Vector::Zero(3), 2), Error);
}

TEST_CASE("closed loop on the double integrator") {
  const auto model = double_integrator();
  const std::size_t N = 4;
  const auto qp = condense(model, N);
  const auto box = BoxConstraints::repeat(Vector::Constant(1, -1.0), Vector::Constant(1, 1.0), N);
  Vector x{{5.0, 0.0}};
  const double x0 = x.norm();
  Vector U = Vector::Zero(4);
  for (int t = 0; t < 20; ++t) {
    U = fgm_solve(qp, box, x, 40, U);
    x = plant_step(model, x, extract_first_input(U, 1));
    U = warm_start(U, 1);
  }
  CHECK(x.norm() < 0.1 * x0);
}
