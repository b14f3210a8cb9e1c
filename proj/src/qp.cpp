#include "cipherloop/qp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cipherloop/error.hpp"

namespace cipherloop::qp {
namespace {

void require_spd(const Matrix& M, const char* name) {
  if (M.rows() != M.cols()) throw Error(ErrorCode::DimensionMismatch, std::string(name) + " must be square");
  if ((M - M.transpose()).norm() > 1e-9 * std::max(1.0, M.norm())) {
    throw Error(ErrorCode::NonPsd, std::string(name) + " must be symmetric");
  }
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NonPsd, std::string(name) + " must be positive definite");
}

void check_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": expected " + std::to_string(want) + ", got " + std::to_string(got));
  }
}

}  // namespace

void SystemModel::validate() const {
  const auto nn = static_cast<Eigen::Index>(n());
  if (nn == 0 || m() == 0) throw Error(ErrorCode::DimensionMismatch, "empty model");
  check_size(static_cast<std::size_t>(A.cols()), n(), "A columns");
  check_size(static_cast<std::size_t>(B.rows()), n(), "B rows");
  check_size(static_cast<std::size_t>(P.rows()), n(), "P rows");
  check_size(static_cast<std::size_t>(Q.rows()), n(), "Q rows");
  check_size(static_cast<std::size_t>(R.rows()), m(), "R rows");
  require_spd(P, "P");
  require_spd(Q, "Q");
  require_spd(R, "R");
  if (state_parts.size() != input_parts.size()) {
    throw Error(ErrorCode::DimensionMismatch, "state and input partitions differ in length");
  }
  if (!state_parts.empty()) {
    check_size(std::accumulate(state_parts.begin(), state_parts.end(), std::size_t{0}), n(), "sum of n_i");
    check_size(std::accumulate(input_parts.begin(), input_parts.end(), std::size_t{0}), m(), "sum of m_i");
  }
}

BoxConstraints BoxConstraints::repeat(const Vector& lower, const Vector& upper, std::size_t horizon) {
  check_size(static_cast<std::size_t>(upper.size()), static_cast<std::size_t>(lower.size()), "box bounds");
  BoxConstraints box;
  const auto m = lower.size();
  box.lower.resize(m * static_cast<Eigen::Index>(horizon));
  box.upper.resize(m * static_cast<Eigen::Index>(horizon));
  for (std::size_t k = 0; k < horizon; ++k) {
    box.lower.segment(static_cast<Eigen::Index>(k) * m, m) = lower;
    box.upper.segment(static_cast<Eigen::Index>(k) * m, m) = upper;
  }
  return box;
}

void BoxConstraints::validate(std::size_t dim) const {
  check_size(static_cast<std::size_t>(lower.size()), dim, "lower bound length");
  check_size(static_cast<std::size_t>(upper.size()), dim, "upper bound length");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] <= 0.0 && 0.0 <= upper[i])) {
      throw Error(ErrorCode::ConfigInvalid, "box constraints must contain the origin");
    }
  }
}

Vector BoxConstraints::project(const Vector& v) const { return v.cwiseMax(lower).cwiseMin(upper); }

QPData condense(const SystemModel& model, std::size_t horizon) {
  model.validate();
  if (horizon == 0) throw Error(ErrorCode::InvalidArgument, "horizon must be positive");
  const auto n = static_cast<Eigen::Index>(model.n());
  const auto m = static_cast<Eigen::Index>(model.m());
  const auto N = static_cast<Eigen::Index>(horizon);

  // Stacked predictions x_1..x_N = Gamma x_0 + Omega U.
  Matrix Gamma(N * n, n);
  Matrix Omega = Matrix::Zero(N * n, N * m);
  std::vector<Matrix> powers{Matrix::Identity(n, n)};
  for (Eigen::Index k = 1; k <= N; ++k) powers.push_back(model.A * powers.back());
  for (Eigen::Index i = 0; i < N; ++i) {
    Gamma.block(i * n, 0, n, n) = powers[static_cast<std::size_t>(i + 1)];
    for (Eigen::Index j = 0; j <= i; ++j) {
      Omega.block(i * n, j * m, n, m) = powers[static_cast<std::size_t>(i - j)] * model.B;
    }
  }
  Matrix Qbar = Matrix::Zero(N * n, N * n);
  Matrix Rbar = Matrix::Zero(N * m, N * m);
  for (Eigen::Index i = 0; i < N; ++i) {
    Qbar.block(i * n, i * n, n, n) = (i + 1 == N) ? model.P : model.Q;
    Rbar.block(i * m, i * m, m, m) = model.R;
  }
  QPData qp;
  qp.horizon = horizon;
  qp.H = Omega.transpose() * Qbar * Omega + Rbar;
  qp.H = 0.5 * (qp.H + qp.H.transpose());
  qp.F = Gamma.transpose() * Qbar * Omega;
  require_spd(qp.H, "H");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(qp.H, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmin > 0.0)) throw Error(ErrorCode::NonPsd, "H must be positive definite");
  qp.L = lmax;
  qp.kappa = lmax / lmin;
  const double s = std::sqrt(qp.kappa);
  qp.eta = (s - 1.0) / (s + 1.0);
  return qp;
}

double objective(const SystemModel& model, const Vector& x0, const Vector& U) {
  const auto m = static_cast<Eigen::Index>(model.m());
  const auto N = U.size() / m;
  Vector x = x0;
  double j = 0;
  for (Eigen::Index k = 0; k < N; ++k) {
    const Vector u = U.segment(k * m, m);
    j += x.dot(model.Q * x) + u.dot(model.R * u);
    x = model.A * x + model.B * u;
  }
  j += x.dot(model.P * x);
  return 0.5 * j;
}

Vector fgm_solve(const QPData& qp, const BoxConstraints& box, const Vector& x, std::size_t iterations,
                 const Vector& U0) {
  check_size(static_cast<std::size_t>(U0.size()), qp.dim(), "initial iterate");
  check_size(static_cast<std::size_t>(x.size()), static_cast<std::size_t>(qp.F.rows()), "state");
  box.validate(qp.dim());
  const Vector lin = qp.F.transpose() * x / qp.L;
  Vector U = U0;
  Vector prev = U;
  for (std::size_t k = 0; k < iterations; ++k) {
    const Vector z = U + qp.eta * (U - prev);
    const Vector t = z - qp.H * z / qp.L - lin;
    prev = U;
    U = box.project(t);
  }
  return U;
}

IntVector encode_vector(const Vector& v, const FpParams& fp) {
  IntVector out;
  out.reserve(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(fixedpoint::encode_int(v[i], fp));
  return out;
}

Vector decode_vector(const IntVector& v, const FpParams& fp) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = fixedpoint::decode_int(v[i], fp.frac_bits);
  }
  return out;
}

FixedQP encode_qp(const QPData& qp, const BoxConstraints& box, const FpParams& fp) {
  fp.validate();
  box.validate(qp.dim());
  FixedQP fq;
  fq.fp = fp;
  fq.dim = qp.dim();
  fq.n = static_cast<std::size_t>(qp.F.rows());
  const Matrix hm = -qp.H / qp.L;
  const Matrix he = -qp.eta * qp.H / qp.L;
  const Matrix fl = qp.F.transpose() / qp.L;
  for (std::size_t i = 0; i < fq.dim; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < fq.dim; ++j) {
      fq.hm.push_back(fixedpoint::encode_int(hm(ii, static_cast<Eigen::Index>(j)), fp));
      fq.he.push_back(fixedpoint::encode_int(he(ii, static_cast<Eigen::Index>(j)), fp));
    }
    for (std::size_t j = 0; j < fq.n; ++j) fq.fl.push_back(fixedpoint::encode_int(fl(ii, static_cast<Eigen::Index>(j)), fp));
  }
  fq.e = fixedpoint::encode_int(qp.eta, fp);
  fq.lower = encode_vector(box.lower, fp);
  fq.upper = encode_vector(box.upper, fp);
  return fq;
}

IntVector fixed_pre_truncation(const FixedQP& fq, const IntVector& x, const IntVector& Uk, const IntVector& Uprev) {
  check_size(x.size(), fq.n, "state");
  check_size(Uk.size(), fq.dim, "iterate");
  check_size(Uprev.size(), fq.dim, "previous iterate");
  IntVector D(fq.dim);
  for (std::size_t j = 0; j < fq.dim; ++j) D[j] = Uk[j] - Uprev[j];
  IntVector T(fq.dim);
  for (std::size_t i = 0; i < fq.dim; ++i) {
    mpz_class acc = Uk[i];
    acc <<= static_cast<mp_bitcnt_t>(fq.fp.frac_bits);
    acc += fq.e * D[i];
    for (std::size_t j = 0; j < fq.dim; ++j) {
      acc += fq.hm[i * fq.dim + j] * Uk[j];
      acc += fq.he[i * fq.dim + j] * D[j];
    }
    for (std::size_t j = 0; j < fq.n; ++j) acc -= fq.fl[i * fq.n + j] * x[j];
    T[i] = acc;
  }
  return T;
}

IntVector fixed_iteration(const FixedQP& fq, const IntVector& x, const IntVector& Uk, const IntVector& Uprev) {
  IntVector T = fixed_pre_truncation(fq, x, Uk, Uprev);
  for (std::size_t i = 0; i < fq.dim; ++i) {
    mpz_class t = fixedpoint::floor_shift(T[i], fq.fp.frac_bits);
    if (!fixedpoint::fits_signed(t, fq.fp.total_bits())) {
      throw Error(ErrorCode::Overflow, "FGM iterate escapes the fixed-point range");
    }
    if (t < fq.lower[i]) t = fq.lower[i];
    if (t > fq.upper[i]) t = fq.upper[i];
    T[i] = t;
  }
  return T;
}

IntVector fgm_solve_fixed(const FixedQP& fq, const IntVector& x, std::size_t iterations, const IntVector& U0) {
  IntVector U = U0;
  IntVector prev = U0;
  for (std::size_t k = 0; k < iterations; ++k) {
    IntVector next = fixed_iteration(fq, x, U, prev);
    prev = std::move(U);
    U = std::move(next);
  }
  return U;
}

Vector plant_step(const SystemModel& model, const Vector& x, const Vector& u) {
  check_size(static_cast<std::size_t>(x.size()), model.n(), "state");
  check_size(static_cast<std::size_t>(u.size()), model.m(), "input");
  return model.A * x + model.B * u;
}

Vector extract_first_input(const Vector& U, std::size_t m) {
  if (m == 0 || static_cast<std::size_t>(U.size()) < m || U.size() % static_cast<Eigen::Index>(m) != 0) {
    throw Error(ErrorCode::DimensionMismatch, "input vector is not a multiple of m");
  }
  return U.head(static_cast<Eigen::Index>(m));
}

Vector warm_start(const Vector& U, std::size_t m) {
  const auto mm = static_cast<Eigen::Index>(m);
  if (m == 0 || U.size() < mm || U.size() % mm != 0) {
    throw Error(ErrorCode::DimensionMismatch, "input vector is not a multiple of m");
  }
  Vector out = Vector::Zero(U.size());
  out.head(U.size() - mm) = U.tail(U.size() - mm);
  return out;
}

IntVector warm_start(const IntVector& U, std::size_t m) {
  if (m == 0 || U.size() < m || U.size() % m != 0) {
    throw Error(ErrorCode::DimensionMismatch, "input vector is not a multiple of m");
  }
  IntVector out(U.begin() + static_cast<std::ptrdiff_t>(m), U.end());
  out.resize(U.size(), mpz_class(0));
  return out;
}

}  // namespace cipherloop::qp
