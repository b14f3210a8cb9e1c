#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <gmpxx.h>

#include "cipherloop/fixedpoint.hpp"

// Plaintext MPC layer: condensed quadratic program, projected fast gradient
// method in floating and fixed point, and the plant model.
namespace cipherloop::qp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = std::vector<mpz_class>;

struct SystemModel {
  Matrix A, B, P, Q, R;
  /// Subsystem partition sizes n_i and m_i; a single subsystem when empty.
  std::vector<std::size_t> state_parts, input_parts;

  std::size_t n() const { return static_cast<std::size_t>(A.rows()); }
  std::size_t m() const { return static_cast<std::size_t>(B.cols()); }
  std::size_t subsystems() const { return state_parts.empty() ? 1 : state_parts.size(); }
  /// DimensionMismatch on shape errors, NonPsd unless P, Q, R are symmetric positive definite.
  void validate() const;
};

struct BoxConstraints {
  Vector lower, upper;  // stacked over the horizon, length N m

  /// N copies of the per-step box.
  static BoxConstraints repeat(const Vector& lower, const Vector& upper, std::size_t horizon);
  /// Requires lower <= 0 <= upper and length `dim`.
  void validate(std::size_t dim) const;
  Vector project(const Vector& v) const;
};

struct QPData {
  Matrix H;  // N m x N m
  Matrix F;  // n x N m
  double L = 0;
  double eta = 0;
  double kappa = 0;
  std::size_t horizon = 0;

  std::size_t dim() const { return static_cast<std::size_t>(H.rows()); }
};

QPData condense(const SystemModel& model, std::size_t horizon);

/// Horizon cost sum x'Qx + u'Ru plus terminal x'Px, evaluated along the simulated trajectory.
double objective(const SystemModel& model, const Vector& x0, const Vector& U);

Vector fgm_solve(const QPData& qp, const BoxConstraints& box, const Vector& x, std::size_t iterations,
                 const Vector& U0);

/// Integer coefficients of one FGM iteration at scale 2^l_f:
///   T_i = 2^f U_i + sum_j hm_ij U_j + e D_i + sum_j he_ij D_j - sum_j fl_ij x_j
/// with D = U_k - U_{k-1}, hm = enc(-H/L), he = enc(-eta H/L), fl = enc(F^T/L),
/// e = enc(eta). The next iterate is clamp(floor(T / 2^f)).
struct FixedQP {
  FpParams fp;
  std::size_t dim = 0;
  std::size_t n = 0;
  IntVector hm;  // dim x dim, row-major
  IntVector he;  // dim x dim
  IntVector fl;  // dim x n
  mpz_class e;
  IntVector lower, upper;
};

FixedQP encode_qp(const QPData& qp, const BoxConstraints& box, const FpParams& fp);
IntVector encode_vector(const Vector& v, const FpParams& fp);
Vector decode_vector(const IntVector& v, const FpParams& fp);

/// T before truncation (scale 2 l_f).
IntVector fixed_pre_truncation(const FixedQP& fq, const IntVector& x, const IntVector& Uk, const IntVector& Uprev);
/// floor(T / 2^f) then clamp; Overflow when floor(T / 2^f) leaves l bits.
IntVector fixed_iteration(const FixedQP& fq, const IntVector& x, const IntVector& Uk, const IntVector& Uprev);
IntVector fgm_solve_fixed(const FixedQP& fq, const IntVector& x, std::size_t iterations, const IntVector& U0);

Vector plant_step(const SystemModel& model, const Vector& x, const Vector& u);
Vector extract_first_input(const Vector& U, std::size_t m);
Vector warm_start(const Vector& U, std::size_t m);
IntVector warm_start(const IntVector& U, std::size_t m);

}  // namespace cipherloop::qp
