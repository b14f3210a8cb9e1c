#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "cipherloop/labhe.hpp"
#include "cipherloop/qp.hpp"

namespace cipherloop::engine {

/// Problem dimensions, subsystem partition and the label scheme shared by
/// every party.
///
/// Labels:
///   setup        Hm | He (i * dim + j), Fl (i * n + j), eta (0); time 0
///   subsystem<i> hu | lu (k * m_i + j), time 0; x (j), time t
///   actuator     U (k * dim + j), time t
struct Layout {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t horizon = 0;
  std::size_t iterations = 0;
  std::size_t steps = 0;
  std::vector<std::size_t> n_parts;
  std::vector<std::size_t> m_parts;

  static Layout make(const qp::SystemModel& model, std::size_t horizon, std::size_t iterations, std::size_t steps);

  std::size_t dim() const noexcept { return horizon * m; }
  std::size_t subsystems() const noexcept { return n_parts.size(); }
  std::size_t state_offset(std::size_t i) const;
  std::size_t input_offset(std::size_t i) const;
  /// Global state index -> (subsystem, local index).
  std::pair<std::size_t, std::size_t> state_owner(std::size_t j) const;
  /// Stacked input coordinate -> (subsystem, index within its bound slice).
  std::pair<std::size_t, std::size_t> input_owner(std::size_t coord) const;
  /// Stacked coordinates owned by subsystem i, in slice order.
  std::vector<std::size_t> input_coords(std::size_t i) const;

  labhe::Label hm_label(std::size_t i, std::size_t j) const;
  labhe::Label he_label(std::size_t i, std::size_t j) const;
  labhe::Label fl_label(std::size_t i, std::size_t j) const;
  labhe::Label eta_label() const;
  labhe::Label bound_label(bool upper, std::size_t coord) const;
  labhe::Label state_label(std::uint32_t t, std::size_t j) const;
  labhe::Label iterate_label(std::uint32_t t, std::size_t k, std::size_t j) const;

  /// Offline label allocation per party.
  std::size_t setup_label_count() const;
  std::size_t subsystem_label_count(std::size_t i) const;
  std::size_t actuator_label_count() const;
};

std::string subsystem_name(std::size_t i);

/// Pre-truncation value of coordinate i in iteration k of step t:
///   sum_j (Hm_ij + 2^f [i=j]) U_kj + sum_j (He_ij + eta [i=j]) (U_kj - U_{k-1,j}) - sum_j Fl_ij x_j
/// At k = 0 the previous iterate is U_0 itself.
labhe::LabeledProgram build_iteration_program(const Layout& layout, std::uint32_t t, std::size_t k, std::size_t i,
                                              int frac_bits);

}  // namespace cipherloop::engine
