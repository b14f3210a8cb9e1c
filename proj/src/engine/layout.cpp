#include "cipherloop/engine/layout.hpp"

#include <numeric>

#include "cipherloop/engine/messages.hpp"
#include "cipherloop/error.hpp"

namespace cipherloop::engine {

namespace {

constexpr const char* kSetupParty = "setup";
constexpr const char* kActuatorParty = "actuator";

std::uint32_t u32(std::size_t v) {
  if (v > 0xffffffffULL) throw Error(ErrorCode::ConfigInvalid, "label index exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string subsystem_name(std::size_t i) { return "subsystem" + std::to_string(i); }

Layout Layout::make(const qp::SystemModel& model, std::size_t horizon, std::size_t iterations, std::size_t steps) {
  Layout l;
  l.n = model.n();
  l.m = model.m();
  l.horizon = horizon;
  l.iterations = iterations;
  l.steps = steps;
  l.n_parts = model.state_parts.empty() ? std::vector<std::size_t>{l.n} : model.state_parts;
  l.m_parts = model.input_parts.empty() ? std::vector<std::size_t>{l.m} : model.input_parts;
  if (l.n_parts.size() != l.m_parts.size()) {
    throw Error(ErrorCode::ConfigInvalid, "state and input partitions differ in length");
  }
  if (std::accumulate(l.n_parts.begin(), l.n_parts.end(), std::size_t{0}) != l.n ||
      std::accumulate(l.m_parts.begin(), l.m_parts.end(), std::size_t{0}) != l.m) {
    throw Error(ErrorCode::ConfigInvalid, "partition sizes do not sum to n and m");
  }
  for (std::size_t ni : l.n_parts) {
    if (ni == 0) throw Error(ErrorCode::ConfigInvalid, "every subsystem needs at least one state");
  }
  if (horizon == 0 || iterations == 0 || steps == 0 || l.m == 0) {
    throw Error(ErrorCode::ConfigInvalid, "horizon, iterations, steps and m must be positive");
  }
  if (iterations > 0xffff) throw Error(ErrorCode::ConfigInvalid, "at most 65535 iterations per step");
  if (l.subsystems() + party::kFirstSubsystem >= party::kDriver) {
    throw Error(ErrorCode::ConfigInvalid, "too many subsystems");
  }
  return l;
}

std::size_t Layout::state_offset(std::size_t i) const {
  return std::accumulate(n_parts.begin(), n_parts.begin() + static_cast<std::ptrdiff_t>(i), std::size_t{0});
}

std::size_t Layout::input_offset(std::size_t i) const {
  return std::accumulate(m_parts.begin(), m_parts.begin() + static_cast<std::ptrdiff_t>(i), std::size_t{0});
}

std::pair<std::size_t, std::size_t> Layout::state_owner(std::size_t j) const {
  for (std::size_t i = 0; i < n_parts.size(); ++i) {
    if (j < n_parts[i]) return {i, j};
    j -= n_parts[i];
  }
  throw Error(ErrorCode::DimensionMismatch, "state index out of range");
}

std::pair<std::size_t, std::size_t> Layout::input_owner(std::size_t coord) const {
  if (coord >= dim()) throw Error(ErrorCode::DimensionMismatch, "input coordinate out of range");
  const std::size_t k = coord / m;
  std::size_t r = coord % m;
  for (std::size_t i = 0; i < m_parts.size(); ++i) {
    if (r < m_parts[i]) return {i, k * m_parts[i] + r};
    r -= m_parts[i];
  }
  throw Error(ErrorCode::DimensionMismatch, "input coordinate out of range");
}

std::vector<std::size_t> Layout::input_coords(std::size_t i) const {
  std::vector<std::size_t> out;
  const std::size_t off = input_offset(i);
  for (std::size_t k = 0; k < horizon; ++k) {
    for (std::size_t j = 0; j < m_parts.at(i); ++j) out.push_back(k * m + off + j);
  }
  return out;
}

labhe::Label Layout::hm_label(std::size_t i, std::size_t j) const {
  return {kSetupParty, "Hm", 0, u32(i * dim() + j)};
}

labhe::Label Layout::he_label(std::size_t i, std::size_t j) const {
  return {kSetupParty, "He", 0, u32(i * dim() + j)};
}

labhe::Label Layout::fl_label(std::size_t i, std::size_t j) const { return {kSetupParty, "Fl", 0, u32(i * n + j)}; }

labhe::Label Layout::eta_label() const { return {kSetupParty, "eta", 0, 0}; }

labhe::Label Layout::bound_label(bool upper, std::size_t coord) const {
  const auto [i, idx] = input_owner(coord);
  return {subsystem_name(i), upper ? "hu" : "lu", 0, u32(idx)};
}

labhe::Label Layout::state_label(std::uint32_t t, std::size_t j) const {
  const auto [i, local] = state_owner(j);
  return {subsystem_name(i), "x", t, u32(local)};
}

labhe::Label Layout::iterate_label(std::uint32_t t, std::size_t k, std::size_t j) const {
  return {kActuatorParty, "U", t, u32(k * dim() + j)};
}

std::size_t Layout::setup_label_count() const { return 2 * dim() * dim() + dim() * n + 1; }

std::size_t Layout::subsystem_label_count(std::size_t i) const {
  return 2 * horizon * m_parts.at(i) + steps * n_parts.at(i);
}

std::size_t Layout::actuator_label_count() const { return steps * iterations * dim(); }

labhe::LabeledProgram build_iteration_program(const Layout& layout, std::uint32_t t, std::size_t k, std::size_t i,
                                              int frac_bits) {
  const std::size_t dim = layout.dim();
  if (i >= dim || k >= layout.iterations) throw Error(ErrorCode::InvalidArgument, "iteration coordinate out of range");
  labhe::ProgramBuilder b;
  const std::size_t prev_k = k == 0 ? 0 : k - 1;
  std::vector<labhe::ProgramBuilder::NodeRef> terms;
  for (std::size_t j = 0; j < dim; ++j) {
    auto coef = b.input(layout.hm_label(i, j));
    if (j == i) coef = b.add(coef, b.constant(pow2(static_cast<std::size_t>(frac_bits))));
    terms.push_back(b.mul(coef, b.input(layout.iterate_label(t, k, j))));
  }
  for (std::size_t j = 0; j < dim; ++j) {
    auto coef = b.input(layout.he_label(i, j));
    if (j == i) coef = b.add(coef, b.input(layout.eta_label()));
    const auto cur = b.input(layout.iterate_label(t, k, j));
    const auto prev = b.input(layout.iterate_label(t, prev_k, j));
    terms.push_back(b.mul(coef, b.sub(cur, prev)));
  }
  auto acc = terms.front();
  for (std::size_t q = 1; q < terms.size(); ++q) acc = b.add(acc, terms[q]);
  for (std::size_t j = 0; j < layout.n; ++j) {
    acc = b.sub(acc, b.mul(b.input(layout.fl_label(i, j)), b.input(layout.state_label(t, j))));
  }
  return b.build(acc);
}

}  // namespace cipherloop::engine
