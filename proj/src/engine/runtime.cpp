#include "cipherloop/engine/runtime.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <spdlog/spdlog.h>

#include "cipherloop/error.hpp"

namespace cipherloop::engine {

namespace {

PartyMessage open_and_observe(const Envelope& env, const Observers& obs) {
  PartyMessage msg = decode_frame(env.frame, env.from, env.to);
  if (obs.trace) obs.trace->record(msg, env.frame.size() - kFrameHeaderBytes);
  if (obs.audit) obs.audit->inspect(msg);
  return msg;
}

std::map<PartyId, Party*> index_parties(const std::vector<Party*>& parties) {
  std::map<PartyId, Party*> out;
  for (Party* p : parties) {
    if (!out.emplace(p->id(), p).second) throw Error(ErrorCode::ConfigInvalid, "duplicate party id");
  }
  return out;
}

}  // namespace

// ------------------------------------------------------------- Lockstep

LockstepRuntime::LockstepRuntime(std::vector<Party*> parties, Observers obs)
    : parties_(index_parties(parties)), obs_(obs) {}

void LockstepRuntime::post(const PartyMessage& msg) {
  queue_.push_back({msg.from, msg.to, encode_frame(msg)});
  ++sent_;
}

void LockstepRuntime::send(const PartyMessage& msg) { post(msg); }

PartyMessage LockstepRuntime::receive() {
  while (driver_inbox_.empty()) {
    if (queue_.empty()) {
      throw Error(ErrorCode::ProtocolOrderViolation, "network is quiescent with nothing for the driver");
    }
    Envelope env = std::move(queue_.front());
    queue_.pop_front();
    PartyMessage msg = open_and_observe(env, obs_);
    if (msg.to == party::kDriver) {
      driver_inbox_.push_back(std::move(msg));
      continue;
    }
    const auto it = parties_.find(msg.to);
    if (it == parties_.end()) throw Error(ErrorCode::TransportError, "no party " + party_name(msg.to));
    for (const auto& reply : it->second->handle(msg)) post(reply);
  }
  PartyMessage msg = std::move(driver_inbox_.front());
  driver_inbox_.pop_front();
  return msg;
}

// ------------------------------------------------------------- Threaded

ThreadedRuntime::ThreadedRuntime(std::vector<Party*> parties, Observers obs, bool autostart)
    : parties_(index_parties(parties)), obs_(obs) {
  for (const auto& [id, _] : parties_) inboxes_[id] = std::make_unique<BlockingQueue<Envelope>>();
  inboxes_[party::kDriver] = std::make_unique<BlockingQueue<Envelope>>();
  if (autostart) start();
}

ThreadedRuntime::~ThreadedRuntime() { stop(); }

std::vector<PartyId> ThreadedRuntime::endpoints() const {
  std::vector<PartyId> out;
  for (const auto& [id, _] : inboxes_) out.push_back(id);
  return out;
}

void ThreadedRuntime::start() {
  if (started_) return;
  started_ = true;
  for (const auto& [id, party] : parties_) threads_.emplace_back([this, p = party] { run(p); });
}

void ThreadedRuntime::stop() {
  if (stopped_) return;
  stopped_ = true;
  for (auto& [_, q] : inboxes_) q->close();
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
}

void ThreadedRuntime::fail(std::exception_ptr e) {
  {
    std::lock_guard lock(mu_);
    if (!error_) error_ = e;
  }
  inboxes_.at(party::kDriver)->close();
}

void ThreadedRuntime::run(Party* party) {
  auto& inbox = *inboxes_.at(party->id());
  try {
    while (auto env = inbox.pop()) {
      const PartyMessage msg = open_and_observe(*env, obs_);
      for (const auto& reply : party->handle(msg)) post(reply);
    }
  } catch (...) {
    spdlog::error("{} stopped on an error", party_name(party->id()));
    fail(std::current_exception());
  }
}

void ThreadedRuntime::post(const PartyMessage& msg) {
  Envelope env{msg.from, msg.to, encode_frame(msg)};
  {
    std::lock_guard lock(mu_);
    ++sent_;
  }
  transmit(std::move(env));
}

void ThreadedRuntime::transmit(Envelope env) { arrived(std::move(env)); }

void ThreadedRuntime::arrived(Envelope env) {
  const auto it = inboxes_.find(env.to);
  if (it == inboxes_.end()) {
    fail(std::make_exception_ptr(Error(ErrorCode::TransportError, "no endpoint " + party_name(env.to))));
    return;
  }
  it->second->push(std::move(env));
}

void ThreadedRuntime::send(const PartyMessage& msg) { post(msg); }

PartyMessage ThreadedRuntime::receive() {
  auto env = inboxes_.at(party::kDriver)->pop();
  {
    std::lock_guard lock(mu_);
    if (error_) std::rethrow_exception(error_);
  }
  if (!env) throw Error(ErrorCode::TransportError, "driver inbox closed");
  return open_and_observe(*env, obs_);
}

std::size_t ThreadedRuntime::frames_sent() const {
  std::lock_guard lock(mu_);
  return sent_;
}

// ------------------------------------------------------------------ TCP

namespace {

[[noreturn]] void sys_fail(const char* what) {
  throw Error(ErrorCode::TransportError, std::string(what) + ": " + std::strerror(errno));
}

void write_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      sys_fail("send");
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

bool read_all(int fd, std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t r = ::recv(fd, data, n, 0);
    if (r == 0) return false;
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

sockaddr_in loopback(std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  return addr;
}

}  // namespace

TcpRuntime::TcpRuntime(std::vector<Party*> parties, Observers obs) : ThreadedRuntime(std::move(parties), obs, false) {
  try {
    for (PartyId id : endpoints()) {
      const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd < 0) sys_fail("socket");
      listeners_[id].fd = fd;
      auto addr = loopback(0);
      if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) sys_fail("bind");
      if (::listen(fd, 16) != 0) sys_fail("listen");
      socklen_t len = sizeof addr;
      if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) sys_fail("getsockname");
      listeners_[id].port = ntohs(addr.sin_port);
    }
  } catch (...) {
    shutdown_sockets();
    throw;
  }
  for (const auto& [id, l] : listeners_) accept_threads_.emplace_back([this, id = id, fd = l.fd] { accept_loop(id, fd); });
  start();
}

TcpRuntime::~TcpRuntime() {
  stop();
  shutdown_sockets();
}

void TcpRuntime::shutdown_sockets() {
  {
    std::lock_guard lock(conn_mu_);
    if (closing_) return;
    closing_ = true;
    for (auto& [_, l] : listeners_) {
      if (l.fd >= 0) ::shutdown(l.fd, SHUT_RDWR);
    }
    for (auto& [_, fd] : outgoing_) ::shutdown(fd, SHUT_RDWR);
    for (int fd : incoming_) ::shutdown(fd, SHUT_RDWR);
  }
  for (auto& t : accept_threads_) {
    if (t.joinable()) t.join();
  }
  // Accept threads have exited, so io_threads_ no longer grows.
  for (auto& t : io_threads_) {
    if (t.joinable()) t.join();
  }
  for (auto& [_, l] : listeners_) {
    if (l.fd >= 0) ::close(l.fd);
  }
  for (auto& [_, fd] : outgoing_) ::close(fd);
  for (int fd : incoming_) ::close(fd);
}

void TcpRuntime::accept_loop(PartyId self, int listen_fd) {
  for (;;) {
    const int fd = ::accept(listen_fd, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    std::lock_guard lock(conn_mu_);
    if (closing_) {
      ::close(fd);
      return;
    }
    incoming_.push_back(fd);
    io_threads_.emplace_back([this, self, fd] { read_loop(self, fd); });
  }
}

void TcpRuntime::read_loop(PartyId self, int fd) {
  std::uint8_t from = 0;
  if (!read_all(fd, &from, 1)) return;
  for (;;) {
    Bytes frame(4);
    if (!read_all(fd, frame.data(), 4)) return;
    const std::uint32_t len = (std::uint32_t{frame[0]} << 24) | (std::uint32_t{frame[1]} << 16) |
                              (std::uint32_t{frame[2]} << 8) | std::uint32_t{frame[3]};
    frame.resize(4 + std::size_t{len});
    if (!read_all(fd, frame.data() + 4, len)) return;
    arrived({from, self, std::move(frame)});
  }
}

void TcpRuntime::transmit(Envelope env) {
  std::lock_guard lock(conn_mu_);
  if (closing_) return;
  auto it = outgoing_.find({env.from, env.to});
  if (it == outgoing_.end()) {
    const auto l = listeners_.find(env.to);
    if (l == listeners_.end()) throw Error(ErrorCode::TransportError, "no endpoint " + party_name(env.to));
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) sys_fail("socket");
    auto addr = loopback(l->second.port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      ::close(fd);
      sys_fail("connect");
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    write_all(fd, &env.from, 1);
    it = outgoing_.emplace(std::make_pair(env.from, env.to), fd).first;
  }
  write_all(it->second, env.frame.data(), env.frame.size());
}

}  // namespace cipherloop::engine
