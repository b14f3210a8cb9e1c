#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "cipherloop/engine/audit.hpp"
#include "cipherloop/engine/messages.hpp"
#include "cipherloop/engine/parties.hpp"

namespace cipherloop::engine {

/// An encoded frame in flight between two endpoints.
struct Envelope {
  PartyId from = 0;
  PartyId to = 0;
  Bytes frame;
};

struct Observers {
  Trace* trace = nullptr;
  TaintAudit* audit = nullptr;
};

/// Moves frames between parties and the driver. Every message is encoded
/// to a frame on send and decoded on delivery; observers see each delivered
/// frame once. Delivery is FIFO per ordered pair of endpoints.
class Runtime {
 public:
  virtual ~Runtime() = default;
  /// Sends a driver message into the network.
  virtual void send(const PartyMessage& msg) = 0;
  /// Blocks until a message addressed to the driver arrives. Rethrows the
  /// first error raised by a party.
  virtual PartyMessage receive() = 0;
  /// Frames encoded so far, driver traffic included.
  virtual std::size_t frames_sent() const = 0;
};

/// Single-threaded scheduler: one global FIFO, drained one message at a time
/// whenever the driver waits.
class LockstepRuntime final : public Runtime {
 public:
  LockstepRuntime(std::vector<Party*> parties, Observers obs);
  void send(const PartyMessage& msg) override;
  PartyMessage receive() override;
  std::size_t frames_sent() const override { return sent_; }

 private:
  void post(const PartyMessage& msg);

  std::map<PartyId, Party*> parties_;
  Observers obs_;
  std::deque<Envelope> queue_;
  std::deque<PartyMessage> driver_inbox_;
  std::size_t sent_ = 0;
};

template <typename T>
class BlockingQueue {
 public:
  void push(T v) {
    {
      std::lock_guard lock(mu_);
      q_.push_back(std::move(v));
    }
    cv_.notify_one();
  }
  /// Empty once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !q_.empty(); });
    if (q_.empty()) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }
  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> q_;
  bool closed_ = false;
};

/// One thread per party, each draining its own inbox. Subclasses change how
/// a frame reaches the receiving inbox.
class ThreadedRuntime : public Runtime {
 public:
  ThreadedRuntime(std::vector<Party*> parties, Observers obs) : ThreadedRuntime(std::move(parties), obs, true) {}
  ~ThreadedRuntime() override;
  void send(const PartyMessage& msg) override;
  PartyMessage receive() override;
  std::size_t frames_sent() const override;

 protected:
  ThreadedRuntime(std::vector<Party*> parties, Observers obs, bool autostart);
  /// Starts the party threads; subclasses call it once their transport is up.
  void start();
  /// Stops the party threads; idempotent.
  void stop();
  /// Hands an encoded frame to the receiving endpoint.
  virtual void transmit(Envelope env);
  /// Called by the transport when a frame has arrived.
  void arrived(Envelope env);
  void fail(std::exception_ptr e);
  std::vector<PartyId> endpoints() const;

 private:
  void post(const PartyMessage& msg);
  void run(Party* party);

  std::map<PartyId, Party*> parties_;
  Observers obs_;
  std::map<PartyId, std::unique_ptr<BlockingQueue<Envelope>>> inboxes_;
  std::vector<std::thread> threads_;
  mutable std::mutex mu_;
  std::exception_ptr error_;
  std::size_t sent_ = 0;
  bool started_ = false;
  bool stopped_ = false;
};

/// Threaded parties whose frames cross loopback TCP sockets. Each endpoint
/// (parties and driver) listens on an ephemeral port; a connection starts
/// with one byte naming the sender.
class TcpRuntime final : public ThreadedRuntime {
 public:
  TcpRuntime(std::vector<Party*> parties, Observers obs);
  ~TcpRuntime() override;

 protected:
  void transmit(Envelope env) override;

 private:
  struct Listener {
    int fd = -1;
    std::uint16_t port = 0;
  };
  void accept_loop(PartyId self, int listen_fd);
  void read_loop(PartyId self, int fd);
  void shutdown_sockets();

  std::map<PartyId, Listener> listeners_;
  std::mutex conn_mu_;
  std::map<std::pair<PartyId, PartyId>, int> outgoing_;
  std::vector<int> incoming_;
  std::vector<std::thread> accept_threads_;
  std::vector<std::thread> io_threads_;
  bool closing_ = false;
};

}  // namespace cipherloop::engine
