#include "mra/transport.hpp"

#include <array>
#include <csignal>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <exception>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "mra/errors.hpp"

namespace mra {

void Transport::barrier(std::uint64_t round) {
  const std::uint64_t tag = make_tag(Phase::barrier, round);
  if (rank() == 0) {
    for (int w = 1; w < size(); ++w) recv(w, tag);
    for (int w = 1; w < size(); ++w) send(w, tag, {});
  } else {
    send(0, tag, {});
    recv(0, tag);
  }
}

TransportKind parse_transport_kind(const std::string& text) {
  if (text == "thread") return TransportKind::in_process;
  if (text == "process") return TransportKind::process;
  throw ConfigError("transport: expected 'thread' or 'process', got '" + text + "'");
}

namespace {

struct Failure {
  ErrorKind kind = ErrorKind::transport;
  std::string message;
};

[[noreturn]] void raise(const Failure& f) { throw_error(f.kind, f.message); }

Failure describe(std::exception_ptr e) {
  try {
    std::rethrow_exception(e);
  } catch (const Error& err) {
    return {err.kind(), err.what()};
  } catch (const std::exception& err) {
    return {ErrorKind::structural, err.what()};
  } catch (...) {
    return {ErrorKind::structural, "unknown error"};
  }
}

/// Incoming messages of one worker, keyed by (sender, tag).
class Mailbox {
 public:
  explicit Mailbox(int peers) : closed_(static_cast<std::size_t>(peers), false) {}

  void push(int from, std::uint64_t tag, std::string payload) {
    {
      std::lock_guard lock(mutex_);
      queues_[{from, tag}].push_back(std::move(payload));
    }
    cv_.notify_all();
  }

  void fail(Failure f) {
    {
      std::lock_guard lock(mutex_);
      if (!failure_) failure_ = std::move(f);
    }
    cv_.notify_all();
  }

  void close(int from) {
    {
      std::lock_guard lock(mutex_);
      closed_[static_cast<std::size_t>(from)] = true;
    }
    cv_.notify_all();
  }

  std::string pop(int self, int from, std::uint64_t tag) {
    std::unique_lock lock(mutex_);
    for (;;) {
      auto it = queues_.find({from, tag});
      if (it != queues_.end() && !it->second.empty()) {
        std::string out = std::move(it->second.front());
        it->second.pop_front();
        return out;
      }
      if (failure_) raise(*failure_);
      if (closed_[static_cast<std::size_t>(from)]) {
        throw TransportError("worker " + std::to_string(self) + ": worker " + std::to_string(from) +
                             " closed its channel before sending tag " + std::to_string(tag));
      }
      cv_.wait(lock);
    }
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::map<std::pair<int, std::uint64_t>, std::deque<std::string>> queues_;
  std::vector<bool> closed_;
  std::optional<Failure> failure_;
};

// ---------------------------------------------------------------- in-process

class ThreadHub {
 public:
  explicit ThreadHub(int workers) {
    for (int w = 0; w < workers; ++w) boxes_.push_back(std::make_unique<Mailbox>(workers));
  }
  Mailbox& box(int w) { return *boxes_[static_cast<std::size_t>(w)]; }
  void fail_all(const Failure& f) {
    for (auto& b : boxes_) b->fail(f);
  }
  int size() const { return static_cast<int>(boxes_.size()); }

 private:
  std::vector<std::unique_ptr<Mailbox>> boxes_;
};

class ThreadTransport final : public Transport {
 public:
  ThreadTransport(ThreadHub& hub, int rank) : hub_(hub), rank_(rank) {}
  int rank() const override { return rank_; }
  int size() const override { return hub_.size(); }
  void send(int to, std::uint64_t tag, std::string payload) override {
    hub_.box(to).push(rank_, tag, std::move(payload));
  }
  std::string recv(int from, std::uint64_t tag) override { return hub_.box(rank_).pop(rank_, from, tag); }

 private:
  ThreadHub& hub_;
  int rank_;
};

void run_threads(int workers, const WorkerBody& body) {
  ThreadHub hub(workers);
  std::mutex error_mutex;
  std::exception_ptr first;
  {
    std::vector<std::jthread> threads;
    for (int w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        ThreadTransport transport(hub, w);
        try {
          body(transport);
        } catch (...) {
          {
            std::lock_guard lock(error_mutex);
            if (!first) first = std::current_exception();
          }
          hub.fail_all(describe(std::current_exception()));
        }
      });
    }
  }
  if (first) std::rethrow_exception(first);
}

// ------------------------------------------------------------------ process

constexpr std::uint64_t kFailureTag = ~std::uint64_t{0};

bool write_all(int fd, const void* data, std::size_t n) {
  const auto* p = static_cast<const char*>(data);
  while (n > 0) {
    const ssize_t k = ::write(fd, p, n);
    if (k < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    p += k;
    n -= static_cast<std::size_t>(k);
  }
  return true;
}

bool read_all(int fd, void* data, std::size_t n) {
  auto* p = static_cast<char*>(data);
  while (n > 0) {
    const ssize_t k = ::read(fd, p, n);
    if (k < 0 && errno == EINTR) continue;
    if (k <= 0) return false;
    p += k;
    n -= static_cast<std::size_t>(k);
  }
  return true;
}

/// Endpoint of one process in a full pipe mesh; a reader thread per peer
/// drains incoming frames (tag, length, payload) into the mailbox.
class PipeTransport final : public Transport {
 public:
  PipeTransport(int rank, int size, std::vector<int> out_fds, std::vector<int> in_fds)
      : rank_(rank), size_(size), out_(std::move(out_fds)), in_(std::move(in_fds)), box_(size),
        locks_(static_cast<std::size_t>(size)) {
    for (int peer = 0; peer < size_; ++peer) {
      if (peer == rank_) continue;
      readers_.emplace_back([this, peer] { drain(peer); });
    }
  }

  ~PipeTransport() override {
    close_outgoing();
    for (auto& t : readers_) t.join();
    for (int fd : in_)
      if (fd >= 0) ::close(fd);
  }

  int rank() const override { return rank_; }
  int size() const override { return size_; }

  void send(int to, std::uint64_t tag, std::string payload) override {
    std::lock_guard lock(locks_[static_cast<std::size_t>(to)]);
    const int fd = out_[static_cast<std::size_t>(to)];
    const std::uint64_t header[2] = {tag, payload.size()};
    if (fd < 0 || !write_all(fd, header, sizeof header) || !write_all(fd, payload.data(), payload.size())) {
      throw TransportError("worker " + std::to_string(rank_) + ": cannot send to worker " +
                           std::to_string(to) + ": " + std::strerror(errno));
    }
  }

  std::string recv(int from, std::uint64_t tag) override { return box_.pop(rank_, from, tag); }

  void broadcast_failure(const Failure& f) {
    for (int peer = 0; peer < size_; ++peer) {
      if (peer == rank_) continue;
      std::string payload(1, static_cast<char>(f.kind));
      payload += f.message;
      try {
        send(peer, kFailureTag, std::move(payload));
      } catch (const Error&) {
      }
    }
  }

  void close_outgoing() {
    for (std::size_t i = 0; i < out_.size(); ++i) {
      std::lock_guard lock(locks_[i]);
      if (out_[i] >= 0) ::close(out_[i]);
      out_[i] = -1;
    }
  }

 private:
  void drain(int peer) {
    const int fd = in_[static_cast<std::size_t>(peer)];
    for (;;) {
      std::uint64_t header[2];
      if (!read_all(fd, header, sizeof header)) break;
      std::string payload(header[1], '\0');
      if (!read_all(fd, payload.data(), payload.size())) break;
      if (header[0] == kFailureTag) {
        Failure f;
        f.kind = payload.empty() ? ErrorKind::transport : static_cast<ErrorKind>(payload[0]);
        f.message = payload.empty() ? std::string("remote failure") : payload.substr(1);
        box_.fail(std::move(f));
      } else {
        box_.push(peer, header[0], std::move(payload));
      }
    }
    box_.close(peer);
  }

  int rank_;
  int size_;
  std::vector<int> out_;
  std::vector<int> in_;
  Mailbox box_;
  std::vector<std::mutex> locks_;
  std::vector<std::thread> readers_;
};

void run_processes(int workers, const WorkerBody& body) {
  const auto p = static_cast<std::size_t>(workers);
  // fds[from][to] = {read end, write end}
  std::vector<std::vector<std::array<int, 2>>> fds(p, std::vector<std::array<int, 2>>(p, {-1, -1}));
  const auto close_all = [&](int keep) {
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) {
        if (i == j) continue;
        if (static_cast<int>(j) != keep && fds[i][j][0] >= 0) ::close(fds[i][j][0]);
        if (static_cast<int>(i) != keep && fds[i][j][1] >= 0) ::close(fds[i][j][1]);
      }
  };
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      if (i == j) continue;
      int pair[2];
      if (::pipe(pair) != 0) {
        close_all(-1);
        throw TransportError(std::string("cannot create worker pipes: ") + std::strerror(errno));
      }
      fds[i][j] = {pair[0], pair[1]};
    }
  const auto endpoint = [&](int rank) {
    std::vector<int> out(p, -1), in(p, -1);
    for (std::size_t peer = 0; peer < p; ++peer) {
      if (static_cast<int>(peer) == rank) continue;
      out[peer] = fds[static_cast<std::size_t>(rank)][peer][1];
      in[peer] = fds[peer][static_cast<std::size_t>(rank)][0];
    }
    return std::pair(out, in);
  };

  std::signal(SIGPIPE, SIG_IGN);
  std::cout.flush();
  std::cerr.flush();
  std::vector<pid_t> children;
  for (int rank = 1; rank < workers; ++rank) {
    const pid_t pid = ::fork();
    if (pid < 0) {
      close_all(-1);
      for (pid_t c : children) ::waitpid(c, nullptr, 0);
      throw TransportError(std::string("cannot fork worker process: ") + std::strerror(errno));
    }
    if (pid == 0) {
      close_all(rank);
      auto [out, in] = endpoint(rank);
      int status = 0;
      {
        PipeTransport transport(rank, workers, out, in);
        try {
          body(transport);
        } catch (...) {
          transport.broadcast_failure(describe(std::current_exception()));
          status = 1;
        }
        std::cout.flush();
        std::cerr.flush();
        transport.close_outgoing();
        ::_exit(status);
      }
    }
    children.push_back(pid);
  }

  close_all(0);
  auto [out, in] = endpoint(0);
  std::exception_ptr error;
  {
    PipeTransport transport(0, workers, out, in);
    try {
      body(transport);
    } catch (...) {
      error = std::current_exception();
      transport.broadcast_failure(describe(error));
    }
    transport.close_outgoing();
    int failed = 0;
    for (std::size_t i = 0; i < children.size(); ++i) {
      int status = 0;
      ::waitpid(children[i], &status, 0);
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failed = static_cast<int>(i) + 1;
    }
    if (!error && failed != 0) {
      throw TransportError("worker process " + std::to_string(failed) + " exited abnormally");
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

void run_workers(TransportKind kind, int workers, const WorkerBody& body) {
  if (workers < 1) throw ConfigError("worker count must be at least 1, got " + std::to_string(workers));
  if (kind == TransportKind::in_process || workers == 1) {
    run_threads(workers, body);
  } else {
    run_processes(workers, body);
  }
}

}  // namespace mra
