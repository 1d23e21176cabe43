#pragma once

// Line-oriented child process over a UNIX socket pair bound to the child's
// stdin and stdout. The child's stderr is inherited. Writes use MSG_NOSIGNAL
// so a dead peer surfaces as an error instead of SIGPIPE.

#include <chrono>
#include <cerrno>
#include <cstring>
#include <optional>
#include <string>
#include <utility>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace eqforge {

class ChildProcess {
 public:
  enum class ReadStatus { line, timeout, eof };

  ChildProcess() = default;
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;
  ChildProcess(ChildProcess&& other) noexcept { swap(other); }
  ChildProcess& operator=(ChildProcess&& other) noexcept {
    if (this != &other) {
      terminate();
      swap(other);
    }
    return *this;
  }
  ~ChildProcess() { terminate(); }

  /// Runs `command` through /bin/sh. Returns std::nullopt with errno text on
  /// failure to create the process.
  static std::optional<ChildProcess> spawn(const std::string& command, std::string* error = nullptr) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
      if (error) *error = std::strerror(errno);
      return std::nullopt;
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);

    std::string shell_command = "exec " + command;
    char sh[] = "/bin/sh";
    char dash_c[] = "-c";
    char* argv[] = {sh, dash_c, shell_command.data(), nullptr};
    pid_t pid = -1;
    const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(fds[1]);
    if (rc != 0) {
      ::close(fds[0]);
      if (error) *error = std::strerror(rc);
      return std::nullopt;
    }
    ChildProcess child;
    child.pid_ = pid;
    child.fd_ = fds[0];
    return child;
  }

  bool running() const { return fd_ >= 0; }

  /// Writes `line` plus '\n'. False if the peer is gone.
  bool write_line(const std::string& line) {
    if (fd_ < 0) return false;
    std::string data = line + "\n";
    std::size_t sent = 0;
    while (sent < data.size()) {
      const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      sent += static_cast<std::size_t>(n);
    }
    return true;
  }

  /// Reads one '\n'-terminated line (terminator stripped) within the timeout.
  ReadStatus read_line(std::string& out, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        out = buffer_.substr(0, nl);
        if (!out.empty() && out.back() == '\r') out.pop_back();
        buffer_.erase(0, nl + 1);
        return ReadStatus::line;
      }
      if (fd_ < 0 || eof_) return ReadStatus::eof;
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return ReadStatus::timeout;
      pollfd pfd{fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        return ReadStatus::eof;
      }
      if (ready == 0) return ReadStatus::timeout;
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        eof_ = true;
      } else if (n == 0) {
        eof_ = true;
      } else {
        buffer_.append(chunk, static_cast<std::size_t>(n));
      }
    }
  }

  /// Closes the child's input, waits briefly for a clean exit, then kills.
  void terminate() {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_WR);
      ::close(fd_);
      fd_ = -1;
    }
    if (pid_ > 0) {
      int status = 0;
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) == pid_) {
          pid_ = -1;
          break;
        }
        ::usleep(2000);
      }
      if (pid_ > 0) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        pid_ = -1;
      }
    }
    buffer_.clear();
    eof_ = false;
  }

 private:
  void swap(ChildProcess& other) noexcept {
    std::swap(pid_, other.pid_);
    std::swap(fd_, other.fd_);
    std::swap(buffer_, other.buffer_);
    std::swap(eof_, other.eof_);
  }

  pid_t pid_ = -1;
  int fd_ = -1;
  std::string buffer_;
  bool eof_ = false;
};

}  // namespace eqforge
