#include "uhlm/external_backend.hpp"

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "uhlm/error.hpp"

namespace uhlm {

namespace {

std::string errno_text() { return std::strerror(errno); }

int connect_tcp(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) {
    throw config_error("external backend address must be host:port, got '" + address + "'");
  }
  const std::string host = address.substr(0, colon);
  const std::string port = address.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw backend_error("cannot resolve " + address + ": " + gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* p = res; p != nullptr; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw backend_error("cannot connect to external backend at " + address);
  return fd;
}

}  // namespace

ExternalConnection::ExternalConnection(const ExternalEndpoint& endpoint)
    : timeout_(endpoint.timeout) {
  // A dead peer must surface as an error, not kill the process.
  std::signal(SIGPIPE, SIG_IGN);

  if (!endpoint.command.empty() == !endpoint.address.empty()) {
    throw config_error("external backend needs exactly one of command or address");
  }
  if (!endpoint.address.empty()) {
    read_fd_ = connect_tcp(endpoint.address);
    write_fd_ = ::dup(read_fd_);
  } else {
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0 || ::pipe2(from_child, O_CLOEXEC) != 0) {
      throw backend_error("pipe: " + errno_text());
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw backend_error("fork: " + errno_text());
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      std::vector<char*> argv;
      for (const auto& a : endpoint.command) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      ::execvp(argv[0], argv.data());
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    child_pid_ = pid;
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
  }

  try {
    const auto hello = nlohmann::json::parse(read_line());
    const auto& h = hello.at("hello");
    vocab_ = Vocabulary(h.at("vocab_size").get<std::size_t>(),
                        TokenId{h.at("eos_id").get<std::uint32_t>()});
  } catch (const nlohmann::json::exception& e) {
    close_all();
    throw backend_error(std::string("protocol violation in handshake: ") + e.what());
  } catch (...) {
    close_all();
    throw;
  }
}

ExternalConnection::~ExternalConnection() { close_all(); }

void ExternalConnection::close_all() noexcept {
  if (write_fd_ >= 0) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
  write_fd_ = read_fd_ = -1;
  if (child_pid_ > 0) {
    ::kill(child_pid_, SIGTERM);
    int status = 0;
    ::waitpid(child_pid_, &status, 0);
    child_pid_ = -1;
  }
}

void ExternalConnection::send_line(const std::string& line) {
  std::string data = line + '\n';
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw backend_error("external backend write failed: " + errno_text());
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string ExternalConnection::read_line() {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + timeout_;
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
    if (left.count() <= 0) {
      throw backend_error("external backend timeout after " +
                          std::to_string(timeout_.count()) + " ms");
    }
    pollfd pfd{read_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw backend_error("poll: " + errno_text());
    }
    if (rc == 0) continue;
    char chunk[65536];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw backend_error("external backend read failed: " + errno_text());
    }
    if (n == 0) throw backend_error("external backend closed the connection");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

LogitVector ExternalConnection::request(Role role, const TokenSequence& tokens) {
  std::lock_guard lock(mu_);
  const std::uint64_t id = next_id_++;
  nlohmann::json req = {{"id", id}, {"role", std::string(to_string(role))}};
  auto& arr = req["tokens"] = nlohmann::json::array();
  for (TokenId t : tokens) arr.push_back(t.index);
  send_line(req.dump());

  nlohmann::json resp;
  try {
    resp = nlohmann::json::parse(read_line());
  } catch (const nlohmann::json::parse_error& e) {
    throw backend_error(std::string("protocol violation: malformed reply: ") + e.what());
  }
  if (!resp.is_object() || !resp.contains("id") || resp["id"] != id) {
    throw backend_error("protocol violation: reply id does not match request " +
                        std::to_string(id));
  }
  if (resp.contains("error")) {
    throw backend_error("external backend error: " + resp["error"].dump());
  }
  if (!resp.contains("logits") || !resp["logits"].is_array()) {
    throw backend_error("protocol violation: reply carries no logits array");
  }
  const auto& raw = resp["logits"];
  if (raw.size() != vocab_.size()) {
    throw backend_error("logit-length mismatch: got " + std::to_string(raw.size()) +
                        ", expected " + std::to_string(vocab_.size()));
  }
  std::vector<double> z;
  z.reserve(raw.size());
  for (const auto& v : raw) {
    if (!v.is_number()) throw backend_error("protocol violation: non-numeric logit");
    z.push_back(v.get<double>());
  }
  try {
    return LogitVector(std::move(z));
  } catch (const Error& e) {
    throw backend_error(std::string("external backend sent ") + e.what());
  }
}

LogitVector ExternalBackend::next_logits(const TokenSequence& sequence) const {
  check_sequence(sequence, vocab());
  return conn_->request(role_, sequence);
}

BackendPair external_backend(const ExternalEndpoint& endpoint) {
  auto conn = std::make_shared<ExternalConnection>(endpoint);
  return {std::make_shared<ExternalBackend>(conn, Role::SLM),
          std::make_shared<ExternalBackend>(conn, Role::LLM)};
}

}  // namespace uhlm
