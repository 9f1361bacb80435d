#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "uhlm/backend.hpp"

namespace uhlm {

/// Where the external model process lives. Exactly one of `command`
/// (spawned, spoken to over stdio) or `address` ("host:port", TCP) is set.
struct ExternalEndpoint {
  std::vector<std::string> command;
  std::string address;
  std::chrono::milliseconds timeout{60'000};
};

/// One newline-delimited JSON connection to an external model process.
///
/// Protocol:
///   backend -> {"hello": {"vocab_size": V, "eos_id": E}}        once, on startup
///   client  -> {"id": n, "role": "slm"|"llm", "tokens": [...]}
///   backend -> {"id": n, "logits": [V floats]}  or  {"id": n, "error": "..."}
///
/// Requests are serialised: one in flight at a time.
class ExternalConnection {
 public:
  explicit ExternalConnection(const ExternalEndpoint& endpoint);
  ~ExternalConnection();

  ExternalConnection(const ExternalConnection&) = delete;
  ExternalConnection& operator=(const ExternalConnection&) = delete;

  const Vocabulary& vocab() const noexcept { return vocab_; }

  LogitVector request(Role role, const TokenSequence& tokens);

 private:
  void send_line(const std::string& line);
  std::string read_line();
  void close_all() noexcept;

  std::chrono::milliseconds timeout_;
  int read_fd_ = -1;
  int write_fd_ = -1;
  int child_pid_ = -1;
  std::string buffer_;
  std::uint64_t next_id_ = 1;
  Vocabulary vocab_{2, TokenId{0}};
  std::mutex mu_;
};

class ExternalBackend final : public ModelBackend {
 public:
  ExternalBackend(std::shared_ptr<ExternalConnection> conn, Role role)
      : conn_(std::move(conn)), role_(role) {}

  Role role() const override { return role_; }
  const Vocabulary& vocab() const override { return conn_->vocab(); }
  LogitVector next_logits(const TokenSequence& sequence) const override;

 private:
  std::shared_ptr<ExternalConnection> conn_;
  Role role_;
};

/// Opens one connection after the handshake and binds both roles to it.
BackendPair external_backend(const ExternalEndpoint& endpoint);

}  // namespace uhlm
