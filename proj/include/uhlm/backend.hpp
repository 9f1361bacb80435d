#pragma once

#include <memory>
#include <optional>
#include <string_view>

#include "uhlm/core_math.hpp"

namespace uhlm {

enum class Role { SLM, LLM };

std::string_view to_string(Role r);

/// What the device knows about the current round's draft when the target
/// model is queried. Language models ignore it; the planted synthetic
/// target uses it to realise a prescribed uncertainty/rejection relation.
struct DraftContext {
  TokenId draft;
  std::optional<double> u;
};

/// Next-token logit provider for one role.
///
/// next_logits must be a pure function of the sequence (and context) for
/// the lifetime of the backend.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual Role role() const = 0;
  virtual const Vocabulary& vocab() const = 0;
  virtual LogitVector next_logits(const TokenSequence& sequence) const = 0;
  virtual LogitVector next_logits(const TokenSequence& sequence,
                                  const DraftContext& /*ctx*/) const {
    return next_logits(sequence);
  }
};

struct BackendPair {
  std::shared_ptr<const ModelBackend> slm;
  std::shared_ptr<const ModelBackend> llm;

  const Vocabulary& vocab() const { return slm->vocab(); }
};

/// Throws when any token lies outside `vocab`.
void check_sequence(const TokenSequence& sequence, const Vocabulary& vocab);

/// Validates roles and that both sides share one vocabulary.
void check_pair(const BackendPair& pair);

}  // namespace uhlm
