#include "uhlm/backend.hpp"

#include <string>

#include "uhlm/error.hpp"

namespace uhlm {

std::string_view to_string(Role r) { return r == Role::SLM ? "slm" : "llm"; }

void check_sequence(const TokenSequence& sequence, const Vocabulary& vocab) {
  for (TokenId t : sequence) {
    if (!vocab.contains(t)) {
      throw numerical_error("out-of-vocabulary token " + std::to_string(t.index));
    }
  }
}

void check_pair(const BackendPair& pair) {
  if (!pair.slm || !pair.llm) throw config_error("backend pair is incomplete");
  if (pair.slm->role() != Role::SLM || pair.llm->role() != Role::LLM) {
    throw config_error("backend pair roles are swapped");
  }
  if (!(pair.slm->vocab() == pair.llm->vocab())) {
    throw config_error("SLM and LLM must share one vocabulary");
  }
}

}  // namespace uhlm
