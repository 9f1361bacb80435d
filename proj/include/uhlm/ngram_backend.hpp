#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "uhlm/backend.hpp"

namespace uhlm {

/// Count-based conditional model P(v | previous `order` tokens) with add-epsilon
/// smoothing. Contexts never seen in training fall back to the uniform
/// distribution (zero counts, epsilon everywhere).
class NGramModel {
 public:
  static constexpr const char* kMagic = "UHLM-NGRAM-1";

  NGramModel(std::size_t order, Vocabulary vocab, double epsilon);

  /// Adds every (context, next) pair of `tokens` to the counts.
  void train(std::span<const TokenId> tokens);

  std::size_t order() const noexcept { return order_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }
  double epsilon() const noexcept { return epsilon_; }
  std::size_t context_count() const noexcept { return table_.size(); }

  /// Conditional distribution given the tail of `history`.
  VocabDistribution distribution(std::span<const TokenId> history) const;

  /// Writes the magic line followed by a JSON count table.
  void save(const std::string& path) const;
  static NGramModel load(const std::string& path);

 private:
  struct Row {
    std::uint64_t total = 0;
    std::unordered_map<std::uint32_t, std::uint64_t> counts;
  };

  std::string context_key(std::span<const TokenId> history) const;

  std::size_t order_;
  Vocabulary vocab_;
  double epsilon_;
  std::unordered_map<std::string, Row> table_;
};

class NGramBackend final : public ModelBackend {
 public:
  NGramBackend(std::shared_ptr<const NGramModel> model, Role role)
      : model_(std::move(model)), role_(role) {}

  Role role() const override { return role_; }
  const Vocabulary& vocab() const override { return model_->vocab(); }
  LogitVector next_logits(const TokenSequence& sequence) const override;

  const NGramModel& model() const noexcept { return *model_; }

 private:
  std::shared_ptr<const NGramModel> model_;
  Role role_;
};

struct NGramPairConfig {
  std::string corpus_path;
  std::size_t order_slm = 1;
  std::size_t order_llm = 3;
  double smoothing_epsilon = 1e-4;
  std::uint32_t eos_id = 0;

  void validate() const;
};

/// Byte-level tokenisation: one token per byte, |V| = 256.
std::vector<TokenId> tokenize_bytes(std::string_view text);
std::vector<TokenId> read_corpus(const std::string& path);

/// Trains the SLM (low order) and LLM (high order) on the same corpus.
BackendPair train_ngram(const NGramPairConfig& cfg);
BackendPair train_ngram(const NGramPairConfig& cfg, std::span<const TokenId> corpus);

}  // namespace uhlm
