#include "uhlm/ngram_backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "uhlm/error.hpp"

namespace uhlm {

namespace {

constexpr std::size_t kByteVocab = 256;

std::string hex_key(const std::string& key) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(key.size() * 2);
  for (unsigned char c : key) {
    out += digits[c >> 4];
    out += digits[c & 0xF];
  }
  return out;
}

std::string unhex_key(const std::string& hex) {
  if (hex.size() % 2) throw config_error("n-gram file: odd-length context key");
  std::string out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    out += static_cast<char>(std::stoi(hex.substr(i, 2), nullptr, 16));
  }
  return out;
}

}  // namespace

NGramModel::NGramModel(std::size_t order, Vocabulary vocab, double epsilon)
    : order_(order), vocab_(vocab), epsilon_(epsilon) {
  if (!(epsilon_ > 0.0)) throw config_error("n-gram smoothing epsilon must be positive");
}

std::string NGramModel::context_key(std::span<const TokenId> history) const {
  // Left-padded with nothing: short histories get their own shorter keys.
  const std::size_t n = std::min(order_, history.size());
  std::string key;
  key.reserve(n * 4);
  for (std::size_t i = history.size() - n; i < history.size(); ++i) {
    const std::uint32_t v = history[i].index;
    for (int b = 0; b < 4; ++b) key += static_cast<char>((v >> (8 * b)) & 0xFF);
  }
  return key;
}

void NGramModel::train(std::span<const TokenId> tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!vocab_.contains(tokens[i])) throw config_error("corpus token outside vocabulary");
    Row& row = table_[context_key(tokens.first(i))];
    ++row.total;
    ++row.counts[tokens[i].index];
  }
}

VocabDistribution NGramModel::distribution(std::span<const TokenId> history) const {
  const std::size_t n = vocab_.size();
  const auto it = table_.find(context_key(history));
  if (it == table_.end()) {
    return VocabDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }
  const Row& row = it->second;
  const double denom = static_cast<double>(row.total) + epsilon_ * static_cast<double>(n);
  std::vector<double> p(n, epsilon_ / denom);
  for (const auto& [tok, c] : row.counts) {
    p[tok] = (static_cast<double>(c) + epsilon_) / denom;
  }
  return VocabDistribution::normalized(std::move(p));
}

void NGramModel::save(const std::string& path) const {
  nlohmann::json contexts = nlohmann::json::object();
  for (const auto& [key, row] : table_) {
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [tok, c] : row.counts) counts[std::to_string(tok)] = c;
    contexts[hex_key(key)] = {{"total", row.total}, {"counts", counts}};
  }
  const nlohmann::json doc = {
      {"order", order_},
      {"vocab_size", vocab_.size()},
      {"eos_id", vocab_.eos().index},
      {"epsilon", epsilon_},
      {"contexts", contexts},
  };
  std::ofstream out(path);
  if (!out) throw config_error("cannot write n-gram model " + path);
  out << kMagic << '\n' << doc.dump() << '\n';
}

NGramModel NGramModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open n-gram model " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic) throw config_error(path + ": not a " + kMagic + " model file");
  try {
    nlohmann::json doc;
    in >> doc;
    NGramModel m(doc.at("order").get<std::size_t>(),
                 Vocabulary(doc.at("vocab_size").get<std::size_t>(),
                            TokenId{doc.at("eos_id").get<std::uint32_t>()}),
                 doc.at("epsilon").get<double>());
    for (const auto& [hex, row] : doc.at("contexts").items()) {
      Row& r = m.table_[unhex_key(hex)];
      r.total = row.at("total").get<std::uint64_t>();
      for (const auto& [tok, c] : row.at("counts").items()) {
        const auto t = static_cast<std::uint32_t>(std::stoul(tok));
        if (t >= m.vocab_.size()) throw config_error(path + ": token outside vocabulary");
        r.counts[t] = c.get<std::uint64_t>();
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(path + ": malformed n-gram table: " + e.what());
  }
}

LogitVector NGramBackend::next_logits(const TokenSequence& sequence) const {
  check_sequence(sequence, vocab());
  return log_probs(model_->distribution(sequence));
}

void NGramPairConfig::validate() const {
  if (order_slm >= order_llm) {
    throw config_error("n-gram order_slm must be smaller than order_llm");
  }
  if (!(smoothing_epsilon > 0.0)) throw config_error("smoothing_epsilon must be positive");
  if (eos_id >= kByteVocab) throw config_error("n-gram eos_id must be a byte value");
}

std::vector<TokenId> tokenize_bytes(std::string_view text) {
  std::vector<TokenId> out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(TokenId{c});
  return out;
}

std::vector<TokenId> read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot read corpus " + path);
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return tokenize_bytes(text);
}

BackendPair train_ngram(const NGramPairConfig& cfg) {
  cfg.validate();
  const auto corpus = read_corpus(cfg.corpus_path);
  return train_ngram(cfg, corpus);
}

BackendPair train_ngram(const NGramPairConfig& cfg, std::span<const TokenId> corpus) {
  cfg.validate();
  if (corpus.empty()) throw config_error("n-gram corpus is empty");
  const Vocabulary vocab(kByteVocab, TokenId{cfg.eos_id});
  auto slm = std::make_shared<NGramModel>(cfg.order_slm, vocab, cfg.smoothing_epsilon);
  auto llm = std::make_shared<NGramModel>(cfg.order_llm, vocab, cfg.smoothing_epsilon);
  slm->train(corpus);
  llm->train(corpus);
  return {std::make_shared<NGramBackend>(std::move(slm), Role::SLM),
          std::make_shared<NGramBackend>(std::move(llm), Role::LLM)};
}

}  // namespace uhlm
