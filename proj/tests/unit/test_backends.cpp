#include <doctest.h>

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>

#include "oracle_values.hpp"
#include "stub_server.hpp"
#include "uhlm/engine.hpp"
#include "uhlm/error.hpp"
#include "uhlm/external_backend.hpp"
#include "uhlm/ngram_backend.hpp"
#include "uhlm/synthetic_backend.hpp"
#include "uhlm/trace_io.hpp"

using namespace uhlm;
namespace fs = std::filesystem;

namespace {

std::string temp_file(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / ("uhlm_test_" + name);
  std::ofstream(p, std::ios::binary) << content;
  return p.string();
}

ExternalEndpoint stub_endpoint(const std::string& mode, std::size_t vocab = 8,
                               std::size_t limit = 0) {
  ExternalEndpoint ep;
  ep.command = {STUB_BACKEND_PATH, mode, std::to_string(vocab), "0", std::to_string(limit)};
  ep.timeout = std::chrono::milliseconds(2000);
  return ep;
}

}  // namespace

TEST_CASE("synthetic backend is pure") {
  const auto pair = make_synthetic_pair(SyntheticPairConfig{});
  const TokenSequence seq{TokenId{1}, TokenId{2}};
  CHECK(pair.slm->next_logits(seq) == pair.slm->next_logits(seq));
  CHECK(pair.llm->next_logits(seq) == pair.llm->next_logits(seq));
  CHECK_NOTHROW(check_pair(pair));
}

TEST_CASE("synthetic coupling extremes") {
  SyntheticPairConfig same;
  same.coupling = 1.0;
  RandomStream rng(1, "pairs");
  for (int i = 0; i < 100; ++i) {
    const auto p = synthetic_pair(same, rng);
    CHECK(mean_rejection(p.x, p.y) < 1e-12);
  }

  SyntheticPairConfig apart;
  apart.coupling = 0.0;
  apart.dirichlet_alpha = 0.1;
  apart.vocab_size = 32000;
  const SyntheticPairGenerator gen(apart);
  double s = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = gen.generate(rng);
    s += mean_rejection(p.x, p.y);
  }
  // Reference mean and spread of TV between independent draws at these
  // settings; near-disjoint, but the expectation sits just under 0.9.
  CHECK(s / 1000.0 > 0.85);
  CHECK(std::abs(s / 1000.0 - oracle::kTvDirichlet01V32000) <=
        4.0 * oracle::kTvDirichlet01V32000Sd / std::sqrt(1000.0));
}

TEST_CASE("planted rejection mean is met") {
  SyntheticPairConfig cfg;
  cfg.planted_rejection_mean = 0.301;
  const SyntheticPairGenerator gen(cfg);
  RandomStream rng(2, "planted");
  double s = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto p = gen.generate(rng);
    s += mean_rejection(p.x, p.y);
  }
  CHECK(s / n >= 0.286);
  CHECK(s / n <= 0.316);
}

TEST_CASE("synthetic eos placement") {
  SyntheticPairConfig cfg;
  cfg.eos_at_round = 2;
  const auto pair = make_synthetic_pair(cfg);
  const auto eos = pair.vocab().eos();
  const auto early = softmax(pair.slm->next_logits({}));
  CHECK(early[eos] < 1e-200);
  const auto at = softmax(pair.llm->next_logits({TokenId{0}, TokenId{1}}));
  CHECK(at[eos] == doctest::Approx(1.0));
}

TEST_CASE("ngram unseen context is uniform") {
  NGramModel m(2, Vocabulary(256, TokenId{0}), 1e-4);
  m.train(tokenize_bytes("hello world"));
  const auto p = m.distribution(tokenize_bytes("zq"));
  for (double v : p.probs()) CHECK(v == doctest::Approx(1.0 / 256));
}

TEST_CASE("ngram order one on abab") {
  std::string text;
  for (int i = 0; i < 500; ++i) text += "ab";
  NGramModel m(1, Vocabulary(256, TokenId{0}), 1e-4);
  m.train(tokenize_bytes(text));
  const auto p = m.distribution(tokenize_bytes("a"));
  CHECK(p['b'] >= 0.99);
}

TEST_CASE("ngram single-byte corpus") {
  const std::string path = temp_file("single.txt", std::string(2000, 'x'));
  NGramPairConfig cfg;
  cfg.corpus_path = path;
  const auto pair = train_ngram(cfg);
  const double floor = 1.0 - 255 * 1e-4;
  for (const auto& ctx : {std::string(""), std::string("x"), std::string("xxx")}) {
    CHECK(softmax(pair.slm->next_logits(tokenize_bytes(ctx)))['x'] >= floor);
    CHECK(softmax(pair.llm->next_logits(tokenize_bytes(ctx)))['x'] >= floor);
  }
}

TEST_CASE("ngram config validation") {
  NGramPairConfig cfg;
  cfg.order_slm = 3;
  cfg.order_llm = 3;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.order_slm = 1;
  cfg.eos_id = 300;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("ngram save and load round trip") {
  NGramModel m(2, Vocabulary(256, TokenId{0}), 1e-4);
  m.train(tokenize_bytes("the cat sat on the mat"));
  const auto path = (fs::temp_directory_path() / "uhlm_test_model.ngram").string();
  m.save(path);
  const auto back = NGramModel::load(path);
  CHECK(back.order() == 2);
  CHECK(back.context_count() == m.context_count());
  const auto h = tokenize_bytes("th");
  CHECK(back.distribution(h) == m.distribution(h));
  const auto bad = temp_file("bad.ngram", "not a model\n{}");
  CHECK_THROWS_AS(NGramModel::load(bad), Error);
}

TEST_CASE("ngram pair on the test corpus disagrees") {
  NGramPairConfig cfg;
  cfg.corpus_path = UHLM_TEST_DATA "/corpus.txt";
  const auto pair = train_ngram(cfg);
  EngineConfig e;
  e.method = Method::HLM;
  e.r_max = 1000;
  e.stop_on_eos = false;
  e.seed = 3;
  e.prompt = tokenize_bytes("The ");
  const auto gen = run_generation(e, pair);
  REQUIRE(gen.records.size() == 1000);
  REQUIRE(gen.summary.mean_beta.has_value());
  CHECK(*gen.summary.mean_beta > 0.0);
}

TEST_CASE("external backend over stdio") {
  const auto pair = external_backend(stub_endpoint("uniform"));
  CHECK(pair.vocab().size() == 8);
  for (const auto& seq : {TokenSequence{TokenId{1}}, TokenSequence{TokenId{3}, TokenId{4}}}) {
    const auto p = softmax(pair.slm->next_logits(seq));
    for (double v : p.probs()) CHECK(v == doctest::Approx(0.125));
  }
}

TEST_CASE("external backend failures") {
  SUBCASE("wrong length") {
    const auto pair = external_backend(stub_endpoint("wrong-length"));
    CHECK_THROWS_WITH_AS(pair.llm->next_logits({TokenId{1}}),
                         doctest::Contains("logit-length mismatch"), Error);
  }
  SUBCASE("error frame") {
    const auto pair = external_backend(stub_endpoint("error"));
    CHECK_THROWS_WITH_AS(pair.llm->next_logits({TokenId{1}}), doctest::Contains("stub refuses"),
                         Error);
  }
  SUBCASE("process exits") {
    const auto pair = external_backend(stub_endpoint("exit-after", 8, 1));
    CHECK_NOTHROW(pair.slm->next_logits({TokenId{1}}));
    CHECK_THROWS_AS(pair.slm->next_logits({TokenId{1}}), Error);
  }
  SUBCASE("process hangs") {
    auto ep = stub_endpoint("hang-after", 8, 1);
    ep.timeout = std::chrono::milliseconds(300);
    const auto pair = external_backend(ep);
    CHECK_NOTHROW(pair.slm->next_logits({TokenId{1}}));
    CHECK_THROWS_WITH_AS(pair.slm->next_logits({TokenId{1}}), doctest::Contains("timeout"), Error);
  }
  SUBCASE("missing executable") {
    ExternalEndpoint ep;
    ep.command = {"/nonexistent/uhlm-stub"};
    ep.timeout = std::chrono::milliseconds(500);
    CHECK_THROWS_AS(external_backend(ep), Error);
  }
}

TEST_CASE("engine aborts with a diagnostic when the backend hangs") {
  auto ep = stub_endpoint("hang-after", 8, 5);
  ep.timeout = std::chrono::milliseconds(300);
  const auto pair = external_backend(ep);
  EngineConfig e;
  e.method = Method::HLM;
  e.r_max = 50;
  e.prompt = {TokenId{1}};
  const auto path = (fs::temp_directory_path() / "uhlm_test_abort.jsonl").string();
  {
    TraceWriter w(path, nlohmann::json{{"test", true}});
    const RoundSink sink = w.sink();
    CHECK_THROWS_WITH_AS(run_generation(e, pair, &sink), doctest::Contains("timeout"), Error);
  }
  const auto trace = read_trace(path);
  REQUIRE(trace.diagnostic.has_value());
  CHECK((*trace.diagnostic)["status"] == "aborted");
  CHECK(trace.records.size() == 2);  // two HLM rounds use four replies
  CHECK((*trace.diagnostic)["rounds_completed"] == 2);
}

TEST_CASE("external backend over tcp") {
  const int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(lfd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  REQUIRE(::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  REQUIRE(::listen(lfd, 1) == 0);
  socklen_t len = sizeof addr;
  ::getsockname(lfd, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);

  std::thread server([lfd] {
    const int fd = ::accept(lfd, nullptr, nullptr);
    stub::Options o;
    o.mode = stub::Mode::Peaked;
    o.vocab = 16;
    stub::serve(fd, fd, o);
    ::close(fd);
  });

  {
    ExternalEndpoint ep;
    ep.address = "127.0.0.1:" + std::to_string(port);
    ep.timeout = std::chrono::milliseconds(2000);
    const auto pair = external_backend(ep);
    CHECK(pair.vocab().size() == 16);
    const TokenSequence seq{TokenId{2}};
    CHECK(pair.llm->next_logits(seq) == pair.llm->next_logits(seq));
    CHECK_FALSE(pair.llm->next_logits(seq) == pair.slm->next_logits(seq));
  }
  server.join();
  ::close(lfd);
}

TEST_CASE("endpoint needs exactly one target") {
  ExternalEndpoint ep;
  CHECK_THROWS_AS(external_backend(ep), Error);
}
