#include "uhlm/trace_io.hpp"

#include <charconv>
#include <cmath>

#include "uhlm/error.hpp"

namespace uhlm {

namespace {

using nlohmann::json;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// JSON has no infinity; the uplink sentinel is written as a string.
json time_value(double v) { return std::isfinite(v) ? json(v) : json("inf"); }

double time_from(const json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") return kInfiniteLatency;
  return j.get<double>();
}

json outcome_json(const std::optional<RecordedOutcome>& o) {
  if (!o) return nullptr;
  return {{"decision", std::string(to_string(o->decision))},
          {"response", o->response.index},
          {"beta", o->beta}};
}

std::optional<RecordedOutcome> outcome_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return RecordedOutcome{decision_from_string(j.at("decision").get<std::string>()),
                         TokenId{j.at("response").get<std::uint32_t>()},
                         j.at("beta").get<double>()};
}

std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

json to_json(const RoundRecord& r) {
  return {
      {"t", r.t},
      {"draft", r.draft ? json(r.draft->index) : json(nullptr)},
      {"u", opt(r.u)},
      {"delta", r.delta},
      {"outcome", outcome_json(r.outcome)},
      {"counterfactual_outcome", outcome_json(r.counterfactual_outcome)},
      {"x_d", opt(r.x_d)},
      {"y_d", opt(r.y_d)},
      {"tau_uplink_s", time_value(r.tau_uplink_s)},
      {"round_time_s", time_value(r.round_time_s)},
      {"response", r.response.index},
      {"snr_linear", opt(r.snr_linear)},
  };
}

RoundRecord round_record_from_json(const json& j) {
  RoundRecord r;
  r.t = j.at("t").get<std::size_t>();
  if (!j.at("draft").is_null()) r.draft = TokenId{j.at("draft").get<std::uint32_t>()};
  r.u = opt_from(j, "u");
  r.delta = j.at("delta").get<int>();
  r.outcome = outcome_from(j.at("outcome"));
  r.counterfactual_outcome = outcome_from(j.at("counterfactual_outcome"));
  r.x_d = opt_from(j, "x_d");
  r.y_d = opt_from(j, "y_d");
  r.tau_uplink_s = time_from(j.at("tau_uplink_s"));
  r.round_time_s = time_from(j.at("round_time_s"));
  r.response = TokenId{j.at("response").get<std::uint32_t>()};
  r.snr_linear = opt_from(j, "snr_linear");
  return r;
}

json to_json(const RunSummary& s) {
  return {
      {"tokens_generated", s.tokens_generated},
      {"total_time_s", time_value(s.total_time_s)},
      {"throughput_tok_per_s", s.throughput_tok_per_s},
      {"TR", s.TR},
      {"TSR", opt(s.TSR)},
      {"mean_beta", opt(s.mean_beta)},
      {"mean_u", opt(s.mean_u)},
      {"realized_risk", opt(s.realized_risk)},
      {"mean_skipped_beta", opt(s.mean_skipped_beta)},
      {"fidelity_tv", opt(s.fidelity_tv)},
      {"skip_rate", s.skip_rate},
  };
}

TraceWriter::TraceWriter(const std::string& path, const json& header) : out_(path) {
  if (!out_) throw config_error("cannot write trace " + path);
  out_ << json{{"header", header}}.dump() << '\n';
}

void TraceWriter::write(const RoundRecord& r) {
  out_ << to_json(r).dump() << '\n';
  ++written_;
}

void TraceWriter::abort(const std::string& message) {
  out_ << json{{"diagnostic",
                {{"status", "aborted"}, {"rounds_completed", written_}, {"error", message}}}}
              .dump()
       << '\n';
  out_.flush();
}

RoundSink TraceWriter::sink() {
  return {[this](const RoundRecord& r) { write(r); },
          [this](const std::string& m) { abort(m); }};
}

TraceFile read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read trace " + path);
  TraceFile tf;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (first) {
      tf.header = j.at("header");
      first = false;
    } else if (j.contains("diagnostic")) {
      tf.diagnostic = j.at("diagnostic");
    } else {
      tf.records.push_back(round_record_from_json(j));
    }
  }
  return tf;
}

std::string csv_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_number(const std::optional<double>& v) {
  return v ? csv_number(*v) : std::string();
}

}  // namespace uhlm
