#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uhlm/engine.hpp"

namespace uhlm {

nlohmann::json to_json(const RoundRecord& r);
RoundRecord round_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunSummary& s);

/// Newline-delimited JSON trace: a header line with the resolved config,
/// then one record per line. An aborted run ends with a diagnostic line.
class TraceWriter {
 public:
  TraceWriter(const std::string& path, const nlohmann::json& header);

  void write(const RoundRecord& r);
  void abort(const std::string& message);
  RoundSink sink();

 private:
  std::ofstream out_;
  std::size_t written_ = 0;
};

struct TraceFile {
  nlohmann::json header;
  std::vector<RoundRecord> records;
  std::optional<nlohmann::json> diagnostic;
};

TraceFile read_trace(const std::string& path);

/// Shortest round-trip decimal form; empty for absent values.
std::string csv_number(double v);
std::string csv_number(const std::optional<double>& v);

}  // namespace uhlm
