#include "uhlm/driver.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "uhlm/error.hpp"
#include "uhlm/external_backend.hpp"
#include "uhlm/ngram_backend.hpp"
#include "uhlm/random_stream.hpp"
#include "uhlm/synthetic_backend.hpp"
#include "uhlm/trace_io.hpp"

namespace uhlm {

namespace fs = std::filesystem;

namespace {

fs::path output_path(const RunConfigFile& cfg, const std::string& name) {
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw config_error("cannot create output directory " + cfg.out_dir + ": " + ec.message());
  return dir / name;
}

std::ofstream open_output(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw config_error("cannot write " + p.string());
  return out;
}

std::string csv_u64(std::uint64_t v) { return std::to_string(v); }

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::string summary_fields(const RunSummary& s) {
  std::string out;
  out += std::to_string(s.tokens_generated) + ",";
  out += csv_number(s.total_time_s) + ",";
  out += csv_number(s.throughput_tok_per_s) + ",";
  out += csv_number(s.TR) + ",";
  out += csv_number(s.TSR) + ",";
  out += csv_number(s.mean_beta) + ",";
  out += csv_number(s.realized_risk) + ",";
  out += csv_number(s.fidelity_tv);
  return out;
}

std::string error_status(const std::exception& e) {
  if (const auto* ue = dynamic_cast<const Error*>(&e)) {
    switch (ue->kind()) {
      case ErrorKind::Config: return "config_error";
      case ErrorKind::Backend: return "backend_error";
      case ErrorKind::Numerical: return "numerical_error";
    }
  }
  return "error";
}

unsigned job_count(const RunConfigFile& cfg, std::size_t cells) {
  unsigned jobs = cfg.jobs ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(cells, 1)));
}

/// Engine settings for a method, resolving its method-specific parameter.
EngineConfig configure_method(const RunConfigFile& cfg, const BackendFactory& factory,
                              EngineConfig ecfg, Method method,
                              std::optional<double> u_th) {
  ecfg.method = method;
  if (method == Method::UHLM) ecfg.u_th = u_th ? *u_th : resolve_u_th(cfg);
  if (method == Method::RandHLM) ecfg.rand_skip_prob = resolve_rand_skip_prob(cfg, factory, ecfg);
  ecfg.validate();
  return ecfg;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  return RandomStream(base, "seed-mix").derive(salt).next_u64();
}

BackendFactory::BackendFactory(BackendConfig cfg) : cfg_(std::move(cfg)) {
  switch (cfg_.kind) {
    case BackendKind::Synthetic:
      break;
    case BackendKind::NGram:
      corpus_ = read_corpus(cfg_.ngram.corpus_path);
      shared_ = train_ngram(cfg_.ngram, corpus_);
      break;
    case BackendKind::External:
      shared_ = external_backend(cfg_.external);
      break;
  }
}

BackendPair BackendFactory::pair_for_seed(std::uint64_t run_seed) const {
  if (shared_) return *shared_;
  SyntheticPairConfig sc = cfg_.synthetic;
  sc.seed = mix_seed(sc.seed, run_seed);
  return make_synthetic_pair(sc);
}

TokenSequence BackendFactory::prompt_for_seed(std::uint64_t run_seed, std::size_t len) const {
  if (len == 0 || corpus_.empty()) return {};
  len = std::min(len, corpus_.size());
  RandomStream rng(run_seed, "prompt");
  const std::size_t start =
      static_cast<std::size_t>(rng.next_u64() % (corpus_.size() - len + 1));
  TokenSequence prompt(corpus_.begin() + static_cast<std::ptrdiff_t>(start),
                       corpus_.begin() + static_cast<std::ptrdiff_t>(start + len));
  // The EOS byte inside a prompt would read as an already finished sequence.
  for (auto& tok : prompt) {
    if (tok.index == cfg_.ngram.eos_id) tok.index = ' ';
  }
  return prompt;
}

EngineConfig engine_for_seed(const RunConfigFile& cfg, const BackendFactory& factory,
                             std::uint64_t seed) {
  EngineConfig e = cfg.engine;
  e.seed = seed;
  if (e.prompt.empty()) e.prompt = factory.prompt_for_seed(seed, cfg.prompt_len);
  return e;
}

std::vector<CalibrationSample> collect_calibration_samples(const RunConfigFile& cfg,
                                                           const BackendFactory& factory,
                                                           std::size_t rounds) {
  std::vector<CalibrationSample> samples;
  samples.reserve(rounds);
  // A generation that emits nothing new would loop forever; cap restarts.
  std::size_t stalled = 0;
  for (std::uint64_t restart = 0; samples.size() < rounds; ++restart) {
    const std::uint64_t seed = restart == 0 ? cfg.engine.seed : mix_seed(cfg.engine.seed, restart);
    EngineConfig e = engine_for_seed(cfg, factory, seed);
    e.method = Method::HLM;
    e.oracle_mode = true;
    e.always_measure_uncertainty = true;
    e.r_max = rounds - samples.size();
    const BackendPair pair = factory.pair_for_seed(seed);
    const GenerationResult gen = run_generation(e, pair);
    const std::size_t before = samples.size();
    for (const RoundRecord& r : gen.records) {
      if (!r.outcome || !r.u || !r.x_d || !r.y_d) continue;
      samples.push_back({*r.u, r.outcome->beta, *r.x_d, *r.y_d});
    }
    stalled = samples.size() == before ? stalled + 1 : 0;
    if (stalled >= 16) {
      throw backend_error("calibration stalled: generations produce no transmitted rounds");
    }
  }
  return samples;
}

CalibrateResult cmd_calibrate(const RunConfigFile& cfg) {
  const BackendFactory factory(cfg.backend);
  const auto samples = collect_calibration_samples(cfg, factory, cfg.calibration_rounds);
  CalibrationModel model = CalibrationModel::fit(samples);

  nlohmann::json doc = model.to_json();
  doc["samples"] = samples.size();
  doc["config_hash"] = config_hash(cfg);
  doc["version"] = kCodeVersion;

  const fs::path path = output_path(cfg, "calibration.json");
  std::ofstream out = open_output(path);
  out << doc.dump(2) << "\n";
  if (!out) throw config_error("failed writing " + path.string());
  return {std::move(model), samples.size(), path.string()};
}

double resolve_u_th(const RunConfigFile& cfg) {
  if (cfg.u_th) return *cfg.u_th;
  if (!cfg.calibration_path) {
    throw config_error(
        "calibration required: method u-hlm needs u_th or a calibration file "
        "(run `uhlm calibrate` and pass --calibration)");
  }
  const CalibrationModel m = CalibrationModel::load(*cfg.calibration_path);
  return cfg.threshold == ThresholdChoice::Prone ? m.u_th_prone() : m.u_th_averse();
}

double resolve_rand_skip_prob(const RunConfigFile& cfg, const BackendFactory& factory,
                              const EngineConfig& ecfg) {
  if (!cfg.rand_skip_matched) return ecfg.rand_skip_prob;
  EngineConfig u = ecfg;
  u.method = Method::UHLM;
  u.u_th = resolve_u_th(cfg);
  u.oracle_mode = false;
  return run_generation(u, factory.pair_for_seed(ecfg.seed)).summary.skip_rate;
}

std::string summary_csv_header() {
  return "method,seed,snr_mean_db,u_th,tokens,total_time_s,throughput,TR,TSR,mean_beta,"
         "realized_risk,fidelity_tv";
}

std::string summary_csv_row(const RunRow& row) {
  return std::string(to_string(row.method)) + "," + csv_u64(row.seed) + "," +
         csv_number(row.snr_mean_db) + "," + csv_number(row.u_th) + "," +
         summary_fields(row.summary);
}

std::string sweep_csv_header() {
  return "method,seed,rho_m,p_dbm,snr_mean_db,u_th,tokens,total_time_s,throughput,TR,TSR,"
         "mean_beta,realized_risk,fidelity_tv,status,error";
}

std::string sweep_csv_row(const SweepRow& row) {
  std::string out = std::string(to_string(row.method)) + "," + csv_u64(row.seed) + "," +
                    csv_number(row.rho_m) + "," + csv_number(row.p_dbm) + "," +
                    csv_number(row.snr_mean_db) + "," + csv_number(row.u_th) + ",";
  out += row.summary ? summary_fields(*row.summary) : std::string(",,,,,,,");
  return out + "," + row.status + "," + csv_escape(row.error);
}

RunResult cmd_run(const RunConfigFile& cfg) {
  const std::string hash = config_hash(cfg);
  const nlohmann::json resolved = resolved_json(cfg);
  if (cfg.engine.method == Method::UHLM) resolve_u_th(cfg);  // fail before any output
  const BackendFactory factory(cfg.backend);

  RunResult result;
  for (std::uint64_t seed : cfg.run_seeds()) {
    const EngineConfig e = configure_method(cfg, factory, engine_for_seed(cfg, factory, seed),
                                            cfg.engine.method, cfg.u_th);
    const std::string name = "trace_" + std::string(to_string(e.method)) + "_seed" +
                             std::to_string(seed) + ".jsonl";
    const fs::path path = output_path(cfg, name);
    nlohmann::json header = {{"version", kCodeVersion},
                             {"config_hash", hash},
                             {"config", resolved},
                             {"seed", seed},
                             {"method", std::string(to_string(e.method))}};
    if (e.method == Method::UHLM) header["u_th"] = e.u_th;
    if (e.method == Method::RandHLM) header["rand_skip_prob"] = e.rand_skip_prob;

    TraceWriter writer(path.string(), header);
    const RoundSink sink = writer.sink();
    const GenerationResult gen = run_generation(e, factory.pair_for_seed(seed), &sink);

    nlohmann::json summary_doc = header;
    summary_doc.erase("config");
    summary_doc["summary"] = to_json(gen.summary);
    const fs::path summary_path = output_path(
        cfg, "summary_" + std::string(to_string(e.method)) + "_seed" + std::to_string(seed) +
                 ".json");
    std::ofstream summary_out = open_output(summary_path);
    summary_out << summary_doc.dump(2) << "\n";
    if (!summary_out) throw config_error("failed writing " + summary_path.string());

    RunRow row;
    row.method = e.method;
    row.seed = seed;
    row.snr_mean_db = mean_snr_db(e.channel);
    if (e.method == Method::UHLM) row.u_th = e.u_th;
    row.summary = gen.summary;
    result.rows.push_back(row);
    result.trace_paths.push_back(path.string());
  }

  const fs::path path = output_path(cfg, "summary.csv");
  std::ofstream out = open_output(path);
  out << "# " << kCodeVersion << " config_hash=" << hash << "\n" << summary_csv_header() << "\n";
  for (const RunRow& r : result.rows) out << summary_csv_row(r) << "\n";
  if (!out) throw config_error("failed writing " + path.string());
  result.summary_path = path.string();
  return result;
}

SweepResult cmd_sweep(const RunConfigFile& cfg) {
  const SweepAxes& ax = cfg.sweep;
  if (ax.empty()) {
    throw config_error("sweep needs at least one non-empty axis (sweep.u_th, sweep.rho_m or "
                       "sweep.p_dbm)");
  }
  const std::string hash = config_hash(cfg);
  const std::vector<Method> methods =
      ax.methods.empty() ? std::vector<Method>{cfg.engine.method} : ax.methods;
  const std::vector<double> rhos =
      ax.rho_m.empty() ? std::vector<double>{cfg.engine.channel.rho_m} : ax.rho_m;
  const std::vector<double> powers =
      ax.p_dbm.empty() ? std::vector<double>{cfg.engine.channel.p_dbm} : ax.p_dbm;

  std::vector<SweepRow> cells;
  for (Method m : methods) {
    std::vector<std::optional<double>> thresholds{std::nullopt};
    if (m == Method::UHLM) {
      thresholds.clear();
      if (ax.u_th.empty()) {
        thresholds.push_back(resolve_u_th(cfg));
      } else {
        for (double u : ax.u_th) thresholds.push_back(u);
      }
    }
    for (const auto& u : thresholds) {
      for (double rho : rhos) {
        for (double p : powers) {
          for (std::uint64_t seed : cfg.run_seeds()) {
            SweepRow row;
            row.method = m;
            row.seed = seed;
            row.rho_m = rho;
            row.p_dbm = p;
            row.u_th = u;
            cells.push_back(row);
          }
        }
      }
    }
  }

  const BackendFactory factory(cfg.backend);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      SweepRow& row = cells[i];
      try {
        EngineConfig e = engine_for_seed(cfg, factory, row.seed);
        e.channel.rho_m = row.rho_m;
        e.channel.p_dbm = row.p_dbm;
        row.snr_mean_db = mean_snr_db(e.channel);
        e = configure_method(cfg, factory, e, row.method, row.u_th);
        row.summary = run_generation(e, factory.pair_for_seed(row.seed)).summary;
      } catch (const std::exception& ex) {
        row.status = error_status(ex);
        row.error = ex.what();
      }
    }
  };
  const unsigned jobs = job_count(cfg, cells.size());
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const fs::path path = output_path(cfg, "sweep.csv");
  std::ofstream out = open_output(path);
  out << "# " << kCodeVersion << " config_hash=" << hash << "\n" << sweep_csv_header() << "\n";
  for (const SweepRow& r : cells) out << sweep_csv_row(r) << "\n";
  if (!out) throw config_error("failed writing " + path.string());
  return {std::move(cells), path.string()};
}

}  // namespace uhlm
