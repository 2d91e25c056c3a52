//
// Copyright 2026 The viewfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef VIEWFL_EXPERIMENT_REPORT_HPP_
#define VIEWFL_EXPERIMENT_REPORT_HPP_

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "viewfl/client/events.hpp"
#include "viewfl/experiment/experiment.hpp"
#include "viewfl/model/network.hpp"
#include "viewfl/model/serialize.hpp"
#include "viewfl/preprocess/preprocess.hpp"
#include "viewfl/server/protocol.hpp"

namespace viewfl::experiment {

namespace fs = std::filesystem;

using CsvRow = std::map<std::string, std::string>;

inline std::vector<CsvRow> ReadCsv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  const auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  };
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty csv " + path.string());
  const auto header = split(line);
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    CsvRow row;
    for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = i < cells.size() ? cells[i] : "";
    rows.push_back(std::move(row));
  }
  return rows;
}

inline double CellNumber(const CsvRow& row, const std::string& key) {
  const auto it = row.find(key);
  if (it == row.end() || it->second.empty()) return NAN;
  return std::stod(it->second);
}

struct ReportResult {
  std::vector<std::string> warnings;
  std::vector<fs::path> files;
  std::size_t runs = 0;
};

// Reads run directories (the given one and its immediate subdirectories)
// and writes convergence.csv, communication.csv and runs.csv to `out_dir`.
// Problems with individual runs become warnings; a directory without any
// run artifacts is an error.
inline ReportResult Report(const fs::path& run_dir, fs::path out_dir = {}) {
  if (!fs::is_directory(run_dir)) throw FormatError("run directory " + run_dir.string() + " not found");
  if (out_dir.empty()) out_dir = run_dir;
  std::vector<fs::path> candidates{run_dir};
  for (const auto& e : fs::directory_iterator(run_dir)) {
    if (e.is_directory()) candidates.push_back(e.path());
  }
  std::sort(candidates.begin() + 1, candidates.end());

  ReportResult result;
  std::ostringstream conv, comm, runs;
  conv << "run,seed,round,val_loss,val_auc,test_auc,cum_bytes\n";
  comm << "run,seed,rounds,round_trips,total_bytes,bytes_per_round_trip,param_count,"
          "raw_round_trip_bytes,ratio\n";
  runs << "run,mode,dp_enabled,epsilon,n_seeds,rounds_mean,test_loss_mean,test_auc_mean,"
          "test_auc_std,total_mb_mean,mb_per_round_trip\n";

  for (const auto& dir : candidates) {
    const bool has_summary = fs::exists(dir / "summary.json");
    const bool has_csv = fs::exists(dir / "summary.csv");
    if (!has_summary && !has_csv) continue;
    const std::string name = dir == run_dir ? "." : dir.filename().string();
    if (!has_summary || !has_csv) {
      result.warnings.push_back(name + ": incomplete run (summary.json or summary.csv missing)");
    }
    ++result.runs;
    std::vector<CsvRow> summary_rows;
    if (has_csv) {
      try {
        summary_rows = ReadCsv(dir / "summary.csv");
      } catch (const std::exception& e) {
        result.warnings.push_back(name + ": " + e.what());
      }
    }
    for (const auto& row : summary_rows) {
      const std::string seed = row.at("seed");
      const double p = CellNumber(row, "param_count");
      const double raw = 2.0 * 4.0 * p;
      const double bprt = CellNumber(row, "bytes_per_round_trip");
      const double total = CellNumber(row, "bytes_down") + CellNumber(row, "bytes_up");
      comm << name << ',' << seed << ',' << row.at("rounds") << ',' << row.at("round_trips") << ','
           << Num(total) << ',' << Num(bprt) << ',' << Num(p) << ',' << Num(raw) << ','
           << Num(bprt > 0 ? bprt / raw : NAN) << '\n';
      const auto trace = dir / ("seed_" + seed + ".csv");
      if (!fs::exists(trace)) {
        result.warnings.push_back(name + ": missing " + trace.filename().string());
        continue;
      }
      double cum = 0.0;
      for (const auto& t : ReadCsv(trace)) {
        cum += CellNumber(t, "bytes_down") + CellNumber(t, "bytes_up");
        conv << name << ',' << seed << ',' << t.at("round") << ',' << t.at("val_loss") << ','
             << t.at("val_auc") << ',' << t.at("test_auc") << ',' << Num(cum) << '\n';
      }
    }
    if (has_summary) {
      try {
        std::ifstream in(dir / "summary.json");
        const auto j = json::parse(in);
        const auto& c = j.at("config");
        const bool dp = c.at("dp").at("enabled").get<bool>();
        runs << name << ',' << c.at("mode").get<std::string>() << ',' << (dp ? 1 : 0) << ','
             << (dp ? Num(c.at("dp").at("epsilon").get<double>()) : "") << ','
             << j.at("n_seeds").get<std::size_t>() << ',' << Num(j.at("rounds_mean").get<double>())
             << ',' << Num(j.at("test_loss_mean").get<double>()) << ','
             << Num(j.at("test_auc_mean").get<double>()) << ','
             << Num(j.at("test_auc_std").get<double>()) << ','
             << Num(j.at("total_mb_mean").get<double>()) << ','
             << Num(j.at("bytes_per_round_trip_mean").get<double>() / 1e6) << '\n';
      } catch (const std::exception& e) {
        result.warnings.push_back(name + ": bad summary.json: " + e.what());
      }
    }
  }
  if (result.runs == 0) throw FormatError("no run artifacts under " + run_dir.string());

  fs::create_directories(out_dir);
  const auto write = [&](const char* file, const std::string& text) {
    std::ofstream(out_dir / file, std::ios::trunc) << text;
    result.files.push_back(out_dir / file);
  };
  write("convergence.csv", conv.str());
  write("communication.csv", comm.str());
  write("runs.csv", runs.str());
  return result;
}

// ---- Golden vectors ---------------------------------------------------------

struct GoldenConfig {
  std::size_t n_records = 100;
  std::uint64_t seed = 20240601;
  std::string preset = "desk";
  double sgd_lr = 0.01;
};

// Randomized raw records covering present, absent, out-of-range and
// wrong-typed values for every registry feature.
inline std::vector<preprocess::RawRecord> GoldenRecords(const preprocess::FeatureRegistry& reg,
                                                        std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  static const char* kWords[] = {"", "a", "chrome", "Mozilla/5.0 (android) chrome/118", "news",
                                 "/sports/article-7", "adplacementTop", "300x250", "ü-ñ-漢字",
                                 "prebid"};
  std::vector<preprocess::RawRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    preprocess::RawRecord r;
    for (const auto& spec : reg.specs()) {
      const double roll = u01(rng);
      if (i == 0 || roll < 0.15) continue;  // record 0 is empty
      if (roll < 0.22) {
        // wrong type for the kind
        if (spec.kind == preprocess::FeatureKind::kCategorical) r[spec.name] = 3.0;
        else r[spec.name] = std::string("oops");
        continue;
      }
      switch (spec.kind) {
        case preprocess::FeatureKind::kBinary:
          if (u01(rng) < 0.5) r[spec.name] = u01(rng) < 0.5;
          else r[spec.name] = u01(rng) < 0.5 ? 1.0 : (u01(rng) < 0.8 ? 0.0 : 0.5);
          break;
        case preprocess::FeatureKind::kNumerical: {
          const double lo = *spec.min, hi = *spec.max;
          r[spec.name] = std::round((lo - 0.1 * (hi - lo) + u01(rng) * 1.2 * (hi - lo)) * 1000.0) / 1000.0;
          break;
        }
        case preprocess::FeatureKind::kCategorical: {
          std::string v = kWords[rng() % std::size(kWords)];
          if (u01(rng) < 0.5) v += "-" + std::to_string(rng() % 1000);
          r[spec.name] = v;
          break;
        }
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<fs::path> WriteGolden(const fs::path& dir, const GoldenConfig& cfg = {}) {
  fs::create_directories(dir);
  auto mcfg = model::ModelConfig::Preset(cfg.preset);
  mcfg.seed = cfg.seed;
  const auto reg = preprocess::DefaultRegistry(mcfg.hash_buckets);
  reg.CheckBinding(mcfg);
  const auto records = GoldenRecords(reg, cfg.n_records, cfg.seed);
  const auto params = model::InitParams(mcfg);
  std::vector<fs::path> files;
  const auto open = [&](const char* name) {
    files.push_back(dir / name);
    return std::ofstream(dir / name, std::ios::trunc);
  };

  open("registry.txt") << reg.Render();

  std::vector<Sample> samples;
  {
    auto rec_out = open("golden_records.jsonl");
    auto pre_out = open("golden_preprocess.jsonl");
    for (std::size_t i = 0; i < records.size(); ++i) {
      nlohmann::ordered_json r;
      r["id"] = i;
      r["record"] = client::RawToJson(records[i]);
      rec_out << r.dump() << '\n';
      const auto v = preprocess::PreprocessRecord(records[i], reg);
      nlohmann::ordered_json p;
      p["id"] = i;
      p["binary"] = v.binary;
      p["numerical"] = v.numerical;
      p["categorical"] = v.categorical;
      p["anomalies"] = v.anomalies;
      pre_out << p.dump() << '\n';
      Sample s;
      s.binary = v.binary;
      s.numerical = v.numerical;
      s.categorical = v.categorical;
      s.registry_hash = v.registry_hash;
      s.ad_id = "golden-" + std::to_string(i);
      s.label_viewable = static_cast<std::uint8_t>(i % 2);
      samples.push_back(std::move(s));
    }
  }

  open("golden_model.json") << server::EncodeModelMessage(
      server::MakeTag(0, mcfg.Hash()), 0, server::ServerStatus::kCollecting, params);

  {
    auto inf = open("golden_inference.jsonl");
    const auto probs = model::Forward(params, samples);
    const auto probs64 = model::Forward(params.Cast<double>(), samples);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      nlohmann::ordered_json j;
      j["id"] = i;
      j["probability"] = probs[i];
      j["probability_f64"] = probs64[i];
      inf << j.dump() << '\n';
    }
  }

  {
    // One plain SGD step on golden sample 1 (label 1), computed in double.
    const std::size_t sample_id = std::min<std::size_t>(1, samples.size() - 1);
    const Sample& s = samples.at(sample_id);
    auto p64 = params.Cast<double>();
    const auto g = model::Backward<double>(p64, std::span<const Sample>(&s, 1));
    model::ZipApply(p64, g.grads, [&](double& w, double d) { w -= cfg.sgd_lr * d; });
    const auto stepped = p64.Cast<float>();
    nlohmann::json j{{"sample_id", sample_id},
                     {"label", s.label_viewable},
                     {"lr", cfg.sgd_lr},
                     {"loss_before", g.loss},
                     {"config", model::ConfigToJson(mcfg)}};
    model::WriteLayers(stepped, j);
    open("golden_sgd_step.json") << j.dump();
  }

  nlohmann::ordered_json index;
  index["registry_hash"] = Hex16(reg.hash());
  index["config_hash"] = Hex16(mcfg.Hash());
  index["preset"] = cfg.preset;
  index["n_records"] = records.size();
  index["sgd_lr"] = cfg.sgd_lr;
  index["files"] = {"registry.txt", "golden_records.jsonl", "golden_preprocess.jsonl",
                    "golden_model.json", "golden_inference.jsonl", "golden_sgd_step.json"};
  open("golden_index.json") << index.dump(2) << '\n';
  return files;
}

}  // namespace viewfl::experiment

#endif  // VIEWFL_EXPERIMENT_REPORT_HPP_
