#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedkan/data.hpp"
#include "fedkan/error.hpp"
#include "fedkan/federation.hpp"
#include "fedkan/model.hpp"
#include "fedkan/report.hpp"

namespace fedkan {

namespace fs = std::filesystem;

struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t hours = 743;
  std::size_t beams = 4;
};

struct DataSection {
  std::size_t window = 5;
  double train_fraction = 0.8;
  std::vector<fs::path> files;
  std::optional<SyntheticSpec> synthetic;
};

// Experiment description loaded from a JSON document:
//
//   {
//     "seed": 42,
//     "output_dir": "runs/default",
//     "model":      { "kind": "fed_kan", ... },      // optional overrides
//     "federation": { "rounds": 20, ... },           // optional overrides
//     "data": { "window": 5, "train_fraction": 0.8,
//               "synthetic": { "seed": 7, "hours": 743, "beams": 4 } }
//               // or "files": ["beam_0.csv", ...]  (relative to the config)
//   }
struct RunConfig {
  ModelConfig model;
  FederationConfig federation;
  DataSection data;
  std::uint64_t seed = 42;
  fs::path output_dir = "fedkan_out";

  void validate() const {
    model.validate();
    federation.validate();
    if (data.window < 1) throw ConfigError("data.window must be >= 1");
    if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) {
      throw ConfigError("data.train_fraction must be in (0, 1)");
    }
    if (data.files.empty() == !data.synthetic.has_value()) {
      throw ConfigError("data: exactly one of 'files' or 'synthetic' must be given");
    }
    for (const auto& f : data.files) {
      if (!fs::exists(f)) throw ConfigError("data.files: '" + f.string() + "' does not exist");
    }
    if (data.synthetic) {
      if (data.synthetic->beams < 1) throw ConfigError("data.synthetic.beams must be >= 1");
      if (data.synthetic->hours < 1) throw ConfigError("data.synthetic.hours must be >= 1");
    }
    if (model.input_width != 2 * data.window) {
      throw ConfigError("model.input_width " + std::to_string(model.input_width) +
                        " must equal 2 * data.window = " + std::to_string(2 * data.window));
    }
  }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& section,
                           std::initializer_list<const char*> known) {
  if (!obj.is_object()) throw ConfigError(section + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(section + ": unknown field '" + key + "'");
  }
}

template <typename T>
void read_field(const json& obj, const char* key, const std::string& section, T& out) {
  if (!obj.contains(key)) return;
  const std::string field = section + "." + key;
  const json& v = obj.at(key);
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ConfigError(field + " must be a non-negative integer");
      }
    } else if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) throw ConfigError(field + " must be an integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(field + " must be a number");
    }
    out = v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& doc, const fs::path& base_dir = {}) {
  using detail::read_field;
  using detail::reject_unknown;
  RunConfig rc;
  reject_unknown(doc, "config", {"seed", "output_dir", "model", "federation", "data"});
  read_field(doc, "seed", "config", rc.seed);
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) throw ConfigError("config.output_dir must be a string");
    rc.output_dir = doc["output_dir"].get<std::string>();
    if (rc.output_dir.is_relative() && !base_dir.empty()) rc.output_dir = base_dir / rc.output_dir;
  }

  if (doc.contains("model")) {
    const auto& m = doc["model"];
    reject_unknown(m, "model",
                   {"kind", "input_width", "kan_hidden_widths", "mlp_hidden_widths", "fc_head_widths",
                    "output_width", "grid_intervals", "spline_order", "grid_min", "grid_max",
                    "dropout_p"});
    if (m.contains("kind")) {
      if (!m["kind"].is_string()) throw ConfigError("model.kind must be a string");
      rc.model.kind = parse_model_kind(m["kind"].get<std::string>());
    }
    read_field(m, "input_width", "model", rc.model.input_width);
    read_field(m, "kan_hidden_widths", "model", rc.model.kan_hidden_widths);
    read_field(m, "mlp_hidden_widths", "model", rc.model.mlp_hidden_widths);
    read_field(m, "fc_head_widths", "model", rc.model.fc_head_widths);
    read_field(m, "output_width", "model", rc.model.output_width);
    read_field(m, "grid_intervals", "model", rc.model.grid_intervals);
    read_field(m, "spline_order", "model", rc.model.spline_order);
    read_field(m, "grid_min", "model", rc.model.grid_min);
    read_field(m, "grid_max", "model", rc.model.grid_max);
    read_field(m, "dropout_p", "model", rc.model.dropout_p);
  }

  if (doc.contains("federation")) {
    const auto& f = doc["federation"];
    reject_unknown(f, "federation",
                   {"rounds", "local_epochs", "batch_size", "aggregation", "availability_prob",
                    "learning_rate", "weight_decay", "max_norm"});
    read_field(f, "rounds", "federation", rc.federation.rounds);
    read_field(f, "local_epochs", "federation", rc.federation.local_epochs);
    read_field(f, "batch_size", "federation", rc.federation.batch_size);
    if (f.contains("aggregation")) {
      if (!f["aggregation"].is_string()) throw ConfigError("federation.aggregation must be a string");
      rc.federation.aggregation = parse_aggregation(f["aggregation"].get<std::string>());
    }
    read_field(f, "availability_prob", "federation", rc.federation.availability_prob);
    read_field(f, "learning_rate", "federation", rc.federation.learning_rate);
    read_field(f, "weight_decay", "federation", rc.federation.weight_decay);
    read_field(f, "max_norm", "federation", rc.federation.max_norm);
  }

  if (!doc.contains("data")) throw ConfigError("config: missing 'data' section");
  const auto& d = doc["data"];
  reject_unknown(d, "data", {"window", "train_fraction", "files", "synthetic"});
  read_field(d, "window", "data", rc.data.window);
  read_field(d, "train_fraction", "data", rc.data.train_fraction);
  if (d.contains("files")) {
    if (!d["files"].is_array()) throw ConfigError("data.files must be an array of paths");
    for (const auto& p : d["files"]) {
      if (!p.is_string()) throw ConfigError("data.files entries must be strings");
      fs::path path = p.get<std::string>();
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      rc.data.files.push_back(path);
    }
  }
  if (d.contains("synthetic")) {
    const auto& s = d["synthetic"];
    reject_unknown(s, "data.synthetic", {"seed", "hours", "beams"});
    SyntheticSpec spec;
    spec.seed = rc.seed;
    read_field(s, "seed", "data.synthetic", spec.seed);
    read_field(s, "hours", "data.synthetic", spec.hours);
    read_field(s, "beams", "data.synthetic", spec.beams);
    rc.data.synthetic = spec;
  }
  // The input layer follows the window unless set explicitly.
  if (!(doc.contains("model") && doc["model"].contains("input_width"))) {
    rc.model.input_width = 2 * rc.data.window;
  }
  rc.federation.seed = rc.seed;
  rc.validate();
  return rc;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_run_config(doc, path.parent_path());
}

// Command-line values that take precedence over the config file.
struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> output_dir;
  std::optional<double> availability;
  bool parallel_clients = false;
};

inline void apply_overrides(RunConfig& rc, const CliOverrides& o) {
  if (o.seed) {
    rc.seed = *o.seed;
    rc.federation.seed = *o.seed;
  }
  if (o.output_dir) rc.output_dir = *o.output_dir;
  if (o.availability) rc.federation.availability_prob = *o.availability;
  rc.federation.parallel_clients = o.parallel_clients;
  rc.validate();
}

// Files are staged in memory and written only once the whole command has
// succeeded, each through a temporary file and a rename.
class PendingOutputs {
 public:
  void add(fs::path path, std::string contents) {
    files_.emplace_back(std::move(path), std::move(contents));
  }

  void commit() const {
    std::vector<fs::path> staged;
    try {
      for (const auto& [path, contents] : files_) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        fs::path tmp = path;
        tmp += ".tmp";
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        staged.push_back(tmp);
        out << contents;
        out.close();
        if (!out) throw IoError("failed writing '" + tmp.string() + "'");
      }
      for (std::size_t j = 0; j < files_.size(); ++j) fs::rename(staged[j], files_[j].first);
    } catch (const fs::filesystem_error& e) {
      for (const auto& t : staged) fs::remove(t);
      throw IoError(e.what());
    } catch (...) {
      std::error_code ec;
      for (const auto& t : staged) fs::remove(t, ec);
      throw;
    }
  }

  const std::vector<std::pair<fs::path, std::string>>& files() const { return files_; }

 private:
  std::vector<std::pair<fs::path, std::string>> files_;
};

inline std::uint64_t beam_seed(std::uint64_t seed, std::size_t beam) {
  return Rng{seed, static_cast<std::uint64_t>(beam), 0xbea3ULL}.next_u64();
}

inline std::vector<BeamSeries> synthetic_beams(const SyntheticSpec& spec) {
  std::vector<BeamSeries> beams;
  for (std::size_t b = 0; b < spec.beams; ++b) {
    beams.push_back(generate_synthetic(beam_seed(spec.seed, b), spec.hours,
                                       default_profile(static_cast<int>(b))));
  }
  return beams;
}

inline std::vector<ClientState> load_clients(const RunConfig& rc) {
  std::vector<BeamSeries> beams;
  if (rc.data.synthetic) {
    beams = synthetic_beams(*rc.data.synthetic);
  } else {
    for (const auto& f : rc.data.files) beams.push_back(load_csv(f));
  }
  std::vector<ClientState> clients;
  for (const auto& b : beams) {
    for (const auto& c : clients) {
      if (c.client_id == b.beam_id) throw ConfigError("duplicate beam id '" + b.beam_id + "'");
    }
    clients.push_back(prepare_client(b, rc.data.window, rc.data.train_fraction));
  }
  return clients;
}

// `generate`: n_beams synthetic CSVs named beam_<i>.csv.
inline std::vector<fs::path> cmd_generate(std::uint64_t seed, std::size_t hours, std::size_t n_beams,
                                          const fs::path& out_dir) {
  if (n_beams < 1) throw ConfigError("--beams must be >= 1");
  if (hours < 1) throw ConfigError("--hours must be >= 1");
  PendingOutputs outputs;
  std::vector<fs::path> paths;
  for (const auto& beam : synthetic_beams({seed, hours, n_beams})) {
    std::ostringstream os;
    write_csv(os, beam);
    paths.push_back(out_dir / (beam.beam_id + ".csv"));
    outputs.add(paths.back(), os.str());
  }
  outputs.commit();
  return paths;
}

inline std::string to_text(const CsvTable& t) {
  std::ostringstream os;
  write_table(os, t);
  return os.str();
}

// `train`: one configuration; writes report.csv and weights.txt.
inline ExperimentReport cmd_train(const RunConfig& rc, std::ostream& out,
                                  const RoundCallback& on_round = {}) {
  rc.validate();
  const auto clients = load_clients(rc);
  ExperimentReport rep = run_experiment(rc.model, rc.federation, clients, on_round);

  PendingOutputs outputs;
  outputs.add(rc.output_dir / "report.csv", to_text(experiment_table(rep)));
  std::ostringstream weights;
  write_parameters(weights, rep.final_weights, rc.model.hash());
  outputs.add(rc.output_dir / "weights.txt", weights.str());
  outputs.commit();

  out << "model=" << to_string(rc.model.kind) << " parameters=" << rep.parameter_count
      << " rounds=" << rep.rounds.size() << " final_avg_test_loss="
      << format_double(rep.final_avg_test_loss) << '\n';
  return rep;
}

struct Comparison {
  ExperimentReport kan;
  ExperimentReport mlp;
  double reduction_percent = 0.0;
};

// `compare`: Fed-KAN and Fed-MLP on the same clients and seed. Writes
// comparison.csv plus one experiment report per model.
inline Comparison cmd_compare(const RunConfig& rc, std::ostream& out,
                              const RoundCallback& on_round = {}) {
  rc.validate();
  const auto clients = load_clients(rc);
  ModelConfig kan_cfg = rc.model;
  kan_cfg.kind = ModelKind::fed_kan;
  ModelConfig mlp_cfg = rc.model;
  mlp_cfg.kind = ModelKind::fed_mlp;

  Comparison cmp;
  cmp.kan = run_experiment(kan_cfg, rc.federation, clients, on_round);
  cmp.mlp = run_experiment(mlp_cfg, rc.federation, clients, on_round);
  cmp.reduction_percent =
      test_loss_reduction_percent(cmp.kan.final_avg_test_loss, cmp.mlp.final_avg_test_loss);

  PendingOutputs outputs;
  outputs.add(rc.output_dir / "comparison.csv", to_text(comparison_table(cmp.kan, cmp.mlp)));
  outputs.add(rc.output_dir / "fed_kan_report.csv", to_text(experiment_table(cmp.kan)));
  outputs.add(rc.output_dir / "fed_mlp_report.csv", to_text(experiment_table(cmp.mlp)));
  outputs.commit();

  out << std::left << std::setw(10) << "Model" << std::setw(14) << "Parameters"
      << "Average Test Loss\n";
  out << std::setw(10) << "Fed-KAN" << std::setw(14) << cmp.kan.parameter_count
      << std::setprecision(6) << cmp.kan.final_avg_test_loss << '\n';
  out << std::setw(10) << "Fed-MLP" << std::setw(14) << cmp.mlp.parameter_count
      << cmp.mlp.final_avg_test_loss << '\n';
  out << "Fed-KAN average test loss reduction vs Fed-MLP: " << std::fixed << std::setprecision(2)
      << cmp.reduction_percent << "%\n";
  out.unsetf(std::ios::floatfield);
  return cmp;
}

}  // namespace fedkan
