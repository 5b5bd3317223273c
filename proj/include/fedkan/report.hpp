#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fedkan/error.hpp"
#include "fedkan/federation.hpp"
#include "fedkan/parameter_vector.hpp"

namespace fedkan {

inline constexpr const char* kVersion = "v0.1.0";

// Metadata lines are "# key=value"; the table follows as plain CSV.
struct CsvTable {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  const std::string& meta(const std::string& key) const {
    for (const auto& [k, v] : metadata)
      if (k == key) return v;
    throw IngestionError("report: missing metadata key '" + key + "'");
  }

  std::size_t column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    throw IngestionError("report: missing column '" + name + "'");
  }
};

inline void write_table(std::ostream& os, const CsvTable& t) {
  for (const auto& [k, v] : t.metadata) os << "# " << k << '=' << v << '\n';
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t j = 0; j < cells.size(); ++j) os << (j ? "," : "") << cells[j];
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
}

inline CsvTable read_table(std::istream& is) {
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header && line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;  // free-form comment
      t.metadata.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
    } else {
      if (cells.size() != t.header.size()) {
        throw IngestionError("report: row has " + std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(cells));
    }
  }
  if (!have_header) throw IngestionError("report: no table header");
  return t;
}

inline std::string join(const std::vector<std::string>& parts, char sep) {
  std::string s;
  for (std::size_t j = 0; j < parts.size(); ++j) s += (j ? std::string(1, sep) : "") + parts[j];
  return s;
}

// ---------------------------------------------------------------------------
// Experiment report:
//   round,avg_train_loss,avg_test_loss,<client>:test_loss...,participants
// ---------------------------------------------------------------------------

inline CsvTable experiment_table(const ExperimentReport& rep) {
  CsvTable t;
  t.metadata = {
      {"report", "experiment"},
      {"version", kVersion},
      {"model", rep.model_config.canonical()},
      {"parameters", std::to_string(rep.parameter_count)},
      {"federation", rep.fed_config.canonical()},
      {"seed", std::to_string(rep.fed_config.seed)},
      {"clients", join(rep.client_ids, ';')},
      {"dataset_digest", hex64(rep.dataset_digest)},
      {"final_avg_test_loss", format_double(rep.final_avg_test_loss)},
  };
  t.header = {"round", "avg_train_loss", "avg_test_loss"};
  for (const auto& id : rep.client_ids) t.header.push_back(id + ":test_loss");
  t.header.push_back("participants");
  for (const auto& r : rep.rounds) {
    std::vector<std::string> row{std::to_string(r.round_index), format_double(r.avg_train_loss),
                                 format_double(r.avg_test_loss)};
    for (const auto& id : rep.client_ids) row.push_back(format_double(r.per_client_test_loss.at(id)));
    row.push_back(join(r.participants, ';'));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_experiment_csv(std::ostream& os, const ExperimentReport& rep) {
  write_table(os, experiment_table(rep));
}

struct ExperimentTable {
  std::map<std::string, std::string> metadata;
  std::vector<std::string> client_ids;
  std::vector<RoundReport> rounds;
};

inline ExperimentTable read_experiment_csv(std::istream& is) {
  const CsvTable t = read_table(is);
  ExperimentTable out;
  for (const auto& [k, v] : t.metadata) out.metadata[k] = v;
  const std::string suffix = ":test_loss";
  for (const auto& h : t.header) {
    if (h.size() > suffix.size() && h.compare(h.size() - suffix.size(), suffix.size(), suffix) == 0) {
      out.client_ids.push_back(h.substr(0, h.size() - suffix.size()));
    }
  }
  const auto c_round = t.column("round");
  const auto c_train = t.column("avg_train_loss");
  const auto c_test = t.column("avg_test_loss");
  const auto c_part = t.column("participants");
  for (const auto& row : t.rows) {
    RoundReport r;
    r.round_index = std::stoull(row[c_round]);
    r.avg_train_loss = parse_double(row[c_train], "report avg_train_loss");
    r.avg_test_loss = parse_double(row[c_test], "report avg_test_loss");
    for (const auto& id : out.client_ids) {
      r.per_client_test_loss[id] = parse_double(row[t.column(id + suffix)], "report " + id);
    }
    std::stringstream ss(row[c_part]);
    std::string id;
    while (std::getline(ss, id, ';')) r.participants.push_back(id);
    out.rounds.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fed-KAN vs Fed-MLP comparison:
//   round,fed_kan_avg_train_loss,fed_mlp_avg_train_loss,
//         fed_kan_avg_test_loss,fed_mlp_avg_test_loss
// ---------------------------------------------------------------------------

// (1 - kan / mlp) * 100 on unrounded losses.
inline double test_loss_reduction_percent(double kan_loss, double mlp_loss) {
  return (1.0 - kan_loss / mlp_loss) * 100.0;
}

inline CsvTable comparison_table(const ExperimentReport& kan, const ExperimentReport& mlp) {
  if (kan.rounds.size() != mlp.rounds.size()) {
    throw ContractViolation("comparison: experiments ran different numbers of rounds");
  }
  CsvTable t;
  t.metadata = {
      {"report", "comparison"},
      {"version", kVersion},
      {"seed", std::to_string(kan.fed_config.seed)},
      {"federation", kan.fed_config.canonical()},
      {"fed_kan.model", kan.model_config.canonical()},
      {"fed_mlp.model", mlp.model_config.canonical()},
      {"fed_kan.parameters", std::to_string(kan.parameter_count)},
      {"fed_mlp.parameters", std::to_string(mlp.parameter_count)},
      {"fed_kan.dataset_digest", hex64(kan.dataset_digest)},
      {"fed_mlp.dataset_digest", hex64(mlp.dataset_digest)},
      {"fed_kan.final_avg_test_loss", format_double(kan.final_avg_test_loss)},
      {"fed_mlp.final_avg_test_loss", format_double(mlp.final_avg_test_loss)},
      {"test_loss_reduction_percent",
       format_double(test_loss_reduction_percent(kan.final_avg_test_loss, mlp.final_avg_test_loss))},
  };
  t.header = {"round", "fed_kan_avg_train_loss", "fed_mlp_avg_train_loss", "fed_kan_avg_test_loss",
              "fed_mlp_avg_test_loss"};
  for (std::size_t j = 0; j < kan.rounds.size(); ++j) {
    t.rows.push_back({std::to_string(kan.rounds[j].round_index),
                      format_double(kan.rounds[j].avg_train_loss),
                      format_double(mlp.rounds[j].avg_train_loss),
                      format_double(kan.rounds[j].avg_test_loss),
                      format_double(mlp.rounds[j].avg_test_loss)});
  }
  return t;
}

}  // namespace fedkan
