#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "fedkan/data.hpp"
#include "fedkan/error.hpp"
#include "fedkan/loss.hpp"
#include "fedkan/model.hpp"
#include "fedkan/optim.hpp"
#include "fedkan/parameter_vector.hpp"
#include "fedkan/random.hpp"

namespace fedkan {

enum class Aggregation { uniform, sample_weighted };

inline std::string to_string(Aggregation a) {
  return a == Aggregation::uniform ? "uniform" : "sample_weighted";
}

inline Aggregation parse_aggregation(const std::string& s) {
  if (s == "uniform") return Aggregation::uniform;
  if (s == "sample_weighted") return Aggregation::sample_weighted;
  throw ConfigError("federation.aggregation must be 'uniform' or 'sample_weighted', got '" + s + "'");
}

struct FederationConfig {
  std::size_t rounds = 20;
  std::size_t local_epochs = 5;
  std::size_t batch_size = 16;
  Aggregation aggregation = Aggregation::uniform;
  double availability_prob = 1.0;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  double max_norm = 1.0;
  bool parallel_clients = false;  // never changes results

  void validate() const {
    if (rounds < 1) throw ConfigError("federation.rounds must be >= 1");
    if (local_epochs < 1) throw ConfigError("federation.local_epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("federation.batch_size must be >= 1");
    if (!(availability_prob > 0.0 && availability_prob <= 1.0)) {
      throw ConfigError("federation.availability_prob must be in (0, 1]");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("federation.learning_rate must be a non-negative number");
    }
    if (!(weight_decay >= 0.0)) throw ConfigError("federation.weight_decay must be >= 0");
    if (!(max_norm > 0.0)) throw ConfigError("federation.max_norm must be > 0");
  }

  // Everything that affects results (parallel_clients does not).
  std::string canonical() const {
    return "rounds=" + std::to_string(rounds) + ";local_epochs=" + std::to_string(local_epochs) +
           ";batch_size=" + std::to_string(batch_size) + ";aggregation=" + to_string(aggregation) +
           ";availability=" + format_double(availability_prob) + ";lr=" +
           format_double(learning_rate) + ";weight_decay=" + format_double(weight_decay) +
           ";max_norm=" + format_double(max_norm) + ";seed=" + std::to_string(seed);
  }
};

// One beam acting as a client: its scaled train/test samples and the scaler
// fit on its own training split.
struct ClientState {
  std::string client_id;
  std::vector<WindowedSample> train;
  std::vector<WindowedSample> test;
  Scaler scaler;

  std::size_t sample_count() const { return train.size(); }
};

inline ClientState prepare_client(const BeamSeries& series, std::size_t window,
                                  double train_fraction) {
  auto split = chrono_split(make_windows(series, window), train_fraction);
  ClientState c;
  c.client_id = series.beam_id;
  c.scaler = fit_scaler(split.train);
  c.train = apply_scaler(c.scaler, std::move(split.train));
  c.test = apply_scaler(c.scaler, std::move(split.test));
  return c;
}

// Digest over every client's scaled samples; equal digests mean both models
// saw the same data in the same order.
inline std::uint64_t dataset_digest(const std::vector<ClientState>& clients) {
  Fnv1a h;
  for (const auto& c : clients) {
    h.update(c.client_id);
    for (const auto* part : {&c.train, &c.test}) {
      h.update(static_cast<std::uint64_t>(part->size()));
      for (const auto& s : *part) {
        for (double v : s.features) h.update(v);
        for (double v : s.target) h.update(v);
      }
    }
  }
  return h.digest();
}

struct ClientUpdate {
  std::string client_id;
  ParameterVector weights;
  std::size_t sample_count = 0;
  double local_train_loss = 0.0;  // mean MSE over the final local epoch
};

inline std::size_t batches_per_epoch(std::size_t samples, std::size_t batch_size) {
  return (samples + batch_size - 1) / batch_size;
}

// Loads the global weights, then runs local_epochs passes of chronological
// mini-batches: forward -> MSE -> backward -> clip -> Adam. The optimizer
// starts fresh every call.
inline ClientUpdate local_train(const ModelConfig& model_config, const ClientState& client,
                                const ParameterVector& global_weights,
                                const FederationConfig& cfg, std::size_t round_index) {
  cfg.validate();
  if (client.train.empty()) {
    throw ConfigError("client '" + client.client_id + "' has no training samples");
  }
  Model model = build_model(model_config, 0);
  model.import_weights(global_weights);
  model.set_mode(Mode::train);
  Rng rng{cfg.seed, static_cast<std::uint64_t>(round_index), fnv1a(client.client_id)};
  auto state = AdamState::for_size(global_weights.total_len(), cfg.learning_rate, cfg.weight_decay);

  const std::size_t n = client.train.size();
  double epoch_loss = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    double weighted = 0.0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const Batch batch = to_batch(client.train, begin, begin + cfg.batch_size);
      const Matrix pred = model.forward(batch.features, &rng);
      const LossResult loss = mse_loss(pred, batch.targets);
      if (!std::isfinite(loss.loss)) {
        throw NumericError("client '" + client.client_id + "': non-finite training loss in round " +
                           std::to_string(round_index));
      }
      const GradientBundle grads = clip_gradient_norm(model.backward(loss.grad), cfg.max_norm);
      ParameterVector params = model.export_weights();
      adam_step(params, model.gradient_vector(grads), state);
      model.import_weights(params);
      weighted += loss.loss * static_cast<double>(batch.features.rows);
    }
    epoch_loss = weighted / static_cast<double>(n);
  }
  return ClientUpdate{client.client_id, model.export_weights(), n, epoch_loss};
}

// Coordinate-wise (weighted) mean of the updates, summed in client-id order.
inline ParameterVector aggregate(const std::vector<ClientUpdate>& updates, Aggregation scheme) {
  if (updates.empty()) throw ContractViolation("aggregate: no updates");
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return updates[a].client_id < updates[b].client_id;
  });
  for (std::size_t j = 1; j < order.size(); ++j) {
    if (updates[order[j]].client_id == updates[order[j - 1]].client_id) {
      throw ContractViolation("aggregate: duplicate client id '" + updates[order[j]].client_id + "'");
    }
  }
  const ParameterVector& first = updates[order[0]].weights;
  for (const auto& u : updates) {
    first.require_same_layout(u.weights, ("aggregate (client '" + u.client_id + "')").c_str());
  }

  double total = 0.0;
  for (std::size_t j : order) {
    total += scheme == Aggregation::uniform ? 1.0 : static_cast<double>(updates[j].sample_count);
  }
  if (!(total > 0.0)) throw ContractViolation("aggregate: total sample count is zero");

  ParameterVector out = first;
  auto dst = out.values();
  std::fill(dst.begin(), dst.end(), 0.0);
  std::vector<double> lo(dst.size(), INFINITY), hi(dst.size(), -INFINITY);
  for (std::size_t j : order) {
    const double w =
        scheme == Aggregation::uniform ? 1.0 : static_cast<double>(updates[j].sample_count);
    auto src = updates[j].weights.values();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] += w * src[i];
      lo[i] = std::min(lo[i], src[i]);
      hi[i] = std::max(hi[i], src[i]);
    }
  }
  // Rounding in the sum can step an ulp outside the inputs' range.
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::clamp(dst[i] / total, lo[i], hi[i]);
  return out;
}

struct Evaluation {
  std::map<std::string, double> per_client_loss;
  double average = 0.0;
};

inline double evaluate_client(Model& model, const ClientState& client) {
  if (client.test.empty()) throw ConfigError("client '" + client.client_id + "' has no test samples");
  const Batch batch = to_batch(client.test);
  return mse_loss(model.forward(batch.features), batch.targets).loss;
}

// Eval-mode MSE of `weights` on every client's test set and the unweighted mean.
inline Evaluation evaluate_global(const ModelConfig& model_config, const ParameterVector& weights,
                                  const std::vector<ClientState>& clients) {
  if (clients.empty()) throw ContractViolation("evaluate_global: no clients");
  Model model = build_model(model_config, 0);
  model.import_weights(weights);
  model.set_mode(Mode::eval);
  Evaluation ev;
  double sum = 0.0;
  for (const auto& c : clients) {
    const double loss = evaluate_client(model, c);
    ev.per_client_loss[c.client_id] = loss;
    sum += loss;
  }
  ev.average = sum / static_cast<double>(clients.size());
  return ev;
}

struct RoundReport {
  std::size_t round_index = 0;
  std::vector<std::string> participants;
  double avg_train_loss = 0.0;
  std::map<std::string, double> per_client_test_loss;
  double avg_test_loss = 0.0;
};

struct RoundResult {
  ParameterVector weights;
  RoundReport report;
};

// Draws participation per client (redrawing until at least one client is
// available).
inline std::vector<std::size_t> sample_participants(std::size_t n_clients, double availability_prob,
                                                    Rng& rng) {
  std::vector<std::size_t> chosen;
  while (chosen.empty()) {
    for (std::size_t j = 0; j < n_clients; ++j) {
      if (rng.bernoulli(availability_prob)) chosen.push_back(j);
    }
  }
  return chosen;
}

inline RoundResult run_round(const ModelConfig& model_config, const ParameterVector& global_weights,
                             const std::vector<ClientState>& clients, const FederationConfig& cfg,
                             std::size_t round_index, Rng& rng) {
  if (clients.empty()) throw ContractViolation("run_round: no clients");
  const auto participants = sample_participants(clients.size(), cfg.availability_prob, rng);

  std::vector<ClientUpdate> updates(participants.size());
  if (cfg.parallel_clients && participants.size() > 1) {
    std::vector<std::future<ClientUpdate>> jobs;
    for (std::size_t j : participants) {
      jobs.push_back(std::async(std::launch::async, [&, j] {
        return local_train(model_config, clients[j], global_weights, cfg, round_index);
      }));
    }
    for (std::size_t j = 0; j < jobs.size(); ++j) updates[j] = jobs[j].get();
  } else {
    for (std::size_t j = 0; j < participants.size(); ++j) {
      updates[j] = local_train(model_config, clients[participants[j]], global_weights, cfg, round_index);
    }
  }

  RoundResult res;
  res.weights = aggregate(updates, cfg.aggregation);
  auto& rep = res.report;
  rep.round_index = round_index;
  double train_sum = 0.0;
  for (const auto& u : updates) {
    rep.participants.push_back(u.client_id);
    train_sum += u.local_train_loss;
  }
  rep.avg_train_loss = train_sum / static_cast<double>(updates.size());
  auto ev = evaluate_global(model_config, res.weights, clients);
  rep.per_client_test_loss = std::move(ev.per_client_loss);
  rep.avg_test_loss = ev.average;
  if (!std::isfinite(rep.avg_train_loss) || !std::isfinite(rep.avg_test_loss)) {
    throw NumericError("round " + std::to_string(round_index) + ": non-finite loss");
  }
  return res;
}

struct ExperimentReport {
  ModelConfig model_config;
  FederationConfig fed_config;
  std::vector<std::string> client_ids;
  std::size_t parameter_count = 0;
  std::uint64_t dataset_digest = 0;
  std::vector<RoundReport> rounds;
  double final_avg_test_loss = 0.0;
  ParameterVector final_weights;
};

using RoundCallback = std::function<void(const RoundReport&)>;

// Builds the global model from fed_config.seed and runs `rounds` rounds.
// Round indices start at 1.
inline ExperimentReport run_experiment(const ModelConfig& model_config,
                                       const FederationConfig& fed_config,
                                       const std::vector<ClientState>& clients,
                                       const RoundCallback& on_round = {}) {
  model_config.validate();
  fed_config.validate();
  if (clients.empty()) throw ConfigError("experiment needs at least one client");

  ExperimentReport report;
  report.model_config = model_config;
  report.fed_config = fed_config;
  for (const auto& c : clients) report.client_ids.push_back(c.client_id);
  report.parameter_count = count_parameters(model_config);
  report.dataset_digest = dataset_digest(clients);

  ParameterVector global = build_model(model_config, fed_config.seed).export_weights();
  Rng availability{fed_config.seed, 0xa7a11ab1eULL};
  for (std::size_t r = 1; r <= fed_config.rounds; ++r) {
    auto step = run_round(model_config, global, clients, fed_config, r, availability);
    global.require_same_layout(step.weights, "run_experiment");
    global = std::move(step.weights);
    if (on_round) on_round(step.report);
    report.rounds.push_back(std::move(step.report));
  }
  report.final_avg_test_loss = report.rounds.back().avg_test_loss;
  report.final_weights = std::move(global);
  return report;
}

}  // namespace fedkan
