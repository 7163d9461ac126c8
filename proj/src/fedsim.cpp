#include "fedleak/fedsim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>

namespace fedleak::fed {

void FedConfig::validate() const {
  require(n_rounds >= 1, ErrorKind::configuration, "n_rounds must be >= 1");
  require(n_clients >= 1, ErrorKind::configuration, "n_clients must be >= 1");
  require(clients_per_round >= 1 && clients_per_round <= n_clients, ErrorKind::configuration,
          "clients_per_round must be in [1, n_clients]");
  require(local_epochs >= 1, ErrorKind::configuration, "local_epochs must be >= 1");
  require(lr > 0.0, ErrorKind::configuration, "lr must be positive");
  require(lr_final_frac > 0.0 && lr_final_frac <= 1.0, ErrorKind::configuration,
          "lr_final_frac must be in (0, 1]");
  require(baseline == "none" || baseline == "fp" || baseline == "mu", ErrorKind::configuration,
          "baseline must be none, fp, or mu");
  for (int v : victim_ids)
    require(v >= 0 && v < n_clients, ErrorKind::configuration, "victim id out of range");
  for (int a : adversary_ids) {
    require(a >= 0 && a < n_clients, ErrorKind::configuration, "adversary id out of range");
    require(std::find(victim_ids.begin(), victim_ids.end(), a) == victim_ids.end(),
            ErrorKind::configuration, "adversary cannot also be a victim");
  }
  if (baseline == "fp" || baseline == "mu") {
    require(!victim_ids.empty(), ErrorKind::configuration, "fp/mu baselines need victims");
    require(static_cast<int>(victim_ids.size()) <= clients_per_round, ErrorKind::configuration,
            "cannot force more victims than round slots");
  }
  if (baseline == "mu") {
    require(oracle, ErrorKind::configuration, "mu baseline requires oracle mode");
    require(victim_ids.size() == 1, ErrorKind::configuration, "mu baseline expects one victim");
  }
  require(victim_allowed.empty() || victim_allowed.size() == static_cast<size_t>(n_rounds),
          ErrorKind::configuration, "victim_allowed mask must cover every round");
}

double FedConfig::round_lr(int round) const {
  if (n_rounds == 1) return lr;
  double frac = static_cast<double>(round) / static_cast<double>(n_rounds - 1);
  return lr * (1.0 - (1.0 - lr_final_frac) * frac);
}

ModelWeights fedavg(const std::vector<const ModelWeights*>& updates,
                    const std::vector<int64_t>& line_counts) {
  require(!updates.empty(), ErrorKind::aggregation, "fedavg needs at least one update");
  require(updates.size() == line_counts.size(), ErrorKind::aggregation,
          "fedavg updates/counts mismatch");
  int64_t total = 0;
  for (int64_t c : line_counts) {
    require(c > 0, ErrorKind::aggregation, "fedavg line counts must be positive");
    total += c;
  }
  std::vector<double> coeffs(line_counts.size());
  for (size_t i = 0; i < coeffs.size(); ++i)
    coeffs[i] = static_cast<double>(line_counts[i]) / static_cast<double>(total);
  return weighted_sum(updates, coeffs);
}

ModelWeights adversary_inject(const ModelWeights& g_l, const ModelWeights& g_a, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::invalid_input, "alpha must be in [0, 1]");
  if (alpha == 0.0) return g_l;
  return weighted_sum({&g_a, &g_l}, {alpha, 1.0 - alpha});
}

std::vector<int> sample_participants(const FedConfig& cfg, int round) {
  bool force_victims = cfg.baseline == "fp" || cfg.baseline == "mu";
  bool victims_eligible =
      cfg.victim_allowed.empty() || cfg.victim_allowed[static_cast<size_t>(round)] != 0;

  std::vector<int> pool;
  pool.reserve(cfg.n_clients);
  for (int c = 0; c < cfg.n_clients; ++c) {
    bool is_victim = std::find(cfg.victim_ids.begin(), cfg.victim_ids.end(), c) !=
                     cfg.victim_ids.end();
    if (is_victim && (force_victims || !victims_eligible)) continue;
    pool.push_back(c);
  }
  auto rng = make_rng(derive_seed(cfg.seed, "sample", static_cast<uint64_t>(round)));
  std::shuffle(pool.begin(), pool.end(), rng);

  std::vector<int> chosen;
  if (force_victims) chosen = cfg.victim_ids;
  for (int c : pool) {
    if (static_cast<int>(chosen.size()) >= cfg.clients_per_round) break;
    chosen.push_back(c);
  }
  require(static_cast<int>(chosen.size()) == cfg.clients_per_round, ErrorKind::configuration,
          "could not fill the participant quota");
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

RunResult run_training(const lm::ModelConfig& mcfg, const FedConfig& cfg,
                       const ModelWeights& base,
                       const std::vector<corpus::Corpus>& client_corpora, SnapshotStore& store,
                       AdversaryHook* hook) {
  cfg.validate();
  lm::validate_weights(mcfg, base);
  require(static_cast<int>(client_corpora.size()) == cfg.n_clients, ErrorKind::configuration,
          "client corpora count must match n_clients");
  for (const auto& c : client_corpora)
    require(!c.lines.empty(), ErrorKind::configuration, "every client needs at least one line");
  require(store.total_rounds() == cfg.n_rounds, ErrorKind::configuration,
          "store was created for a different round count");
  require(store.oracle() == cfg.oracle, ErrorKind::configuration,
          "store oracle flag does not match the run config");

  int start_round = store.contiguous_rounds();
  ModelWeights global = start_round == 0 ? base : store.load(start_round - 1, "global");

  // The mu manipulation hands the victim its own previous local update.
  std::optional<ModelWeights> prev_victim_local;
  if (cfg.baseline == "mu") {
    for (int r = start_round - 1; r >= 0 && !prev_victim_local; --r)
      if (store.has(r, "victim_local")) prev_victim_local = store.load(r, "victim_local");
  }

  RunResult result;
  for (int round = start_round; round < cfg.n_rounds; ++round) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<int> participants = sample_participants(cfg, round);
    double lr_r = cfg.round_lr(round);

    std::vector<ModelWeights> updates(participants.size());
    std::vector<int64_t> counts(participants.size());
    std::vector<int> round_victims;
    int victim_local_idx = -1;
    for (size_t i = 0; i < participants.size(); ++i) {
      int client = participants[i];
      bool is_victim = std::find(cfg.victim_ids.begin(), cfg.victim_ids.end(), client) !=
                       cfg.victim_ids.end();
      const ModelWeights* start = &global;
      if (is_victim && cfg.baseline == "mu" && prev_victim_local) start = &*prev_victim_local;

      lm::TrainOptions opt;
      opt.epochs = cfg.local_epochs;
      opt.lr = lr_r;
      opt.optimizer = cfg.optimizer;
      opt.batch_size = cfg.batch_size;
      opt.combiner = cfg.combiner;
      opt.seed = derive_seed(cfg.seed, "client", static_cast<uint64_t>(round),
                             static_cast<uint64_t>(client));
      ModelWeights local = lm::train_local(mcfg, *start, client_corpora[client].lines, opt);

      if (is_victim) {
        round_victims.push_back(client);
        if (victim_local_idx < 0) victim_local_idx = static_cast<int>(i);
      }
      if (hook && std::find(cfg.adversary_ids.begin(), cfg.adversary_ids.end(), client) !=
                      cfg.adversary_ids.end())
        local = hook->update(round, client, global, std::move(local));

      counts[i] = static_cast<int64_t>(client_corpora[client].lines.size());
      updates[i] = std::move(local);
    }

    std::vector<const ModelWeights*> ptrs;
    ptrs.reserve(updates.size());
    for (const auto& u : updates) ptrs.push_back(&u);
    ModelWeights next = fedavg(ptrs, counts);

    if (cfg.oracle && victim_local_idx >= 0) {
      SnapshotMeta vm;
      vm.round = round;
      vm.kind = "victim_local";
      vm.participants = participants;
      vm.victims = round_victims;
      vm.victim_present = true;
      store.append(vm, updates[victim_local_idx]);
      if (cfg.baseline == "mu") prev_victim_local = updates[victim_local_idx];
    }
    SnapshotMeta gm;
    gm.round = round;
    gm.kind = "global";
    gm.participants = participants;
    gm.victims = round_victims;
    gm.victim_present = !round_victims.empty();
    store.append(gm, next);

    RoundLog log;
    log.round = round;
    log.participants = participants;
    log.victims = round_victims;
    log.lr = lr_r;
    int64_t total = 0;
    for (int64_t c : counts) total += c;
    for (int64_t c : counts)
      log.agg_weights.push_back(static_cast<double>(c) / static_cast<double>(total));
    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    result.logs.push_back(std::move(log));
    global = std::move(next);
  }
  result.final_weights = std::move(global);
  return result;
}

}  // namespace fedleak::fed
