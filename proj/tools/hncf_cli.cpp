// hncf: prepare data, train, evaluate and query the hybrid recommender.
//
//   hncf synth --out D --users N --items M --seed S
//   hncf prepare --interactions F --out D [--sample-fraction f] [--neg-ratio r] [--seed s]
//   hncf train --config F --data D --out CKPT
//   hncf evaluate --ckpt F --data D [--k 10] [--negatives 99]
//   hncf recommend --ckpt F --data D --user U [--k 10]
//   hncf gradcheck [--seed s]
//
// Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 numeric failure.

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hncf/error.hpp"
#include "hncf/gradient_suite.hpp"
#include "hncf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace hncf;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::InvalidParam: return kUsage;
    case ErrorKind::NonFiniteGradient: return kNumeric;
    default: return kData;
  }
}

int run_synth(const fs::path& out, std::size_t users, std::size_t items, std::uint64_t seed) {
  const SynthData data = synth_generate(users, items, seed);
  write_synth(data, out);
  std::cerr << "wrote " << data.dataset.size() << " rows, " << data.images.size() << " images to " << out << '\n';
  return kOk;
}

int run_prepare(const fs::path& in, const fs::path& out, const PrepareOptions& opts) {
  const Dataset d = prepare(in, out, opts);
  const DatasetStats& s = d.stats();
  nlohmann::json j = {{"rows", s.rows},           {"users", s.unique_users}, {"items", s.unique_items},
                      {"positives", s.positives}, {"negatives", s.negatives}};
  std::cout << j.dump() << '\n';
  return kOk;
}

int run_train(const fs::path& config, const fs::path& data, const fs::path& out) {
  const RunConfig cfg = load_run_config(config);
  TrainResult r = train_run(cfg, data, [](const EpochMetrics& m) { std::cout << epoch_json(m) << std::endl; });
  const Dataset full = load_interactions(data / cfg.data.interactions);
  save_checkpoint(r.model, out, full.index().raw_users(), full.index().raw_items(), r.metadata);
  std::cerr << "saved " << out << '\n';
  return kOk;
}

int run_evaluate(const fs::path& ckpt, const fs::path& data, std::optional<std::size_t> k,
                 std::optional<std::size_t> negatives) {
  const Checkpoint ck = load_checkpoint(ckpt);
  std::cout << to_json(evaluate_run(ck, data, k, negatives)).dump() << '\n';
  return kOk;
}

int run_recommend(const fs::path& ckpt, const fs::path& data, std::int64_t user, std::size_t k) {
  const Checkpoint ck = load_checkpoint(ckpt);
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [item, score] : recommend_run(ck, data, user, k)) {
    list.push_back({{"item_id", item}, {"score", score}});
  }
  std::cout << list.dump() << '\n';
  return kOk;
}

int run_gradcheck(std::uint64_t seed) {
  bool ok = true;
  for (const auto& e : run_gradient_suite(seed)) {
    std::cout << (e.passed() ? "ok    " : "FAIL  ") << std::left << std::setw(20) << e.name
              << " max rel err " << std::scientific << std::setprecision(3) << e.max_relative_error << '\n';
    ok = ok && e.passed();
  }
  return ok ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid neural collaborative filtering: ids + item text + item images."};
  app.require_subcommand(1);

  fs::path out, in, config, data, ckpt;
  std::size_t users = 0, items = 0, k = 10, negatives = 99;
  std::uint64_t seed = 0;
  std::int64_t user = 0;
  PrepareOptions prep;

  auto* synth = app.add_subcommand("synth", "write the two-topic synthetic fixture");
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--users", users, "number of users")->required()->check(CLI::PositiveNumber);
  synth->add_option("--items", items, "number of items")->required()->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed, "random seed");

  auto* prepare_cmd = app.add_subcommand("prepare", "clean text, sample negatives, write CSV + vocabulary");
  prepare_cmd->add_option("--interactions", in, "input interactions CSV")->required();
  prepare_cmd->add_option("--out", out, "output directory")->required();
  prepare_cmd->add_option("--sample-fraction", prep.sample_fraction, "fraction of rows to keep")
      ->check(CLI::Range(0.0, 1.0));
  prepare_cmd->add_option("--neg-ratio", prep.neg_ratio, "negatives per positive");
  prepare_cmd->add_option("--max-vocab", prep.max_vocab, "vocabulary size including reserved ids");
  prepare_cmd->add_option("--seed", prep.seed, "random seed");

  auto* train = app.add_subcommand("train", "fit a model; one JSON line per epoch on stdout");
  train->add_option("--config", config, "RunConfig JSON")->required();
  train->add_option("--data", data, "prepared data directory")->required();
  train->add_option("--out", out, "checkpoint to write")->required();

  std::optional<std::size_t> eval_k, eval_negatives;
  auto* evaluate = app.add_subcommand("evaluate", "recall and HR@K on held-out positives");
  evaluate->add_option("--ckpt", ckpt, "checkpoint")->required();
  evaluate->add_option("--data", data, "prepared data directory")->required();
  evaluate->add_option("--k", eval_k, "rank cutoff (default 10)");
  evaluate->add_option("--negatives", eval_negatives, "sampled negatives per user (default 99)");

  auto* recommend = app.add_subcommand("recommend", "top-k unseen items for one user");
  recommend->add_option("--ckpt", ckpt, "checkpoint")->required();
  recommend->add_option("--data", data, "prepared data directory")->required();
  recommend->add_option("--user", user, "raw user id")->required();
  recommend->add_option("--k", k, "number of items")->check(CLI::PositiveNumber);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
  gradcheck->add_option("--seed", seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cerr << app.help();
    return kUsage;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    if (train->parsed()) std::cerr << '\n' << run_config_schema();
    return kUsage;
  }

  try {
    if (synth->parsed()) return run_synth(out, users, items, seed);
    if (prepare_cmd->parsed()) return run_prepare(in, out, prep);
    if (train->parsed()) return run_train(config, data, out);
    if (evaluate->parsed()) return run_evaluate(ckpt, data, eval_k, eval_negatives);
    if (recommend->parsed()) return run_recommend(ckpt, data, user, k);
    if (gradcheck->parsed()) return run_gradcheck(seed);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    if (e.kind() == ErrorKind::InvalidConfig && train->parsed()) std::cerr << '\n' << run_config_schema();
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  (void)negatives;
  return kUsage;
}
