#include <doctest.h>

#include <fstream>
#include <random>

#include <unistd.h>

#include "hncf/error.hpp"
#include "hncf/pipeline.hpp"

using namespace hncf;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an hncf::Error");
  return ErrorKind::InvalidParam;
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("hncf_persist_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

HncfConfig tiny(ModelVariant v) {
  HncfConfig cfg;
  cfg.variant = v;
  cfg.user = {4, 3};
  cfg.item = {5, 3};
  cfg.text.layers = 1;
  cfg.text.hidden = 8;
  cfg.text.heads = 2;
  cfg.text.max_len = 6;
  cfg.text.vocab = std::make_shared<Vocabulary>(std::vector<std::string>{"space", "romance", "river"});
  cfg.image.height = 8;
  cfg.image.width = 8;
  cfg.image.blocks = {{4, 1}};
  cfg.image.head_dim = 4;
  cfg.fusion_widths = {8};
  cfg.seed = 3;
  return cfg;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

std::vector<ModelInput> inputs(const HncfConfig& cfg) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> px(0.0, 1.0);
  std::vector<ModelInput> rows;
  for (std::size_t u = 0; u < cfg.user.vocab_size; ++u)
    for (std::size_t i = 0; i < cfg.item.vocab_size; ++i) {
      ModelInput in{u, i, tokenize(i % 2 ? "space river" : "romance", cfg.text), std::nullopt};
      if (cfg.uses_image()) {
        std::vector<double> v(8 * 8 * 3);
        for (auto& x : v) x = px(gen);
        in.image = Tensor({8, 8, 3}, v);
      }
      rows.push_back(in);
    }
  return rows;
}

}  // namespace

TEST_CASE("checkpoint round-trip preserves parameters and predictions") {
  TempDir dir;
  for (auto v : {ModelVariant::Ncf, ModelVariant::TextNcf, ModelVariant::Hybrid}) {
    auto cfg = tiny(v);
    HncfModel m(cfg);
    // move off the initial values so the check cannot pass by re-initialising
    for (auto& p : m.parameters())
      for (double& x : p.tensor.mutable_values()) x += 0.01;
    const auto path = dir.path / "m.ckpt";
    nlohmann::json training{{"note", "x"}};
    save_checkpoint(m, path, {10, 11, 12, 13}, {5, 6, 7, 8, 9}, training);
    auto ck = load_checkpoint(path);
    CHECK(ck.users == std::vector<std::int64_t>{10, 11, 12, 13});
    CHECK(ck.items.size() == 5);
    CHECK(ck.training == training);
    CHECK(ck.model.config().variant == v);
    if (cfg.uses_text()) CHECK(*ck.model.config().text.vocab == *cfg.text.vocab);

    auto a = m.parameters(), b = ck.model.parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].name == b[i].name);
      CHECK(a[i].tensor.shape() == b[i].tensor.shape());
      CHECK(a[i].tensor.requires_grad() == b[i].tensor.requires_grad());
      CHECK(std::equal(a[i].tensor.values().begin(), a[i].tensor.values().end(), b[i].tensor.values().begin()));
    }
    auto rows = inputs(cfg);
    auto pa = predict_batch(m, rows), pb = predict_batch(ck.model, rows);
    for (std::size_t r = 0; r < rows.size(); ++r) CHECK(std::abs(pa[r] - pb[r]) <= 1e-12);
  }
}

TEST_CASE("damaged checkpoints are rejected") {
  TempDir dir;
  HncfModel m(tiny(ModelVariant::TextNcf));
  const auto path = dir.path / "m.ckpt";
  save_checkpoint(m, path);
  const auto bytes = read_file(path);

  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
    write_file(dir.path / "cut.ckpt", bytes.substr(0, cut));
    const auto k = kind_of([&] { load_checkpoint(dir.path / "cut.ckpt"); });
    CHECK((k == ErrorKind::CorruptDirectory || (cut < 4 && k == ErrorKind::BadMagic)));
  }

  auto magic = bytes;
  magic[0] = 'X';
  write_file(dir.path / "magic.ckpt", magic);
  CHECK(kind_of([&] { load_checkpoint(dir.path / "magic.ckpt"); }) == ErrorKind::BadMagic);

  auto version = bytes;
  version[4] = 9;
  write_file(dir.path / "version.ckpt", version);
  CHECK(kind_of([&] { load_checkpoint(dir.path / "version.ckpt"); }) == ErrorKind::UnsupportedVersion);

  auto extra = bytes + std::string(16, '\0');
  write_file(dir.path / "extra.ckpt", extra);
  CHECK(kind_of([&] { load_checkpoint(dir.path / "extra.ckpt"); }) == ErrorKind::CorruptDirectory);

  CHECK(kind_of([&] { load_checkpoint(dir.path / "absent.ckpt"); }) == ErrorKind::IoError);
}

TEST_CASE("run config parsing") {
  auto defaults = run_config_from_json(nlohmann::json::object());
  CHECK(defaults.train.learning_rate == 0.001);
  CHECK(defaults.train.batch_size == 8);
  CHECK(defaults.train.epochs == 25);
  CHECK(defaults.train.validation_split == 0.2);
  CHECK(defaults.eval.k == 10);
  CHECK(defaults.eval.n_negatives == 99);
  CHECK(defaults.model.fusion_widths == std::vector<std::size_t>{256, 128, 64});
  CHECK(defaults.model.dropout_rate == 0.2);
  CHECK(defaults.model.text.layers == 2);
  CHECK(defaults.model.text.hidden == 64);
  CHECK(defaults.model.image.head_dim == 32);

  auto j = nlohmann::json::parse(R"({
    "seed": 42,
    "model": {"variant": "text_ncf", "user_dim": 8, "text": {"layers": 1, "heads": 4},
              "image": {"blocks": [{"channels": 4, "convs": 1}]}, "fusion_widths": [16]},
    "train": {"epochs": 3, "batch_size": 4},
    "eval": {"k": 5, "n_negatives": 20},
    "data": {"max_vocab": 50}
  })");
  auto c = run_config_from_json(j);
  CHECK(c.seed == 42);
  CHECK(c.model.seed == 42);
  CHECK(c.train.seed == 42);
  CHECK(c.eval.seed == 42);
  CHECK(c.model.variant == ModelVariant::TextNcf);
  CHECK(c.model.user.dim == 8);
  CHECK(c.model.text.heads == 4);
  CHECK(c.model.image.blocks == std::vector<ConvBlockSpec>{{4, 1}});
  CHECK(c.train.epochs == 3);
  CHECK(c.eval.k == 5);
  CHECK(c.data.max_vocab == 50);

  auto back = run_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));

  for (auto bad : {R"({"sede": 1})", R"({"model": {"colour": 1}})", R"({"model": {"text": {"depth": 2}}})",
                   R"({"train": {"epochs": "many"}})", R"({"train": {"learning_rate": 0}})",
                   R"({"model": {"variant": "deep"}})", R"({"eval": {"k": 0}})"}) {
    INFO(bad);
    CHECK(kind_of([&] { run_config_from_json(nlohmann::json::parse(bad)); }) == ErrorKind::InvalidConfig);
  }
  CHECK(kind_of([&] { load_run_config("/nonexistent.json"); }) == ErrorKind::FileNotFound);
}

TEST_CASE("metric report json keeps field order") {
  MetricReport r;
  r.recall = 0.5;
  r.hit_ratio_at_k = 0.25;
  r.hits = 1;
  r.users_evaluated = 4;
  r.confusion = {1, 1, 2, 0};
  CHECK(to_json(r).dump() ==
        R"({"recall":0.5,"hit_ratio_at_k":0.25,"k":10,"hits":1,"users_evaluated":4,"tp":1,"fn":1,"tn":2,"fp":0})");
}

TEST_CASE("prepare, train, evaluate and recommend through the pipeline") {
  TempDir dir;
  SynthConfig sc;
  sc.image_size = 8;
  auto synth = synth_generate(12, 40, 5, sc);
  write_synth(synth, dir.path / "raw");

  PrepareOptions opts;
  opts.neg_ratio = 1;
  auto prepared = prepare(dir.path / "raw" / kInteractionsFile, dir.path / "prep", opts);
  CHECK(fs::exists(dir.path / "prep" / kInteractionsFile));
  CHECK(fs::exists(dir.path / "prep" / "vocab.txt"));
  CHECK(prepared.stats().negatives > synth.dataset.stats().negatives);

  RunConfig cfg = run_config_from_json(nlohmann::json::parse(R"({
    "seed": 3,
    "model": {"variant": "hybrid", "user_dim": 4, "item_dim": 4,
              "text": {"layers": 1, "hidden": 8, "heads": 2, "max_len": 8},
              "image": {"height": 8, "width": 8, "blocks": [{"channels": 4, "convs": 1}], "head_dim": 4},
              "fusion_widths": [8]},
    "train": {"epochs": 2},
    "eval": {"n_negatives": 10}
  })"));
  auto a = train_run(cfg, dir.path / "prep");
  auto b = train_run(cfg, dir.path / "prep");
  REQUIRE(a.epochs.size() == 2);
  for (std::size_t e = 0; e < 2; ++e) CHECK(a.epochs[e].train_loss == b.epochs[e].train_loss);

  const auto ckpt = dir.path / "model.ckpt";
  auto data = load_data(dir.path / "prep", cfg.data, cfg.model);
  save_checkpoint(a.model, ckpt, data.full.index().raw_users(), data.full.index().raw_items(), a.metadata);
  auto ck = load_checkpoint(ckpt);
  auto r1 = evaluate_run(ck, dir.path / "prep");
  auto r2 = evaluate_run(load_checkpoint(ckpt), dir.path / "prep");
  CHECK(r1 == r2);
  CHECK(r1.users_evaluated > 0);
  CHECK(r1.hit_ratio_at_k == static_cast<double>(r1.hits) / r1.users_evaluated);
  CHECK(evaluate_run(ck, dir.path / "prep", 100, 10).hit_ratio_at_k == 1.0);

  const auto user = data.full.index().raw_users().front();
  auto recs = recommend_run(ck, dir.path / "prep", user, 5);
  CHECK(recs.size() == 5);
  for (std::size_t i = 1; i < recs.size(); ++i) CHECK(recs[i - 1].second >= recs[i].second);
  for (const auto& r : data.full.records())
    if (r.user_id == user && r.interaction == 1)
      for (const auto& [item, score] : recs) CHECK(item != r.item_id);
  CHECK(kind_of([&] { recommend_run(ck, dir.path / "prep", -5, 3); }) == ErrorKind::IndexOutOfRange);
}
