#include <doctest.h>

#include <cmath>
#include <random>

#include "hncf/error.hpp"
#include "hncf/model.hpp"
#include "oracles.hpp"

using namespace hncf;

namespace {

std::shared_ptr<Vocabulary> toy_vocab() {
  return std::make_shared<Vocabulary>(std::vector<std::string>{"space", "romance", "river", "night", "matrix", "scifi"});
}

HncfConfig tiny(ModelVariant v, std::uint64_t seed = 1) {
  HncfConfig cfg;
  cfg.variant = v;
  cfg.user = {3, 4};
  cfg.item = {3, 4};
  cfg.text.layers = 1;
  cfg.text.hidden = 8;
  cfg.text.heads = 2;
  cfg.text.max_len = 6;
  cfg.text.vocab = toy_vocab();
  cfg.image.height = 8;
  cfg.image.width = 8;
  cfg.image.blocks = {{4, 1}, {4, 1}};
  cfg.image.head_dim = 4;
  cfg.fusion_widths = {8, 6};
  cfg.dropout_rate = 0.2;
  cfg.seed = seed;
  return cfg;
}

Tensor random_image(std::mt19937_64& gen, std::size_t h = 8, std::size_t w = 8) {
  return Tensor({h, w, 3}, oracle::random_values(h * w * 3, gen, 0.0, 1.0));
}

ModelInput input(const HncfConfig& cfg, std::size_t u, std::size_t i, std::string_view text,
                 std::mt19937_64& gen) {
  ModelInput in;
  in.user = u;
  in.item = i;
  in.text = tokenize(text, cfg.text);
  if (cfg.uses_image()) in.image = random_image(gen, cfg.image.height, cfg.image.width);
  return in;
}

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an hncf::Error");
  return ErrorKind::InvalidParam;
}

double max_diff(const Tensor& a, const Tensor& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.at(i) - b.at(i)));
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// vocabulary and tokenization

TEST_CASE("build_vocab ranks by frequency then lexicographically") {
  std::vector<std::string> corpus{"action thriller", "action drama"};
  auto v = build_vocab(corpus, 100);
  CHECK(v.id_of("action") == Vocabulary::kReserved);
  CHECK(v.id_of("drama") < v.id_of("thriller"));
  CHECK(v.id_of("unseen") == Vocabulary::kUnk);
  CHECK(build_vocab(corpus, 4).size() == 4);
  std::vector<std::string> empty;
  CHECK(kind_of([&] { build_vocab(empty, 10); }) == ErrorKind::EmptyCorpus);
}

TEST_CASE("tokenize pads, maps and truncates") {
  TextEncoderConfig cfg;
  cfg.max_len = 5;
  cfg.vocab = toy_vocab();
  auto e = tokenize("", cfg);
  CHECK(e.ids == std::vector<std::size_t>{Vocabulary::kCls, 0, 0, 0, 0});
  CHECK(e.attention_mask == std::vector<unsigned char>{1, 0, 0, 0, 0});

  auto m = tokenize("matrix scifi", cfg);
  CHECK(m.ids == std::vector<std::size_t>{Vocabulary::kCls, cfg.vocab->id_of("matrix"), cfg.vocab->id_of("scifi"), 0, 0});
  CHECK(m.real_length() == 3);

  auto u = tokenize("matrix zebra", cfg);
  CHECK(u.ids[2] == Vocabulary::kUnk);

  auto t = tokenize("space romance river night matrix scifi space romance river night", cfg);
  CHECK(t.ids.size() == 5);
  CHECK(t.ids[4] == cfg.vocab->id_of("night"));
  CHECK(t.attention_mask == std::vector<unsigned char>{1, 1, 1, 1, 1});
}

TEST_CASE("vocabulary file round-trip") {
  auto v = *toy_vocab();
  auto path = std::filesystem::temp_directory_path() / "hncf_vocab_test.txt";
  v.save(path);
  CHECK(Vocabulary::load(path) == v);
  std::filesystem::remove(path);
}

// ---------------------------------------------------------------------------
// encoders

TEST_CASE("id encoder") {
  Rng rng(1);
  IdEncoder enc({5, 3}, rng);
  Tape tape;
  auto row0 = enc.encode(tape, 0);
  CHECK(row0.shape() == Shape{1, 3});
  for (std::size_t j = 0; j < 3; ++j) CHECK(row0.at(j) == enc.table().at(j));
  CHECK(vals(enc.encode(tape, 4)) == vals(enc.encode(tape, 4)));
  for (double v : enc.table().values()) CHECK(std::abs(v) <= 0.05);
  CHECK(kind_of([&] { enc.encode(tape, 5); }) == ErrorKind::IndexOutOfRange);
}

TEST_CASE("text encoder with an empty stack returns the CLS and position-0 embedding") {
  TextEncoderConfig cfg;
  cfg.layers = 0;
  cfg.hidden = 8;
  cfg.max_len = 6;
  cfg.vocab = toy_vocab();
  Rng rng(3);
  TextEncoder enc(cfg, rng);
  Tape tape;
  auto out = enc.encode(tape, tokenize("space river", cfg));
  ParameterList params;
  enc.collect("text", params);
  Tensor pos;
  for (auto& p : params)
    if (p.name.find("position") != std::string::npos) pos = p.tensor;
  REQUIRE(pos.defined());
  for (std::size_t j = 0; j < 8; ++j)
    CHECK(out.at(j) == enc.token_embedding().at(Vocabulary::kCls * 8 + j) + pos.at(j));
}

TEST_CASE("text encoder ignores padding and token order without positions") {
  auto cfg = tiny(ModelVariant::TextNcf).text;
  cfg.max_len = 8;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    TextEncoder enc(cfg, rng);
    Tape tape;
    auto seq = tokenize("space river night", cfg);
    auto full = enc.encode(tape, seq, false);
    auto skipped = enc.encode(tape, seq, true);
    CHECK(max_diff(full, skipped) <= 1e-9);

    auto garbage = seq;
    garbage.ids[6] = 5;
    garbage.ids[7] = 7;
    CHECK(max_diff(full, enc.encode(tape, garbage, false)) <= 1e-9);

    auto c2 = cfg;
    c2.use_positional = false;
    Rng rng2(seed);
    TextEncoder unordered(c2, rng2);
    auto a = unordered.encode(tape, tokenize("space river night", c2), false);
    auto b = unordered.encode(tape, tokenize("night space river", c2), false);
    CHECK(max_diff(a, b) <= 1e-9);
  }
}

TEST_CASE("text encoder outputs are finite") {
  auto cfg = tiny(ModelVariant::TextNcf).text;
  Rng rng(9);
  TextEncoder enc(cfg, rng);
  Tape tape;
  for (auto text : {"", "space", "space romance river night matrix scifi matrix"}) {
    const auto out = enc.encode(tape, tokenize(text, cfg));
    for (double v : out.values()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("image encoder shape contract and zero image") {
  auto cfg = tiny(ModelVariant::Hybrid).image;
  Rng rng(4);
  ImageEncoder enc(cfg, rng);
  Tape tape;
  for (const auto& c : enc.conv_layers())
    for (double b : c.bias.values()) REQUIRE(b == 0.0);
  auto feats = enc.conv_features(tape, Tensor::zeros(cfg.input_shape()));
  CHECK(feats.shape() == Shape{1, enc.feature_size()});
  for (double v : feats.values()) CHECK(v == 0.0);
  auto out = enc.encode(tape, Tensor::zeros(cfg.input_shape()));
  CHECK(out.shape() == Shape{1, cfg.head_dim});
  for (std::size_t j = 0; j < cfg.head_dim; ++j) CHECK(out.at(j) == std::max(0.0, enc.head().bias.at(j)));

  std::mt19937_64 gen(5);
  CHECK(enc.encode(tape, random_image(gen)).size() == cfg.head_dim);
  CHECK(kind_of([&] { enc.encode(tape, random_image(gen, 9, 8)); }) == ErrorKind::ShapeMismatch);

  ParameterList conv;
  enc.collect_conv("image", conv);
  for (auto& p : conv) CHECK_FALSE(p.tensor.requires_grad());
}

// ---------------------------------------------------------------------------
// model

TEST_CASE("build_model is deterministic and variant-shaped") {
  for (auto v : {ModelVariant::Ncf, ModelVariant::TextNcf, ModelVariant::Hybrid}) {
    HncfModel a(tiny(v, 7)), b(tiny(v, 7)), c(tiny(v, 8));
    auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    REQUIRE(pa.size() == pb.size());
    bool differs = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i].name == pb[i].name);
      CHECK(vals(pa[i].tensor) == vals(pb[i].tensor));
      differs = differs || vals(pa[i].tensor) != vals(pc[i].tensor);
    }
    CHECK(differs);
    CHECK(a.output_layer().out_features() == 1);
  }
  HncfModel ncf(tiny(ModelVariant::Ncf));
  CHECK(ncf.text_encoder() == nullptr);
  CHECK(ncf.image_encoder() == nullptr);
  for (auto& p : ncf.parameters()) {
    CHECK(p.name.rfind("text", 0) != 0);
    CHECK(p.name.rfind("image", 0) != 0);
  }
  HncfModel text(tiny(ModelVariant::TextNcf));
  CHECK(text.image_encoder() == nullptr);

  auto bad = tiny(ModelVariant::Ncf);
  bad.fusion_widths.clear();
  CHECK(kind_of([&] { HncfModel m(bad); }) == ErrorKind::InvalidConfig);
  bad = tiny(ModelVariant::Ncf);
  bad.dropout_rate = 1.0;
  CHECK(kind_of([&] { HncfModel m(bad); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("copies are deep") {
  HncfModel a(tiny(ModelVariant::Ncf));
  HncfModel b = a;
  b.parameters()[0].tensor.mutable_values()[0] += 1.0;
  CHECK(a.parameters()[0].tensor.at(0) != b.parameters()[0].tensor.at(0));
}

TEST_CASE("forward range, eval determinism, missing inputs") {
  std::mt19937_64 gen(1);
  for (auto v : {ModelVariant::Ncf, ModelVariant::TextNcf, ModelVariant::Hybrid}) {
    auto cfg = tiny(v);
    HncfModel m(cfg);
    auto in = input(cfg, 1, 2, "space river", gen);
    const double p = forward(m, in);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(forward(m, in) == p);
    if (cfg.uses_image()) {
      auto missing = in;
      missing.image.reset();
      CHECK(kind_of([&] { forward(m, missing); }) == ErrorKind::MissingInput);
    }
    auto oob = in;
    oob.user = 3;
    CHECK(kind_of([&] { forward(m, oob); }) == ErrorKind::IndexOutOfRange);
  }
}

TEST_CASE("variants never read the modalities they do not use") {
  std::mt19937_64 gen(2);
  auto ncf_cfg = tiny(ModelVariant::Ncf);
  HncfModel ncf(ncf_cfg);
  auto in = input(ncf_cfg, 0, 1, "space", gen);
  const double base = forward(ncf, in);
  auto garbage = in;
  garbage.text.ids.assign(garbage.text.ids.size(), 999);
  garbage.image = Tensor::full({3, 5, 7}, std::nan(""));
  CHECK(forward(ncf, garbage) == base);

  auto text_cfg = tiny(ModelVariant::TextNcf);
  HncfModel text(text_cfg);
  auto tin = input(text_cfg, 0, 1, "space", gen);
  const double tbase = forward(text, tin);
  tin.image = Tensor::full({2, 2, 3}, 1e300);
  CHECK(forward(text, tin) == tbase);
}

TEST_CASE("hybrid forward equals the composed encoders and dense layers") {
  std::mt19937_64 gen(3);
  auto cfg = tiny(ModelVariant::Hybrid, 5);
  HncfModel m(cfg);
  for (std::size_t u = 0; u < 3; ++u)
    for (std::size_t i = 0; i < 3; ++i) {
      auto in = input(cfg, u, i, i == 0 ? "space river" : "romance night matrix", gen);
      Tape tape = Tape::inference();
      auto x = ops::concat(tape,
                           {m.user_encoder().encode(tape, u), m.item_encoder().encode(tape, i),
                            m.text_encoder()->encode(tape, in.text), m.image_encoder()->encode(tape, *in.image)},
                           1);
      for (const auto& layer : m.fusion_layers()) x = ops::relu(tape, layer.apply(tape, x));
      const double want = ops::sigmoid(tape, m.output_layer().apply(tape, x)).item();
      CHECK(std::abs(forward(m, in) - want) <= 1e-12);
    }
}

TEST_CASE("predict_batch equals single forwards") {
  std::mt19937_64 gen(4);
  for (auto v : {ModelVariant::Ncf, ModelVariant::TextNcf, ModelVariant::Hybrid}) {
    auto cfg = tiny(v);
    HncfModel m(cfg);
    CHECK(predict_batch(m, {}).empty());
    std::vector<ModelInput> rows;
    for (std::size_t u = 0; u < 3; ++u)
      for (std::size_t i = 0; i < 3; ++i) rows.push_back(input(cfg, u, i, u == i ? "space" : "night river", gen));
    rows.push_back(rows[4]);
    auto batch = predict_batch(m, rows);
    REQUIRE(batch.size() == rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) CHECK(std::abs(batch[r] - forward(m, rows[r])) <= 1e-12);
    CHECK(batch.back() == batch[4]);
  }
}

TEST_CASE("train-mode dropout is seeded") {
  std::mt19937_64 gen(6);
  auto cfg = tiny(ModelVariant::Ncf);
  cfg.dropout_rate = 0.5;
  HncfModel m(cfg);
  auto in = input(cfg, 2, 0, "", gen);
  Rng a(10), b(10);
  CHECK(forward(m, in, ops::Mode::Train, &a) == forward(m, in, ops::Mode::Train, &b));
}

TEST_CASE("recommend_top_k ordering") {
  std::mt19937_64 gen(7);
  auto cfg = tiny(ModelVariant::Ncf);
  HncfModel m(cfg);
  std::vector<ModelInput> cands;
  for (std::size_t i = 0; i < 3; ++i) cands.push_back(input(cfg, 1, i, "", gen));
  auto all = recommend_top_k(m, cands, 10);
  REQUIRE(all.size() == 3);
  for (std::size_t r = 1; r < all.size(); ++r) CHECK(all[r - 1].score >= all[r].score);
  CHECK(recommend_top_k(m, cands, 2).size() == 2);

  // identical item rows -> equal scores -> ascending id
  auto item_table = m.item_encoder().table();
  for (std::size_t j = 0; j < cfg.item.dim; ++j) {
    item_table.mutable_values()[2 * cfg.item.dim + j] = item_table.at(j);
  }
  std::vector<ModelInput> tied{cands[2], cands[0]};
  auto t = recommend_top_k(m, tied, 2);
  CHECK(t[0].score == t[1].score);
  CHECK(t[0].item == 0);
  CHECK(t[1].item == 2);
  CHECK(kind_of([&] { recommend_top_k(m, {}, 3); }) == ErrorKind::EmptyCandidates);
}
