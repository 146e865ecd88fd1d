#include "hncf/config_json.hpp"

#include <fstream>
#include <initializer_list>
#include <string_view>

#include "hncf/error.hpp"

namespace hncf {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::InvalidConfig, where + " must be a JSON object");
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) fail(ErrorKind::InvalidConfig, "unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, const std::string& where, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::InvalidConfig, "bad value for '" + where + "." + key + "'");
  }
}

// Counts must be non-negative integers; json's get<size_t> would wrap -1.
void read_count(const json& j, const char* key, const std::string& where, std::size_t& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    fail(ErrorKind::InvalidConfig, "'" + where + "." + key + "' must be a non-negative integer");
  }
  out = v.get<std::size_t>();
}

}  // namespace

json model_config_to_json(const HncfConfig& cfg, bool with_sizes) {
  json blocks = json::array();
  for (const auto& b : cfg.image.blocks) blocks.push_back({{"channels", b.channels}, {"convs", b.convs}});
  json j = {
      {"variant", std::string(to_string(cfg.variant))},
      {"user_dim", cfg.user.dim},
      {"item_dim", cfg.item.dim},
      {"text",
       {{"layers", cfg.text.layers},
        {"hidden", cfg.text.hidden},
        {"heads", cfg.text.heads},
        {"max_len", cfg.text.max_len},
        {"use_positional", cfg.text.use_positional},
        {"trainable", cfg.text.trainable}}},
      {"image",
       {{"height", cfg.image.height},
        {"width", cfg.image.width},
        {"blocks", blocks},
        {"frozen_conv", cfg.image.frozen_conv},
        {"head_dim", cfg.image.head_dim}}},
      {"fusion_widths", cfg.fusion_widths},
      {"dropout_rate", cfg.dropout_rate},
      {"seed", cfg.seed},
  };
  if (with_sizes) {
    j["user_count"] = cfg.user.vocab_size;
    j["item_count"] = cfg.item.vocab_size;
  }
  return j;
}

HncfConfig model_config_from_json(const json& j, bool with_sizes) {
  const std::string w = "model";
  if (with_sizes) {
    reject_unknown(j, w, {"variant", "user_dim", "item_dim", "text", "image", "fusion_widths", "dropout_rate",
                          "seed", "user_count", "item_count"});
  } else {
    reject_unknown(j, w, {"variant", "user_dim", "item_dim", "text", "image", "fusion_widths", "dropout_rate",
                          "seed"});
  }
  HncfConfig cfg;
  if (j.contains("variant")) {
    if (!j["variant"].is_string()) fail(ErrorKind::InvalidConfig, "'model.variant' must be a string");
    cfg.variant = parse_variant(j["variant"].get<std::string>());
  }
  read_count(j, "user_dim", w, cfg.user.dim);
  read_count(j, "item_dim", w, cfg.item.dim);
  if (with_sizes) {
    read_count(j, "user_count", w, cfg.user.vocab_size);
    read_count(j, "item_count", w, cfg.item.vocab_size);
  }
  if (j.contains("text")) {
    const json& t = j["text"];
    const std::string tw = w + ".text";
    reject_unknown(t, tw, {"layers", "hidden", "heads", "max_len", "use_positional", "trainable"});
    read_count(t, "layers", tw, cfg.text.layers);
    read_count(t, "hidden", tw, cfg.text.hidden);
    read_count(t, "heads", tw, cfg.text.heads);
    read_count(t, "max_len", tw, cfg.text.max_len);
    read(t, "use_positional", tw, cfg.text.use_positional);
    read(t, "trainable", tw, cfg.text.trainable);
  }
  if (j.contains("image")) {
    const json& im = j["image"];
    const std::string iw = w + ".image";
    reject_unknown(im, iw, {"height", "width", "blocks", "frozen_conv", "head_dim"});
    read_count(im, "height", iw, cfg.image.height);
    read_count(im, "width", iw, cfg.image.width);
    read(im, "frozen_conv", iw, cfg.image.frozen_conv);
    read_count(im, "head_dim", iw, cfg.image.head_dim);
    if (im.contains("blocks")) {
      if (!im["blocks"].is_array()) fail(ErrorKind::InvalidConfig, "'" + iw + ".blocks' must be an array");
      cfg.image.blocks.clear();
      for (const auto& b : im["blocks"]) {
        const std::string bw = iw + ".blocks[]";
        reject_unknown(b, bw, {"channels", "convs"});
        ConvBlockSpec spec{0, 0};
        if (!b.contains("channels") || !b.contains("convs")) {
          fail(ErrorKind::InvalidConfig, "'" + bw + "' needs channels and convs");
        }
        read_count(b, "channels", bw, spec.channels);
        read_count(b, "convs", bw, spec.convs);
        cfg.image.blocks.push_back(spec);
      }
    }
  }
  if (j.contains("fusion_widths")) {
    if (!j["fusion_widths"].is_array()) fail(ErrorKind::InvalidConfig, "'model.fusion_widths' must be an array");
    cfg.fusion_widths.clear();
    for (const auto& v : j["fusion_widths"]) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) fail(ErrorKind::InvalidConfig, "'model.fusion_widths' entries must be counts");
      cfg.fusion_widths.push_back(v.get<std::size_t>());
    }
  }
  read(j, "dropout_rate", w, cfg.dropout_rate);
  read(j, "seed", w, cfg.seed);
  return cfg;
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, "config", {"seed", "model", "train", "eval", "data"});
  RunConfig cfg;
  read(j, "seed", "config", cfg.seed);
  if (j.contains("model")) cfg.model = model_config_from_json(j["model"]);
  if (j.contains("train")) {
    const json& t = j["train"];
    const std::string w = "train";
    reject_unknown(t, w, {"learning_rate", "batch_size", "epochs", "validation_split", "beta1", "beta2", "eps",
                          "shuffle"});
    read(t, "learning_rate", w, cfg.train.learning_rate);
    read_count(t, "batch_size", w, cfg.train.batch_size);
    read_count(t, "epochs", w, cfg.train.epochs);
    read(t, "validation_split", w, cfg.train.validation_split);
    read(t, "beta1", w, cfg.train.beta1);
    read(t, "beta2", w, cfg.train.beta2);
    read(t, "eps", w, cfg.train.eps);
    read(t, "shuffle", w, cfg.train.shuffle);
  }
  if (j.contains("eval")) {
    const json& e = j["eval"];
    reject_unknown(e, "eval", {"k", "n_negatives", "threshold"});
    read_count(e, "k", "eval", cfg.eval.k);
    read_count(e, "n_negatives", "eval", cfg.eval.n_negatives);
    read(e, "threshold", "eval", cfg.eval.threshold);
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    reject_unknown(d, "data", {"interactions", "vocabulary", "max_vocab"});
    read(d, "interactions", "data", cfg.data.interactions);
    read(d, "vocabulary", "data", cfg.data.vocabulary);
    read_count(d, "max_vocab", "data", cfg.data.max_vocab);
  }
  cfg.model.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  cfg.eval.seed = cfg.seed;
  cfg.train.validate();
  cfg.eval.validate();
  if (cfg.data.max_vocab <= Vocabulary::kReserved) {
    fail(ErrorKind::InvalidConfig, "data.max_vocab must exceed the 3 reserved ids");
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::FileNotFound, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

json to_json(const RunConfig& cfg) {
  json model = model_config_to_json(cfg.model);
  model.erase("seed");
  return {
      {"seed", cfg.seed},
      {"model", model},
      {"train",
       {{"learning_rate", cfg.train.learning_rate},
        {"batch_size", cfg.train.batch_size},
        {"epochs", cfg.train.epochs},
        {"validation_split", cfg.train.validation_split},
        {"beta1", cfg.train.beta1},
        {"beta2", cfg.train.beta2},
        {"eps", cfg.train.eps},
        {"shuffle", cfg.train.shuffle}}},
      {"eval", {{"k", cfg.eval.k}, {"n_negatives", cfg.eval.n_negatives}, {"threshold", cfg.eval.threshold}}},
      {"data",
       {{"interactions", cfg.data.interactions},
        {"vocabulary", cfg.data.vocabulary},
        {"max_vocab", cfg.data.max_vocab}}},
  };
}

nlohmann::ordered_json to_json(const MetricReport& r) {
  return {
      {"recall", r.recall},
      {"hit_ratio_at_k", r.hit_ratio_at_k},
      {"k", r.k},
      {"hits", r.hits},
      {"users_evaluated", r.users_evaluated},
      {"tp", r.confusion.true_positive},
      {"fn", r.confusion.false_negative},
      {"tn", r.confusion.true_negative},
      {"fp", r.confusion.false_positive},
  };
}

const std::string& run_config_schema() {
  static const std::string schema = R"(RunConfig (JSON; every key optional, unknown keys rejected):
{
  "seed": 0,
  "model": {
    "variant": "hybrid",            // ncf | text_ncf | hybrid
    "user_dim": 32, "item_dim": 32,
    "text":  {"layers": 2, "hidden": 64, "heads": 2, "max_len": 64,
              "use_positional": true, "trainable": true},
    "image": {"height": 32, "width": 32,
              "blocks": [{"channels": 8, "convs": 2}, {"channels": 16, "convs": 2}],
              "frozen_conv": true, "head_dim": 32},
    "fusion_widths": [256, 128, 64],
    "dropout_rate": 0.2
  },
  "train": {"learning_rate": 0.001, "batch_size": 8, "epochs": 25, "validation_split": 0.2,
            "beta1": 0.9, "beta2": 0.999, "eps": 1e-8, "shuffle": true},
  "eval":  {"k": 10, "n_negatives": 99, "threshold": 0.5},
  "data":  {"interactions": "interactions.csv", "vocabulary": "vocab.txt", "max_vocab": 5000}
}
)";
  return schema;
}

}  // namespace hncf
