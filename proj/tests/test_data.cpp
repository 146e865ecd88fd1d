#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <map>
#include <sstream>

#include <unistd.h>

#include "hncf/csv.hpp"
#include "hncf/data.hpp"
#include "hncf/error.hpp"
#include "hncf/log.hpp"

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

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_interactions(in);
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("hncf_data_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const char* kHeader = "user_id,item_id,interaction,image_path,features_text\n";

}  // namespace

TEST_CASE("csv reader handles quoting") {
  std::istringstream in("a,\"b,c\",\"say \"\"hi\"\"\"\n1,\"two\nlines\",3\n");
  auto rows = csv::read(in);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].fields == std::vector<std::string>{"a", "b,c", "say \"hi\""});
  CHECK(rows[1].fields[1] == "two\nlines");
  CHECK(rows[1].line == 2);
  std::istringstream bad("a,\"open\n");
  CHECK(kind_of([&] { csv::read(bad); }) == ErrorKind::MalformedRow);
  CHECK(csv::escape("x,y") == "\"x,y\"");
  CHECK(csv::escape("plain") == "plain");
}

TEST_CASE("load_interactions examples") {
  auto d = parse(std::string(kHeader) + "1,10,1,a.ppm,one\n2,10,0,a.ppm,one\n1,11,1,b.ppm,\"two, three\"\n");
  CHECK(d.size() == 3);
  CHECK(d.stats() == DatasetStats{3, 2, 2, 2, 1});
  CHECK(d.records()[2].features_text == "two, three");
  CHECK(d.index().user(2) == 1);
  CHECK(d.index().item(11) == 1);

  auto dup = parse(std::string(kHeader) + "1,10,1,a.ppm,x\n1,10,1,a.ppm,x\n");
  CHECK(dup.size() == 2);

  // columns in any order plus timestamp
  auto re = parse("features_text,timestamp,interaction,item_id,image_path,user_id\nhello,5,1,3,p.ppm,9\n");
  CHECK(re.records()[0].user_id == 9);
  CHECK(re.records()[0].timestamp == 5);

  try {
    parse(std::string(kHeader) + "1,10,1,a.ppm,x\n1,10,2,a.ppm,x\n");
    FAIL("expected MalformedRow");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MalformedRow);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK(kind_of([&] { parse(std::string(kHeader) + "x,10,1,a.ppm,x\n"); }) == ErrorKind::MalformedRow);
  CHECK(kind_of([&] { parse(std::string(kHeader) + "-1,10,1,a.ppm,x\n"); }) == ErrorKind::MalformedRow);
  CHECK(kind_of([&] { parse(std::string(kHeader) + "1,10,1\n"); }) == ErrorKind::MalformedRow);
  CHECK(kind_of([&] { parse("user_id,item_id,interaction,features_text\n1,2,1,x\n"); }) == ErrorKind::MissingColumn);
  CHECK(kind_of([&] { parse(""); }) == ErrorKind::EmptyFile);
  CHECK(kind_of([&] { parse(kHeader); }) == ErrorKind::EmptyFile);
  CHECK(kind_of([&] { load_interactions("/nonexistent/interactions.csv"); }) == ErrorKind::FileNotFound);
}

TEST_CASE("interactions csv round-trip") {
  TempDir dir;
  auto d = parse("user_id,item_id,interaction,image_path,features_text,timestamp\n"
                 "1,10,1,a.ppm,\"quote \"\" and, comma\",3\n2,11,0,b.ppm,plain,\n");
  save_interactions(d, dir.path / "i.csv");
  CHECK(load_interactions(dir.path / "i.csv").records() == d.records());
}

TEST_CASE("stats are recomputable from records") {
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<int> id(0, 20), bit(0, 1);
  std::vector<InteractionRecord> recs;
  for (int i = 0; i < 300; ++i) recs.push_back({id(gen), id(gen), bit(gen), "", "", {}});
  Dataset d(recs);
  CHECK(d.stats() == compute_stats(d.records()));
  std::set<std::int64_t> u, it;
  std::size_t pos = 0;
  for (auto& r : recs) {
    u.insert(r.user_id);
    it.insert(r.item_id);
    pos += r.interaction;
  }
  CHECK(d.stats() == DatasetStats{300, u.size(), it.size(), pos, 300 - pos});
}

TEST_CASE("preprocess_text examples") {
  CHECK(preprocess_text("The Matrix (1999)!") == "matrix 1999");
  CHECK(preprocess_text("") == "");
  CHECK(preprocess_text("ACTION") == "action");
  CHECK(preprocess_text("  sci-fi\t\tand   drama ") == "sci fi drama");
  auto custom = parse_stop_words("foo\nbar\n");
  CHECK(preprocess_text("Foo baz BAR", custom) == "baz");
}

TEST_CASE("preprocess_text is idempotent on random strings") {
  std::mt19937_64 gen(99);
  const std::string alphabet = "abcXYZ019 \t\n!?.,()-_'\"é&THEthe andAND";
  std::uniform_int_distribution<std::size_t> len(0, 40), pick(0, alphabet.size() - 1);
  for (int i = 0; i < 500; ++i) {
    std::string s;
    for (std::size_t n = len(gen); n > 0; --n) s += alphabet[pick(gen)];
    const auto once = preprocess_text(s);
    CHECK(preprocess_text(once) == once);
  }
}

TEST_CASE("preprocess_image examples") {
  TempDir dir;
  RgbImage gray{5, 3, std::vector<std::uint8_t>(45, 77)};
  write_ppm(gray, dir.path / "gray.ppm");
  auto g = preprocess_image(dir.path / "gray.ppm", 4, 7);
  CHECK(g.shape() == Shape{4, 7, 3});
  for (double v : g.values()) CHECK(v == 77.0 / 255.0);

  RgbImage white{2, 2, std::vector<std::uint8_t>(12, 255)};
  write_ppm(white, dir.path / "white.ppm");
  const auto w = preprocess_image(dir.path / "white.ppm", 3, 3);
  for (double v : w.values()) CHECK(v == 1.0);

  // 4×4 checkerboard: rows/cols 0 and 2 are sampled when shrinking to 2×2.
  RgbImage board{4, 4, std::vector<std::uint8_t>(48)};
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      for (std::size_t c = 0; c < 3; ++c) board.at(y, x, c) = static_cast<std::uint8_t>(y * 40 + x * 10 + c);
  write_ppm(board, dir.path / "board.ppm");
  auto small = preprocess_image(dir.path / "board.ppm", 2, 2);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        CHECK(small.at((y * 2 + x) * 3 + c) == board.at(y * 2, x * 2, c) / 255.0);

  CHECK(kind_of([&] { preprocess_image(dir.path / "missing.ppm", 2, 2); }) == ErrorKind::FileNotFound);
  std::ofstream(dir.path / "bad.ppm") << "P3\n1 1\n255\n0 0 0\n";
  CHECK(kind_of([&] { preprocess_image(dir.path / "bad.ppm", 2, 2); }) == ErrorKind::DecodeError);
  std::ofstream(dir.path / "short.ppm", std::ios::binary) << "P6\n4 4\n255\n" << std::string(5, 'x');
  CHECK(kind_of([&] { preprocess_image(dir.path / "short.ppm", 2, 2); }) == ErrorKind::DecodeError);
}

TEST_CASE("ppm round-trip with header comments") {
  TempDir dir;
  RgbImage img{3, 2, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18}};
  write_ppm(img, dir.path / "a.ppm");
  CHECK(read_ppm(dir.path / "a.ppm") == img);
  {
    std::ofstream out(dir.path / "c.ppm", std::ios::binary);
    out << "P6\n# comment\n3 2\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), 18);
  }
  CHECK(read_ppm(dir.path / "c.ppm") == img);
}

TEST_CASE("image store caches fresh decodes") {
  TempDir dir;
  RgbImage img{2, 2, {0, 50, 100, 150, 200, 250, 10, 20, 30, 40, 60, 80}};
  write_ppm(img, dir.path / "p.ppm");
  ImageStore store(dir.path, 4, 4);
  auto a = store.get("p.ppm");
  auto b = store.get("p.ppm");
  CHECK(a.id() == b.id());
  auto fresh = preprocess_image(dir.path / "p.ppm", 4, 4);
  CHECK(std::vector<double>(a.values().begin(), a.values().end()) ==
        std::vector<double>(fresh.values().begin(), fresh.values().end()));
}

TEST_CASE("sample_fraction") {
  std::vector<InteractionRecord> recs;
  for (int i = 0; i < 1000; ++i) recs.push_back({i % 37, i, i % 2, "", "", {}});
  Dataset d(recs);
  auto s = sample_fraction(d, 0.01, 3);
  CHECK(s.size() == 10);
  CHECK(s.records() == sample_fraction(d, 0.01, 3).records());
  CHECK(s.stats() == compute_stats(s.records()));
  auto all = sample_fraction(d, 1.0, 3);
  auto sorted = all.records();
  std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.item_id < b.item_id; });
  CHECK(sorted == d.records());
  CHECK(kind_of([&] { sample_fraction(d, 0.0, 1); }) == ErrorKind::InvalidParam);
  CHECK(kind_of([&] { sample_fraction(d, 1.5, 1); }) == ErrorKind::InvalidParam);
}

TEST_CASE("generate_negatives examples") {
  // user 1 saw A; user 2 saw B and C, so the catalogue is {A,B,C}.
  Dataset d({{1, 100, 1, "a", "a.ppm", {}}, {2, 200, 1, "b", "b.ppm", {}}, {2, 300, 1, "c", "c.ppm", {}}});
  CHECK(generate_negatives(d, 0, 1).records() == d.records());

  auto n = generate_negatives(d, 2, 1);
  std::set<std::int64_t> user1;
  for (const auto& r : n.records())
    if (r.user_id == 1 && r.interaction == 0) {
      user1.insert(r.item_id);
      CHECK(r.features_text == (r.item_id == 200 ? "b" : "c"));
    }
  CHECK(user1 == std::set<std::int64_t>{200, 300});

  Dataset full({{1, 100, 1, "", "", {}}, {1, 200, 1, "", "", {}}});
  CHECK(kind_of([&] { generate_negatives(full, 1, 1); }) == ErrorKind::ExhaustedCandidates);
}

TEST_CASE("generate_negatives properties") {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> user(0, 9), item(0, 59);
  std::vector<InteractionRecord> recs;
  for (int i = 0; i < 40; ++i) recs.push_back({user(gen), item(gen), 1, "", "", {}});
  for (int i = 0; i < 60; ++i) recs.push_back({0, i, 0, "", "", {}});  // catalogue, unobserved by others
  Dataset d(recs);
  std::vector<std::string> warnings;
  set_warning_sink([&](std::string_view w) { warnings.emplace_back(w); });
  auto n = generate_negatives(d, 4, 7);
  set_warning_sink({});
  CHECK(n.records() == generate_negatives(d, 4, 7).records());

  std::set<std::pair<std::int64_t, std::int64_t>> positives;
  std::map<std::int64_t, std::size_t> pos_count;
  for (auto& r : recs)
    if (r.interaction == 1 && positives.insert({r.user_id, r.item_id}).second) {}
  for (auto& r : recs)
    if (r.interaction == 1) ++pos_count[r.user_id];
  std::map<std::int64_t, std::set<std::int64_t>> neg;
  std::size_t added = 0;
  for (std::size_t i = d.size(); i < n.size(); ++i) {
    const auto& r = n.records()[i];
    CHECK(r.interaction == 0);
    CHECK(positives.count({r.user_id, r.item_id}) == 0);
    CHECK(neg[r.user_id].insert(r.item_id).second);
    ++added;
  }
  std::size_t want = 0;
  for (auto& [u, c] : pos_count) {
    std::set<std::int64_t> mine;
    for (auto& p : positives)
      if (p.first == u) mine.insert(p.second);
    want += std::min<std::size_t>(4 * c, 60 - mine.size());
  }
  CHECK(added == want);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(n.records()[i] == d.records()[i]);
}

TEST_CASE("synth_generate") {
  auto a = synth_generate(40, 30, 9);
  auto b = synth_generate(40, 30, 9);
  CHECK(a.dataset.records() == b.dataset.records());
  CHECK(a.images == b.images);
  CHECK(a.dataset.records() != synth_generate(40, 30, 10).dataset.records());
  CHECK(a.dataset.index().user_count() == 40);
  CHECK(a.dataset.index().item_count() <= 30);
  CHECK(kind_of([&] { synth_generate(1, 5, 1); }) == ErrorKind::InvalidParam);

  for (std::size_t i = 0; i < a.dataset.index().item_count(); ++i) {
    const auto text = preprocess_text(a.dataset.index().item_info(i).features_text);
    int hits = 0;
    std::istringstream ws(text);
    for (std::string w; ws >> w;)
      for (auto kw : kTopicKeywords) hits += w == kw;
    CHECK(hits == 1);
    const auto& img = a.images.at(a.dataset.index().item_info(i).image_path);
    CHECK(img.width == 32);
    CHECK(img.height == 32);
    double red = 0, blue = 0;
    for (std::size_t p = 0; p < img.pixels.size(); p += 3) {
      red += img.pixels[p];
      blue += img.pixels[p + 2];
    }
    CHECK((a.item_topic[i] == 0 ? red > blue : blue > red));
  }

  // class balance within 5 points of the configured rate
  auto big = synth_generate(200, 100, 4);
  REQUIRE(big.dataset.size() >= 500);
  const double rate = static_cast<double>(big.dataset.stats().positives) / big.dataset.size();
  CHECK(std::abs(rate - big.expected_positive_rate) <= 0.05);
}

TEST_CASE("synth data written to disk loads back") {
  TempDir dir;
  auto s = synth_generate(5, 6, 2);
  write_synth(s, dir.path);
  auto d = load_interactions(dir.path / kInteractionsFile);
  CHECK(d.records() == s.dataset.records());
  ImageStore store(dir.path, 32, 32);
  const auto& path = d.index().item_info(0).image_path;
  auto t = store.get(path);
  CHECK(t.shape() == Shape{32, 32, 3});
  const auto direct = image_to_tensor(s.images.at(path), 32, 32);
  CHECK(std::equal(t.values().begin(), t.values().end(), direct.values().begin(), direct.values().end()));
}
