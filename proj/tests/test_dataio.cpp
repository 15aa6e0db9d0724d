#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "scrawl/dataio.hpp"
#include "scrawl/errors.hpp"

using namespace scrawl;
namespace fs = std::filesystem;

namespace {

const GlyphTable& test_font() {
  static const GlyphTable font =
      load_hex_font(SCRAWL_SOURCE_DIR "/data/fonts/scrawl8x16.hex");
  return font;
}

fs::path tmp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("scrawl_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  f << content;
}

// minimal 8-bit grayscale PNG writer (filter 0 rows, single IDAT)
std::string make_png(int w, int h, const std::vector<unsigned char>& gray) {
  auto be32 = [](uint32_t v) {
    std::string s(4, '\0');
    s[0] = char(v >> 24);
    s[1] = char(v >> 16);
    s[2] = char(v >> 8);
    s[3] = char(v);
    return s;
  };
  auto chunk = [&](const std::string& type, const std::string& data) {
    std::string payload = type + data;
    const uint32_t crc =
        uint32_t(crc32(0, reinterpret_cast<const Bytef*>(payload.data()),
                       uInt(payload.size())));
    return be32(uint32_t(data.size())) + payload + be32(crc);
  };
  std::string ihdr = be32(uint32_t(w)) + be32(uint32_t(h));
  ihdr += char(8);  // bit depth
  ihdr += char(0);  // color type gray
  ihdr += std::string(3, '\0');
  std::string raw;
  for (int y = 0; y < h; ++y) {
    raw += '\0';  // filter none
    raw.append(reinterpret_cast<const char*>(gray.data() + size_t(y) * size_t(w)),
               size_t(w));
  }
  uLongf comp_len = compressBound(uLong(raw.size()));
  std::string comp(comp_len, '\0');
  compress(reinterpret_cast<Bytef*>(comp.data()), &comp_len,
           reinterpret_cast<const Bytef*>(raw.data()), uLong(raw.size()));
  comp.resize(comp_len);
  std::string png = "\x89PNG\r\n\x1a\n";
  png += chunk("IHDR", ihdr) + chunk("IDAT", comp) + chunk("IEND", "");
  return png;
}

}  // namespace

TEST_SUITE_BEGIN("dataio");

TEST_CASE("manifest writer ids follow first appearance order") {
  fs::path dir = tmp_dir("manifest");
  write_file(dir / "m.jsonl",
             R"({"image":"a.pgm","text":"ab","writer":"w2"})"
             "\n"
             R"({"image":"b.pgm","text":"cd","writer":"w1"})"
             "\n"
             R"({"image":"c.pgm","text":"ef","writer":"w2"})"
             "\n");
  Manifest m = load_manifest((dir / "m.jsonl").string());
  REQUIRE(m.samples.size() == 3);
  CHECK(m.samples[0].writer_id == 0);
  CHECK(m.samples[1].writer_id == 1);
  CHECK(m.samples[2].writer_id == 0);
  CHECK(m.writer_tags == std::vector<std::string>{"w2", "w1"});
  // image paths resolved relative to the manifest directory
  CHECK(m.samples[0].image_path == (dir / "a.pgm").string());
}

TEST_CASE("manifest errors carry line numbers; duplicates are kept") {
  fs::path dir = tmp_dir("manifest_err");
  write_file(dir / "empty.jsonl", "");
  CHECK_THROWS_AS(load_manifest((dir / "empty.jsonl").string()), DataError);

  write_file(dir / "missing.jsonl",
             R"({"image":"a.pgm","text":"ab","writer":"w1"})"
             "\n"
             R"({"image":"b.pgm","text":"cd"})"
             "\n");
  try {
    load_manifest((dir / "missing.jsonl").string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }

  write_file(dir / "dup.jsonl",
             R"({"image":"a.pgm","text":"ab","writer":"w1"})"
             "\n"
             R"({"image":"a.pgm","text":"ab","writer":"w1"})"
             "\n");
  CHECK(load_manifest((dir / "dup.jsonl").string()).samples.size() == 2);
}

TEST_CASE("preprocess geometry: 64x160 at L=5 becomes 32x80") {
  GrayImage raw;
  raw.h = 64;
  raw.w = 160;
  raw.pix.assign(64 * 160, 255.0f);
  Tensor<float> out = preprocess_image(raw, 5);
  CHECK(out.shape() == std::vector<int>{1, 32, 80});
  for (size_t i = 0; i < out.size(); ++i)
    CHECK(out[i] == doctest::Approx(1.0f));  // constant white -> +1
}

TEST_CASE("preprocess at target size is the pure affine value map") {
  Rng rng(1);
  GrayImage raw;
  raw.h = 32;
  raw.w = 48;  // L=3 target
  raw.pix.resize(32 * 48);
  for (auto& p : raw.pix) p = float(rng.next_index(256));
  Tensor<float> out = preprocess_image(raw, 3);
  REQUIRE(out.shape() == std::vector<int>{1, 32, 48});
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 48; ++x)
      CHECK(out.at3(0, y, x) ==
            doctest::Approx(2.0f * raw.at(y, x) / 255.0f - 1.0f).epsilon(1e-6));
}

TEST_CASE("preprocess rejects empty input") {
  GrayImage raw;
  CHECK_THROWS_AS(preprocess_image(raw, 1), DataError);
}

TEST_CASE("pad_or_truncate_eval pads white, truncates right, idempotent") {
  Rng rng(2);
  Tensor<float> narrow = Tensor<float>::randn({1, 32, 100}, rng, 0.3f);
  Tensor<float> padded = pad_or_truncate_eval(narrow);
  CHECK(padded.shape() == std::vector<int>{1, 32, 128});
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 100; ++x) CHECK(padded.at3(0, y, x) == narrow.at3(0, y, x));
    for (int x = 100; x < 128; ++x) CHECK(padded.at3(0, y, x) == 1.0f);
  }

  Tensor<float> wide = Tensor<float>::randn({1, 32, 200}, rng, 0.3f);
  Tensor<float> cut = pad_or_truncate_eval(wide);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 128; ++x) CHECK(cut.at3(0, y, x) == wide.at3(0, y, x));

  Tensor<float> exact = Tensor<float>::randn({1, 32, 128}, rng, 0.3f);
  CHECK(bit_equal(pad_or_truncate_eval(exact), exact));
  CHECK(bit_equal(pad_or_truncate_eval(pad_or_truncate_eval(narrow)), padded));
}

TEST_CASE("pgm round trip and png decode agree with the source pixels") {
  fs::path dir = tmp_dir("img");
  GrayImage img;
  img.h = 8;
  img.w = 12;
  img.pix.resize(8 * 12);
  Rng rng(3);
  for (auto& p : img.pix) p = float(rng.next_index(256));
  write_pgm((dir / "x.pgm").string(), img);
  GrayImage back = read_gray_image((dir / "x.pgm").string());
  REQUIRE(back.h == 8);
  REQUIRE(back.w == 12);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 12; ++x)
      CHECK(back.at(y, x) == doctest::Approx(img.at(y, x)).epsilon(0.01));

  std::vector<unsigned char> gray(8 * 12);
  for (size_t i = 0; i < gray.size(); ++i) gray[i] = (unsigned char)img.pix[i];
  write_file(dir / "x.png", make_png(12, 8, gray));
  GrayImage png = read_gray_image((dir / "x.png").string());
  REQUIRE(png.h == 8);
  REQUIRE(png.w == 12);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 12; ++x) CHECK(png.at(y, x) == doctest::Approx(img.at(y, x)));

  CHECK_THROWS_AS(read_gray_image((dir / "missing.pgm").string()), DataError);
  write_file(dir / "junk.bin", "not an image");
  CHECK_THROWS_AS(read_gray_image((dir / "junk.bin").string()), DataError);
}

TEST_CASE("style set sampling: distinct draws, replacement fallback, determinism") {
  fs::path dir = tmp_dir("style");
  fs::create_directories(dir / "images");
  std::ofstream mf(dir / "m.jsonl");
  GrayImage img;
  img.h = 32;
  img.w = 32;
  img.pix.assign(32 * 32, 200.0f);
  for (int i = 0; i < 20; ++i) {
    std::string name = "images/a" + std::to_string(i) + ".pgm";
    img.pix[size_t(i)] = float(i);  // make files distinct
    write_pgm((dir / name).string(), img);
    append_manifest_line(mf, name, "ab", "w0");
  }
  write_pgm((dir / "images/solo.pgm").string(), img);
  append_manifest_line(mf, "images/solo.pgm", "cd", "w1");
  mf.close();
  Manifest m = load_manifest((dir / "m.jsonl").string());

  StyleSet s15 = sample_style_set(m, 0, 15, 99);
  CHECK(s15.images.size() == 15);
  int distinct = 0;
  for (size_t i = 0; i < s15.images.size(); ++i)
    for (size_t j = i + 1; j < s15.images.size(); ++j)
      if (!bit_equal(s15.images[i], s15.images[j])) ++distinct;
  CHECK(distinct == 15 * 14 / 2);  // all pairwise distinct

  StyleSet s1 = sample_style_set(m, 1, 1, 5);
  CHECK(s1.images.size() == 1);

  StyleSet again = sample_style_set(m, 0, 15, 99);
  for (size_t i = 0; i < 15; ++i) CHECK(bit_equal(s15.images[i], again.images[i]));

  StyleSet over = sample_style_set(m, 1, 3, 1);  // replacement path
  CHECK(over.images.size() == 3);
  CHECK_THROWS_AS(sample_style_set(m, 7, 1, 1), DataError);
}

TEST_CASE("eval grid partitions by vocabulary and writer, case-sensitive") {
  std::vector<Sample> samples = {
      {"p0", "the", 0}, {"p1", "the", 1}, {"p2", "The", 0},
      {"p3", "cat", 1}, {"p4", "dog", 0},
  };
  SplitSpec split;
  split.train_writers = {0};
  split.test_writers = {1};
  split.train_vocab = {"the", "dog"};
  EvalGrid grid = build_eval_grid(split, samples);
  CHECK(grid.pools[0].size() == 2);  // IV-S: (the,0), (dog,0)
  CHECK(grid.pools[1].size() == 1);  // IV-U: (the,1)
  CHECK(grid.pools[2].size() == 1);  // OOV-S: (The,0) case-sensitive miss
  CHECK(grid.pools[3].size() == 1);  // OOV-U: (cat,1)
  size_t total = 0;
  for (int p = 0; p < 4; ++p) total += grid.pools[p].size();
  CHECK(total == samples.size());
}

TEST_CASE("split file round trip and validation") {
  fs::path dir = tmp_dir("split");
  write_file(dir / "m.jsonl",
             R"({"image":"a.pgm","text":"ab","writer":"w0"})"
             "\n"
             R"({"image":"b.pgm","text":"cd","writer":"w1"})"
             "\n");
  Manifest m = load_manifest((dir / "m.jsonl").string());
  SplitSpec split;
  split.train_writers = {0};
  split.test_writers = {1};
  split.train_vocab = {"ab", "xy"};
  save_split((dir / "s.txt").string(), m, split);
  SplitSpec back = load_split((dir / "s.txt").string(), m);
  CHECK(back.train_writers == split.train_writers);
  CHECK(back.test_writers == split.test_writers);
  CHECK(back.train_vocab == split.train_vocab);

  write_file(dir / "bad.txt", "[train_writers]\nnosuch\n");
  CHECK_THROWS_AS(load_split((dir / "bad.txt").string(), m), ParseError);
  write_file(dir / "overlap.txt", "[train_writers]\nw0\n[test_writers]\nw0\n");
  CHECK_THROWS_AS(load_split((dir / "overlap.txt").string(), m), DataError);
}

TEST_CASE("grapheme count matches the 16px-per-token width rule") {
  CHECK(grapheme_count("hello") == 5);
  CHECK(grapheme_count("\xE1\xBB\x87") == 1);              // ệ precomposed
  CHECK(grapheme_count("e\xCC\xA3\xCC\x82") == 1);         // e + marks
  CHECK(grapheme_count("ng\xC6\xB0\xE1\xBB\x9Di") == 5);   // người
}

TEST_CASE("synthetic corpus: loadable, distinct writer styles") {
  fs::path dir = tmp_dir("corpus");
  CorpusSpec spec = smoke_corpus_spec();
  spec.words = {"an", "bat", "cab"};
  spec.repetitions = 2;
  const std::string manifest_path = make_corpus(dir.string(), test_font(), spec);
  Manifest m = load_manifest(manifest_path);
  CHECK(m.samples.size() == 3 * 2 * 2);
  CHECK(m.n_writers() == 2);
  SplitSpec split = load_split((dir / "split.txt").string(), m);
  CHECK(split.train_writers.size() == 2);
  CHECK(split.train_vocab.size() == 3);

  // same word, two writers: preprocessed images differ substantially
  Tensor<float> w0, w1;
  for (const Sample& s : m.samples) {
    if (s.transcript != "bat") continue;
    if (s.writer_id == 0 && !w0.defined()) w0 = load_preprocessed(s);
    if (s.writer_id == 1 && !w1.defined()) w1 = load_preprocessed(s);
  }
  REQUIRE(w0.defined());
  REQUIRE(w1.defined());
  double mad = 0;
  for (size_t i = 0; i < w0.size(); ++i) mad += std::abs(w0[i] - w1[i]);
  mad /= double(w0.size());
  CHECK(mad > 0.05);

  // corpus regeneration is byte-stable under the same spec
  fs::path dir2 = tmp_dir("corpus2");
  make_corpus(dir2.string(), test_font(), spec);
  std::ifstream f1(dir / "images" / "w0_bat_0.pgm", std::ios::binary);
  std::ifstream f2(dir2 / "images" / "w0_bat_0.pgm", std::ios::binary);
  std::string c1((std::istreambuf_iterator<char>(f1)), {});
  std::string c2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(c1 == c2);
  CHECK(!c1.empty());
}

TEST_SUITE_END();
