#include "scrawl/dataio.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "scrawl/errors.hpp"
#include "scrawl/unicode.hpp"

namespace scrawl {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// manifest

Manifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open manifest: " + path);
  const fs::path base = fs::path(path).parent_path();

  Manifest m;
  std::map<std::string, int> tag_to_id;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("manifest: bad JSON: ") + e.what(), line_no);
    }
    for (const char* field : {"image", "text", "writer"})
      if (!rec.contains(field))
        throw ParseError(std::string("manifest: missing field '") + field + "'",
                         line_no);
    Sample s;
    const std::string rel = rec["image"].get<std::string>();
    s.image_path = fs::path(rel).is_absolute() ? rel : (base / rel).string();
    s.transcript = nfc_normalize_utf8(rec["text"].get<std::string>());
    if (s.transcript.empty())
      throw ParseError("manifest: empty transcript", line_no);
    const std::string tag = rec["writer"].is_string()
                                ? rec["writer"].get<std::string>()
                                : rec["writer"].dump();
    auto [it, inserted] = tag_to_id.try_emplace(tag, int(m.writer_tags.size()));
    if (inserted) m.writer_tags.push_back(tag);
    s.writer_id = it->second;
    m.samples.push_back(std::move(s));
  }
  if (m.samples.empty()) throw DataError("manifest is empty: " + path);
  return m;
}

void append_manifest_line(std::ostream& out, const std::string& image,
                          const std::string& text, const std::string& writer) {
  json rec;
  rec["image"] = image;
  rec["text"] = text;
  rec["writer"] = writer;
  out << rec.dump() << "\n";
}

// ---------------------------------------------------------------------------
// image IO

namespace {

GrayImage read_pgm(std::ifstream& f, const std::string& path) {
  auto next_token = [&]() -> std::string {
    std::string tok;
    int c;
    while ((c = f.get()) != EOF) {
      if (c == '#') {  // comment to end of line
        while ((c = f.get()) != EOF && c != '\n') {
        }
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(char(c));
    }
    return tok;
  };
  if (next_token() != "P5") throw DataError("not a P5 PGM: " + path);
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (w <= 0 || h <= 0) throw DataError("PGM with nonpositive dimensions: " + path);
  if (maxval <= 0 || maxval > 255)
    throw DataError("PGM maxval out of supported range: " + path);
  GrayImage img;
  img.h = h;
  img.w = w;
  img.pix.resize(size_t(h) * size_t(w));
  std::vector<unsigned char> row;
  row.resize(size_t(w));
  for (int y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()), w);
    if (f.gcount() != w) throw DataError("truncated PGM payload: " + path);
    for (int x = 0; x < w; ++x)
      img.at(y, x) = float(row[size_t(x)]) * 255.0f / float(maxval);
  }
  return img;
}

uint32_t be32(const unsigned char* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) |
         uint32_t(p[3]);
}

GrayImage read_png(std::ifstream& f, const std::string& path) {
  unsigned char sig[8];
  f.read(reinterpret_cast<char*>(sig), 8);
  static const unsigned char kMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (f.gcount() != 8 || std::memcmp(sig, kMagic, 8) != 0)
    throw DataError("not a PNG file: " + path);

  int w = 0, h = 0, bit_depth = 0, color_type = 0;
  std::vector<unsigned char> idat;
  bool seen_ihdr = false, seen_iend = false;
  while (!seen_iend) {
    unsigned char head[8];
    f.read(reinterpret_cast<char*>(head), 8);
    if (f.gcount() != 8) throw DataError("truncated PNG chunk header: " + path);
    const uint32_t len = be32(head);
    const std::string type(reinterpret_cast<char*>(head + 4), 4);
    std::vector<unsigned char> data(len);
    if (len) {
      f.read(reinterpret_cast<char*>(data.data()), std::streamsize(len));
      if (uint32_t(f.gcount()) != len) throw DataError("truncated PNG chunk: " + path);
    }
    f.ignore(4);  // crc, not verified
    if (type == "IHDR") {
      if (len != 13) throw DataError("bad IHDR: " + path);
      w = int(be32(data.data()));
      h = int(be32(data.data() + 4));
      bit_depth = data[8];
      color_type = data[9];
      if (data[10] != 0 || data[11] != 0)
        throw DataError("unsupported PNG compression/filter method: " + path);
      if (data[12] != 0) throw DataError("interlaced PNG unsupported: " + path);
      if (bit_depth != 8)
        throw DataError("only 8-bit PNG supported: " + path);
      if (color_type != 0 && color_type != 2 && color_type != 4 && color_type != 6)
        throw DataError("palette PNG unsupported: " + path);
      seen_ihdr = true;
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data.begin(), data.end());
    } else if (type == "IEND") {
      seen_iend = true;
    }
  }
  if (!seen_ihdr || w <= 0 || h <= 0) throw DataError("PNG missing IHDR: " + path);

  const int channels = color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 4 ? 2 : 4;
  const size_t stride = size_t(w) * size_t(channels);
  std::vector<unsigned char> raw(size_t(h) * (stride + 1));
  {
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) throw DataError("zlib init failed");
    zs.next_in = idat.data();
    zs.avail_in = uInt(idat.size());
    zs.next_out = raw.data();
    zs.avail_out = uInt(raw.size());
    const int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != raw.size())
      throw DataError("PNG inflate failed: " + path);
  }

  // defilter
  std::vector<unsigned char> pix(size_t(h) * stride);
  const int bpp = channels;
  for (int y = 0; y < h; ++y) {
    const unsigned char filter = raw[size_t(y) * (stride + 1)];
    const unsigned char* src = raw.data() + size_t(y) * (stride + 1) + 1;
    unsigned char* dst = pix.data() + size_t(y) * stride;
    const unsigned char* prev = y > 0 ? pix.data() + size_t(y - 1) * stride : nullptr;
    for (size_t i = 0; i < stride; ++i) {
      const int a = i >= size_t(bpp) ? dst[i - size_t(bpp)] : 0;
      const int b = prev ? prev[i] : 0;
      const int c = (prev && i >= size_t(bpp)) ? prev[i - size_t(bpp)] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: {
          const int p = a + b - c;
          const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
          v += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
          break;
        }
        default: throw DataError("bad PNG filter type: " + path);
      }
      dst[i] = (unsigned char)(v & 0xFF);
    }
  }

  GrayImage img;
  img.h = h;
  img.w = w;
  img.pix.resize(size_t(h) * size_t(w));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const unsigned char* px = pix.data() + size_t(y) * stride + size_t(x) * size_t(bpp);
      float v;
      float alpha = 1.0f;
      if (channels == 1) {
        v = px[0];
      } else if (channels == 2) {
        v = px[0];
        alpha = px[1] / 255.0f;
      } else if (channels == 3) {
        v = 0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2];
      } else {
        v = 0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2];
        alpha = px[3] / 255.0f;
      }
      img.at(y, x) = alpha * v + (1.0f - alpha) * 255.0f;  // composite over white
    }
  return img;
}

}  // namespace

GrayImage read_gray_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open image: " + path);
  const int c0 = f.peek();
  if (c0 == 'P') return read_pgm(f, path);
  if (c0 == 0x89) return read_png(f, path);
  throw DataError("unrecognized image format (want PGM P5 or PNG): " + path);
}

void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write image: " + path);
  f << "P5\n" << img.w << " " << img.h << "\n255\n";
  std::vector<unsigned char> row(size_t(img.w));
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      const float v = std::clamp(img.at(y, x), 0.0f, 255.0f);
      row[size_t(x)] = (unsigned char)std::lround(v);
    }
    f.write(reinterpret_cast<const char*>(row.data()), img.w);
  }
}

GrayImage tensor_to_gray(const Tensor<float>& img) {
  if (img.rank() != 3 || img.dim(0) != 1)
    throw DataError("tensor_to_gray: want [1,H,W], got " + img.shape_str());
  GrayImage g;
  g.h = img.dim(1);
  g.w = img.dim(2);
  g.pix.resize(size_t(g.h) * size_t(g.w));
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x)
      g.at(y, x) = (img.at3(0, y, x) + 1.0f) * 0.5f * 255.0f;
  return g;
}

void write_image_tensor(const std::string& path, const Tensor<float>& img) {
  write_pgm(path, tensor_to_gray(img));
}

// ---------------------------------------------------------------------------
// preprocessing

int grapheme_count(const std::string& text) {
  const auto cps = nfc_normalize(utf8_decode(text));
  int n = 0;
  for (size_t i = 0; i < cps.size(); ++i) {
    if (is_combining_mark(cps[i]) && i > 0) continue;
    ++n;
  }
  return n;
}

Tensor<float> preprocess_image(const GrayImage& raw, int transcript_len) {
  if (raw.h <= 0 || raw.w <= 0)
    throw DataError("preprocess_image: empty input image");
  if (transcript_len < 1)
    throw DataError("preprocess_image: transcript length must be >= 1");
  const int oh = 32, ow = 16 * transcript_len;
  Tensor<float> out({1, oh, ow});
  const float sy = float(raw.h) / float(oh);
  const float sx = float(raw.w) / float(ow);
  for (int y = 0; y < oh; ++y) {
    // align-corners=false source coordinates
    const float fy = std::clamp((float(y) + 0.5f) * sy - 0.5f, 0.0f, float(raw.h - 1));
    const int y0 = int(fy);
    const int y1 = std::min(y0 + 1, raw.h - 1);
    const float wy = fy - float(y0);
    for (int x = 0; x < ow; ++x) {
      const float fx = std::clamp((float(x) + 0.5f) * sx - 0.5f, 0.0f, float(raw.w - 1));
      const int x0 = int(fx);
      const int x1 = std::min(x0 + 1, raw.w - 1);
      const float wx = fx - float(x0);
      const float top = raw.at(y0, x0) * (1 - wx) + raw.at(y0, x1) * wx;
      const float bot = raw.at(y1, x0) * (1 - wx) + raw.at(y1, x1) * wx;
      const float p = top * (1 - wy) + bot * wy;
      out.at3(0, y, x) = 2.0f * (p / 255.0f) - 1.0f;  // white -> +1, ink -> -1
    }
  }
  return out;
}

Tensor<float> pad_or_truncate_eval(const Tensor<float>& img) {
  if (img.rank() != 3 || img.dim(0) != 1 || img.dim(1) != 32)
    throw DataError("pad_or_truncate_eval: want [1,32,W], got " + img.shape_str());
  const int w = img.dim(2);
  if (w == 128) return img;
  Tensor<float> out = Tensor<float>::full({1, 32, 128}, 1.0f);  // white
  const int copy_w = std::min(w, 128);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < copy_w; ++x) out.at3(0, y, x) = img.at3(0, y, x);
  return out;
}

// ---------------------------------------------------------------------------
// style sets and splits

Tensor<float> load_preprocessed(const Sample& s) {
  return preprocess_image(read_gray_image(s.image_path), grapheme_count(s.transcript));
}

StyleSet sample_style_set(const Manifest& manifest, int writer_id, int p,
                          uint64_t rng_seed) {
  if (p < 1) throw DataError("sample_style_set: P must be >= 1");
  std::vector<size_t> owned;
  for (size_t i = 0; i < manifest.samples.size(); ++i)
    if (manifest.samples[i].writer_id == writer_id) owned.push_back(i);
  if (owned.empty())
    throw DataError("sample_style_set: writer " + std::to_string(writer_id) +
                    " has no samples");
  Rng rng(rng_seed);
  std::vector<size_t> chosen;
  if (owned.size() >= size_t(p)) {
    for (size_t k : rng.sample_without_replacement(owned.size(), size_t(p)))
      chosen.push_back(owned[k]);
  } else {
    for (int i = 0; i < p; ++i) chosen.push_back(owned[rng.next_index(owned.size())]);
  }
  StyleSet set;
  set.writer_id = writer_id;
  for (size_t idx : chosen) set.images.push_back(load_preprocessed(manifest.samples[idx]));
  return set;
}

SplitSpec load_split(const std::string& path, const Manifest& manifest) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open split file: " + path);
  std::map<std::string, int> tag_to_id;
  for (int i = 0; i < manifest.n_writers(); ++i)
    tag_to_id[manifest.writer_tags[size_t(i)]] = i;

  SplitSpec split;
  std::string line, section;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line;
      if (section != "[train_writers]" && section != "[test_writers]" &&
          section != "[train_vocab]")
        throw ParseError("split: unknown section " + section, line_no);
      continue;
    }
    if (section == "[train_writers]" || section == "[test_writers]") {
      auto it = tag_to_id.find(line);
      if (it == tag_to_id.end())
        throw ParseError("split: writer tag '" + line + "' not in manifest", line_no);
      (section == "[train_writers]" ? split.train_writers : split.test_writers)
          .insert(it->second);
    } else if (section == "[train_vocab]") {
      split.train_vocab.insert(nfc_normalize_utf8(line));
    } else {
      throw ParseError("split: item before any section header", line_no);
    }
  }
  for (int w : split.train_writers)
    if (split.test_writers.count(w))
      throw DataError("split: writer sets overlap on id " + std::to_string(w));
  return split;
}

void save_split(const std::string& path, const Manifest& manifest,
                const SplitSpec& split) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write split file: " + path);
  f << "[train_writers]\n";
  for (int w : split.train_writers) f << manifest.writer_tags[size_t(w)] << "\n";
  f << "[test_writers]\n";
  for (int w : split.test_writers) f << manifest.writer_tags[size_t(w)] << "\n";
  f << "[train_vocab]\n";
  for (const auto& word : split.train_vocab) f << word << "\n";
}

const char* EvalGrid::pool_name(int i) {
  static const char* kNames[4] = {"IV-S", "IV-U", "OOV-S", "OOV-U"};
  return kNames[i];
}

EvalGrid build_eval_grid(const SplitSpec& split, const std::vector<Sample>& samples) {
  EvalGrid grid;
  for (const Sample& s : samples) {
    const bool in_vocab = split.train_vocab.count(s.transcript) > 0;
    const bool seen = split.train_writers.count(s.writer_id) > 0;
    const int pool = (in_vocab ? 0 : 2) + (seen ? 0 : 1);
    grid.pools[pool].push_back(s);
  }
  return grid;
}

// ---------------------------------------------------------------------------
// synthetic corpus

GrayImage synthesize_word_image(const GlyphTable& font, const std::string& word,
                                const WriterStyle& style, Rng& rng) {
  const ContentSequence seq = render_text(font, word, 16);
  const int len = seq.length();
  const int scale = 3;
  const int margin = 6;
  const int body_h = int(std::lround(16 * scale * style.y_squash));
  const int h = body_h + 8;
  const int w = 16 * scale * len + 2 * margin;

  // per-sample jitter on top of the writer style
  const double slant = style.slant + rng.next_uniform(-0.03, 0.03);
  const double ink = std::clamp(style.ink + rng.next_uniform(-0.05, 0.05), 0.05, 1.0);
  const int y_off = int(rng.next_index(5)) - 2;

  std::vector<uint8_t> mask(size_t(h) * size_t(w), 0);
  auto put = [&](int y, int x) {
    if (y >= 0 && y < h && x >= 0 && x < w) mask[size_t(y) * size_t(w) + size_t(x)] = 1;
  };
  for (int i = 0; i < len; ++i)
    for (int gy = 0; gy < 16; ++gy)
      for (int gx = 0; gx < 16; ++gx) {
        if (!seq.glyphs[size_t(i)].get(gy, gx)) continue;
        const int cy = 4 + y_off + int(std::lround(gy * scale * style.y_squash));
        const int shear = int(std::lround(slant * double(body_h - gy * scale)));
        const int cx = margin + scale * (16 * i + gx) + shear;
        for (int dy = 0; dy < scale; ++dy)
          for (int dx = 0; dx < scale; ++dx) put(cy + dy, cx + dx);
      }

  for (int pass = 0; pass < style.dilate; ++pass) {
    std::vector<uint8_t> grown = mask;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!mask[size_t(y) * size_t(w) + size_t(x)]) continue;
        if (y > 0) grown[size_t(y - 1) * size_t(w) + size_t(x)] = 1;
        if (y + 1 < h) grown[size_t(y + 1) * size_t(w) + size_t(x)] = 1;
        if (x > 0) grown[size_t(y) * size_t(w) + size_t(x - 1)] = 1;
        if (x + 1 < w) grown[size_t(y) * size_t(w) + size_t(x + 1)] = 1;
      }
    mask.swap(grown);
  }

  GrayImage img;
  img.h = h;
  img.w = w;
  img.pix.resize(size_t(h) * size_t(w));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.at(y, x) = 255.0f - float(mask[size_t(y) * size_t(w) + size_t(x)]) *
                                  float(ink) * 255.0f;

  // box blur to soften stroke edges
  GrayImage blurred = img;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      int cnt = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          acc += img.at(yy, xx);
          ++cnt;
        }
      blurred.at(y, x) = acc / float(cnt);
    }

  for (auto& p : blurred.pix) {
    p += float(rng.next_uniform(-style.noise, style.noise));
    p = std::clamp(p, 0.0f, 255.0f);
  }
  return blurred;
}

std::string make_corpus(const std::string& out_dir, const GlyphTable& font,
                        const CorpusSpec& spec) {
  if (spec.words.empty() || spec.writers.empty() || spec.repetitions < 1)
    throw ConfigError("make_corpus: need words, writers, repetitions >= 1");
  fs::create_directories(fs::path(out_dir) / "images");
  const std::string manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
  std::ofstream mf(manifest_path);
  if (!mf) throw DataError("cannot write " + manifest_path);

  Rng rng(spec.seed);
  for (size_t wi = 0; wi < spec.writers.size(); ++wi) {
    const std::string tag = "w" + std::to_string(wi);
    for (const std::string& word : spec.words)
      for (int rep = 0; rep < spec.repetitions; ++rep) {
        GrayImage img = synthesize_word_image(font, word, spec.writers[wi], rng);
        std::string name =
            tag + "_" + word + "_" + std::to_string(rep) + ".pgm";
        write_pgm((fs::path(out_dir) / "images" / name).string(), img);
        append_manifest_line(mf, "images/" + name, word, tag);
      }
  }
  mf.close();

  Manifest m = load_manifest(manifest_path);
  SplitSpec split;
  for (int i = 0; i < m.n_writers(); ++i) split.train_writers.insert(i);
  for (const auto& word : spec.words) split.train_vocab.insert(nfc_normalize_utf8(word));
  save_split((fs::path(out_dir) / "split.txt").string(), m, split);
  return manifest_path;
}

CorpusSpec smoke_corpus_spec() {
  CorpusSpec spec;
  spec.words = {"an", "bat", "cab", "dot", "eat", "gin", "hot", "ice", "nod", "tan"};
  // two strongly distinct styles: heavy dark left-slant vs thin light right-slant
  spec.writers = {
      {-0.20, 1, 1.00, 5.0, 1.00},
      {+0.30, 0, 0.50, 5.0, 0.88},
  };
  spec.repetitions = 4;
  spec.seed = 20240901;
  return spec;
}

}  // namespace scrawl
