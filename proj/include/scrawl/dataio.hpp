// Dataset plumbing: JSON-lines manifests, PGM/PNG grayscale loading,
// geometry-normalizing preprocessing, style-set sampling, writer/vocabulary
// splits, and the bundled synthetic corpus generator.
#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scrawl/glyphs.hpp"
#include "scrawl/rng.hpp"
#include "scrawl/tensor.hpp"

namespace scrawl {

struct Sample {
  std::string image_path;  // resolved (absolute or relative to cwd)
  std::string transcript;  // NFC-normalized
  int writer_id = 0;
};

struct Manifest {
  std::vector<Sample> samples;
  std::vector<std::string> writer_tags;  // dense id -> original tag
  int n_writers() const { return int(writer_tags.size()); }
};

// JSON-lines records {"image":..., "text":..., "writer":...}. Writer tags are
// mapped to dense ids in first-appearance order. Image paths are resolved
// relative to the manifest's directory; files are not opened here.
Manifest load_manifest(const std::string& path);
void append_manifest_line(std::ostream& out, const std::string& image,
                          const std::string& text, const std::string& writer);

// raw grayscale image, values 0..255
struct GrayImage {
  int h = 0, w = 0;
  std::vector<float> pix;
  float& at(int y, int x) { return pix[size_t(y) * size_t(w) + size_t(x)]; }
  float at(int y, int x) const { return pix[size_t(y) * size_t(w) + size_t(x)]; }
};

GrayImage read_gray_image(const std::string& path);  // PGM (P5) or PNG
void write_pgm(const std::string& path, const GrayImage& img);

// model tensor [1,32,16L] in [-1,1] (white = +1) -> PGM bytes
void write_image_tensor(const std::string& path, const Tensor<float>& img);
GrayImage tensor_to_gray(const Tensor<float>& img);

// number of visual character tokens (post-NFC codepoints with combining marks
// merged into their base); the width rule is 16 pixels per such token
int grapheme_count(const std::string& text);

// bilinear resize to 32 x 16*transcript_len, mapped to [-1,1] with white=+1
Tensor<float> preprocess_image(const GrayImage& raw, int transcript_len);

// right-pad with white (+1) or right-truncate to width 128
Tensor<float> pad_or_truncate_eval(const Tensor<float>& img);

struct StyleSet {
  int writer_id = 0;
  std::vector<Tensor<float>> images;  // preprocessed, height 32
};

// P images of one writer, without replacement when possible, deterministic
// under the seed
StyleSet sample_style_set(const Manifest& manifest, int writer_id, int p,
                          uint64_t rng_seed);
Tensor<float> load_preprocessed(const Sample& s);

struct SplitSpec {
  std::set<int> train_writers, test_writers;
  std::set<std::string> train_vocab;  // NFC words, case-sensitive
};

// sectioned text file: [train_writers] / [test_writers] hold writer tags,
// [train_vocab] holds words, one item per line
SplitSpec load_split(const std::string& path, const Manifest& manifest);
void save_split(const std::string& path, const Manifest& manifest,
                const SplitSpec& split);

struct EvalGrid {
  // row order fixed: IV-S, IV-U, OOV-S, OOV-U
  std::vector<Sample> pools[4];
  static const char* pool_name(int i);
};

EvalGrid build_eval_grid(const SplitSpec& split, const std::vector<Sample>& samples);

// ---------------------------------------------------------------------------
// synthetic corpus (bundled smoke data)

struct WriterStyle {
  double slant = 0.0;     // shear, + leans right
  int dilate = 0;         // stroke thickening passes
  double ink = 1.0;       // 1 = black strokes, smaller = lighter
  double noise = 0.0;     // additive uniform noise amplitude (gray levels)
  double y_squash = 1.0;  // vertical scale of the glyph body
};

GrayImage synthesize_word_image(const GlyphTable& font, const std::string& word,
                                const WriterStyle& style, Rng& rng);

struct CorpusSpec {
  std::vector<std::string> words;
  std::vector<WriterStyle> writers;
  int repetitions = 2;  // images per (writer, word)
  uint64_t seed = 1;
};

// writes PGM images, manifest.jsonl, and split.txt under out_dir; returns the
// manifest path
std::string make_corpus(const std::string& out_dir, const GlyphTable& font,
                        const CorpusSpec& spec);

// the corpus used by smoke training: two visually distinct writers x 10 words
CorpusSpec smoke_corpus_spec();

}  // namespace scrawl
