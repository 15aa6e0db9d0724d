// scrawl: handwriting synthesis and evaluation toolkit.
//
// Subcommands: font inspect | data prepare | train | generate | recognize |
// evaluate | ablate | augment | report-size | grid.
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "scrawl/checkpoint.hpp"
#include "scrawl/dataio.hpp"
#include "scrawl/errors.hpp"
#include "scrawl/evaluate.hpp"
#include "scrawl/training.hpp"
#include "scrawl/unicode.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scrawl;

namespace {

// ---------------------------------------------------------------------------
// shared helpers

std::string default_config_path(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("SCRAWL_CONFIG")) return env;
  throw ConfigError("no config given (use --config or SCRAWL_CONFIG)");
}

// style image of arbitrary size -> [1,32,16k] tensor, aspect-preserving
Tensor<float> load_style_image(const std::string& path) {
  GrayImage raw = read_gray_image(path);
  const double aspect_w = double(raw.w) * 32.0 / double(raw.h);
  const int k = std::max(1, int(std::lround(aspect_w / 16.0)));
  return preprocess_image(raw, k);
}

std::vector<std::string> list_style_files(const std::string& dir) {
  std::vector<std::string> files;
  if (!fs::is_directory(dir)) throw DataError("style dir not found: " + dir);
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext == ".pgm" || ext == ".png") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .pgm/.png style images in " + dir);
  return files;
}

void write_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  f << j.dump(2) << "\n";
}

json report_stamp(const RunConfig& cfg, const std::string& checkpoint_path) {
  json j;
  j["config"] = cfg.to_json();
  j["config_hash"] = string_hash_hex(cfg.to_json().dump());
  if (!checkpoint_path.empty()) j["checkpoint_hash"] = file_hash_hex(checkpoint_path);
  return j;
}

// 16px-tall label strip rendered with the glyph font; unknown glyphs become '?'
GrayImage render_label(const GlyphTable& font, const std::string& text, int max_chars) {
  std::string shown = text;
  if (grapheme_count(shown) > max_chars) {
    // crude truncation on bytes is fine for ascii labels; re-check renderability
    shown = shown.substr(0, size_t(max_chars));
  }
  GrayImage strip;
  strip.h = 16;
  strip.w = 16 * max_chars;
  strip.pix.assign(size_t(strip.h) * size_t(strip.w), 255.0f);
  int col = 0;
  for (char32_t cp : nfc_normalize(utf8_decode(shown))) {
    if (col >= max_chars) break;
    Bitmap16 bmp;
    try {
      bmp = render_char(font, cp);
    } catch (const MissingGlyphError&) {
      bmp = render_char(font, U'?');
    }
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        if (bmp.get(y, x)) strip.at(y, col * 16 + x) = 0.0f;
    ++col;
  }
  return strip;
}

// ---------------------------------------------------------------------------
// subcommand implementations

int cmd_font_inspect(const std::string& font_path, const std::string& character) {
  GlyphTable table = load_hex_font(font_path);
  const auto cps = nfc_normalize(utf8_decode(character));
  if (cps.empty()) throw DataError("empty character argument");
  for (char32_t cp : cps) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "U+%04X", unsigned(cp));
    std::cout << buf << ":\n" << ascii_art(render_char(table, cp)) << "\n";
  }
  return 0;
}

int cmd_data_prepare(const std::string& out_dir, const std::string& font_path,
                     const std::vector<std::string>& words, int writers, int reps,
                     uint64_t seed, int test_writers, int test_words) {
  GlyphTable font = load_hex_font(font_path);
  CorpusSpec spec = smoke_corpus_spec();
  if (!words.empty()) spec.words = words;
  spec.repetitions = reps;
  spec.seed = seed;
  if (writers > 0) {
    spec.writers.clear();
    Rng rng(seed ^ 0xabcdef);
    for (int i = 0; i < writers; ++i) {
      WriterStyle s;
      s.slant = rng.next_uniform(-0.30, 0.35);
      s.dilate = int(rng.next_index(2));
      s.ink = rng.next_uniform(0.45, 1.0);
      s.noise = 5.0;
      s.y_squash = rng.next_uniform(0.85, 1.0);
      spec.writers.push_back(s);
    }
  }
  const std::string manifest_path = make_corpus(out_dir, font, spec);
  Manifest m = load_manifest(manifest_path);

  if (test_writers > 0 || test_words > 0) {
    if (test_writers >= m.n_writers())
      throw ConfigError("--test-writers must leave at least one training writer");
    if (test_words >= int(spec.words.size()))
      throw ConfigError("--test-words must leave at least one training word");
    SplitSpec split;
    for (int i = 0; i < m.n_writers() - test_writers; ++i) split.train_writers.insert(i);
    for (int i = m.n_writers() - test_writers; i < m.n_writers(); ++i)
      split.test_writers.insert(i);
    for (size_t i = 0; i + size_t(test_words) < spec.words.size(); ++i)
      split.train_vocab.insert(nfc_normalize_utf8(spec.words[i]));
    save_split((fs::path(out_dir) / "split.txt").string(), m, split);
  }

  std::cout << "corpus: " << m.samples.size() << " images, " << m.n_writers()
            << " writers -> " << manifest_path << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& resume,
              const std::string& out_dir, uint64_t seed, bool seed_set) {
  TrainState st = [&] {
    if (!resume.empty()) return load_train_state(resume);
    RunConfig cfg = RunConfig::load(default_config_path(config_path));
    if (seed_set) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return make_train_state(cfg);
  }();
  if (!resume.empty() && !out_dir.empty()) st.cfg.out_dir = out_dir;

  fs::create_directories(st.cfg.out_dir);
  std::ofstream log((fs::path(st.cfg.out_dir) / "metrics.jsonl").string(),
                    std::ios::app);
  std::cout << "training: steps " << st.step << " -> " << st.cfg.steps << ", out "
            << st.cfg.out_dir << "\n";
  fit(st, &log);
  std::cout << "done; final checkpoint: "
            << (fs::path(st.cfg.out_dir) / "checkpoint_final.sckp").string() << "\n";
  return 0;
}

int cmd_generate(const std::string& checkpoint, const std::string& style_dir,
                 std::vector<std::string> texts, const std::string& text_file,
                 const std::string& out_dir, const std::string& wiring_override,
                 int scales_override) {
  NetworkBundle b = load_networks(checkpoint);
  if (!wiring_override.empty())
    b.nets.gen.cfg.wiring = wiring_from_string(wiring_override);
  if (scales_override > 0 && scales_override != b.nets.gen.cfg.n_scales)
    throw ConfigError("--scales " + std::to_string(scales_override) +
                      " does not match the checkpoint architecture (n_scales " +
                      std::to_string(b.nets.gen.cfg.n_scales) +
                      "); the scale stack is fixed at training time");
  if (!text_file.empty()) {
    std::ifstream f(text_file);
    if (!f) throw DataError("cannot open text file: " + text_file);
    std::string line;
    while (std::getline(f, line))
      if (!line.empty()) texts.push_back(line);
  }
  if (texts.empty()) throw ConfigError("no texts given (--text or --text-file)");

  std::vector<Tensor<float>> style;
  for (const auto& f : list_style_files(style_dir))
    style.push_back(load_style_image(f));

  fs::create_directories(out_dir);
  GeneratedBatch<float> out =
      generate(b.nets.gen, b.nets.writer, style, 0, texts, b.font);
  std::ofstream mf((fs::path(out_dir) / "generated.jsonl").string());
  for (size_t i = 0; i < out.images.size(); ++i) {
    const std::string name = "gen_" + std::to_string(i) + ".pgm";
    write_image_tensor((fs::path(out_dir) / name).string(), out.images[i]);
    append_manifest_line(mf, name, out.texts[i], "generated");
  }
  std::cout << "wrote " << out.images.size() << " images to " << out_dir << "\n";
  return 0;
}

int cmd_recognize(const std::string& checkpoint, const std::string& manifest_path,
                  const std::vector<std::string>& images, const std::string& out_path) {
  NetworkBundle b = load_networks(checkpoint);
  std::vector<std::pair<std::string, Tensor<float>>> inputs;
  if (!manifest_path.empty()) {
    Manifest m = load_manifest(manifest_path);
    for (const Sample& s : m.samples)
      inputs.emplace_back(s.image_path, load_preprocessed(s));
  }
  for (const std::string& path : images) inputs.emplace_back(path, load_style_image(path));
  if (inputs.empty()) throw ConfigError("nothing to recognize (--manifest or --image)");

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty() && out_path != "-") {
    file.open(out_path);
    if (!file) throw DataError("cannot write " + out_path);
    out = &file;
  }
  for (const auto& [path, img] : inputs) {
    Graph<float> g(false);
    Var<float> logits = b.nets.recog.recognize(g, g.constant(img));
    json rec;
    rec["path"] = path;
    rec["prediction"] = greedy_decode(logits.value(), b.charset);
    (*out) << rec.dump() << "\n";
  }
  return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& manifest_path,
                 const std::string& split_path, const std::string& out_path,
                 const std::string& diff_path, EvalOptions opt) {
  TrainState st = load_train_state(checkpoint);
  const std::string mpath =
      manifest_path.empty() ? st.cfg.manifest_path : manifest_path;
  const std::string spath = split_path.empty() ? st.cfg.split_path : split_path;
  Manifest eval_manifest = load_manifest(mpath);
  SplitSpec split = load_split(spath, eval_manifest);
  EvalGrid grid = build_eval_grid(split, eval_manifest.samples);

  EvalReport rep = evaluate_checkpoint(st, eval_manifest.samples, grid, opt);
  if (!diff_path.empty()) {
    std::ofstream df(diff_path);
    if (!df) throw DataError("cannot write " + diff_path);
    for (const TextDiff& d : rep.diffs) {
      json rec;
      rec["prediction"] = d.pred;
      rec["reference"] = d.ref;
      rec["substitutions"] = d.substitutions;
      rec["insertions"] = d.insertions;
      rec["deletions"] = d.deletions;
      df << rec.dump() << "\n";
    }
  }
  json j = rep.to_json();
  j.update(report_stamp(st.cfg, checkpoint));
  j["step"] = st.step;
  write_json(out_path, j);
  return 0;
}

int cmd_augment(const std::string& checkpoint, const std::string& vocab_path, int n,
                const std::string& out_dir, uint64_t seed) {
  if (n <= 0) throw ConfigError("--n must be > 0");
  TrainState st = load_train_state(checkpoint);
  std::vector<std::string> vocab;
  {
    std::ifstream f(vocab_path);
    if (!f) throw DataError("cannot open vocabulary: " + vocab_path);
    std::string line;
    while (std::getline(f, line))
      if (!line.empty()) vocab.push_back(nfc_normalize_utf8(line));
  }
  if (vocab.empty()) throw DataError("vocabulary is empty: " + vocab_path);

  fs::create_directories(fs::path(out_dir) / "images");
  std::ofstream mf((fs::path(out_dir) / "manifest.jsonl").string());
  Rng rng(seed);
  std::vector<int> writers(st.split.train_writers.begin(), st.split.train_writers.end());
  for (int i = 0; i < n; ++i) {
    const int writer = writers[size_t(rng.next_index(writers.size()))];
    std::vector<int> owned;
    for (int idx : st.train_samples)
      if (st.manifest.samples[size_t(idx)].writer_id == writer) owned.push_back(idx);
    std::vector<Tensor<float>> style;
    for (int p = 0; p < st.cfg.p_style; ++p)
      style.push_back(st.real_image(owned[rng.next_index(owned.size())]));
    const std::string& word = vocab[size_t(rng.next_index(vocab.size()))];
    Tensor<float> img = generate_one(st, style, word);
    char name[64];
    std::snprintf(name, sizeof name, "images/aug_%06d.pgm", i);
    write_image_tensor((fs::path(out_dir) / name).string(), img);
    append_manifest_line(mf, name, word, st.manifest.writer_tags[size_t(writer)]);
  }
  std::cout << "wrote " << n << " synthetic images to " << out_dir << "\n"
            << "retraining recipe: train a recognizer on the real manifest alone,\n"
            << "then on real + this manifest, and compare `evaluate` CER/WER/NED.\n";
  return 0;
}

int cmd_report_size(const std::string& checkpoint, const std::string& config_path,
                    const std::string& out_path, int n_writers, int n_classes) {
  RunConfig cfg;
  std::vector<std::pair<std::string, size_t>> param_counts;
  std::string ckpt_for_stamp;
  if (!checkpoint.empty()) {
    NetworkBundle b = load_networks(checkpoint);
    cfg = b.cfg;
    ckpt_for_stamp = checkpoint;
    b.nets.visit_all([&](const std::string& name, Tensor<float>& t) {
      param_counts.emplace_back(name, t.size());
    });
  } else {
    cfg = RunConfig::load(default_config_path(config_path));
    Networks nets = build_networks(cfg, n_writers, n_classes);
    nets.visit_all([&](const std::string& name, Tensor<float>& t) {
      param_counts.emplace_back(name, t.size());
    });
  }

  size_t gen = 0, enc = 0, disc = 0, recog = 0, writer_head = 0;
  for (const auto& [name, count] : param_counts) {
    if (name.rfind("gen.", 0) == 0) gen += count;
    else if (name.rfind("writerid.head.", 0) == 0) writer_head += count;
    else if (name.rfind("writerid.", 0) == 0) enc += count;
    else if (name.rfind("disc.", 0) == 0) disc += count;
    else if (name.rfind("recog.", 0) == 0) recog += count;
  }
  auto mb = [](size_t params) { return double(params) * 4.0 / (1024.0 * 1024.0); };

  json j = report_stamp(cfg, ckpt_for_stamp);
  j["gen"] = {{"params", gen}, {"mb", mb(gen)}};
  j["enc"] = {{"params", enc}, {"mb", mb(enc)}};
  j["total"] = {{"params", gen + enc}, {"mb", mb(gen + enc)}};
  j["excluded"] = {{"disc", {{"params", disc}, {"mb", mb(disc)}}},
                   {"recog", {{"params", recog}, {"mb", mb(recog)}}},
                   {"writerid_head", {{"params", writer_head}, {"mb", mb(writer_head)}}}};

  char line[128];
  std::printf("%-8s %12s %10s\n", "module", "params", "MB");
  std::snprintf(line, sizeof line, "%-8s %12zu %10.2f", "Gen", gen, mb(gen));
  std::printf("%s\n", line);
  std::snprintf(line, sizeof line, "%-8s %12zu %10.2f", "Enc", enc, mb(enc));
  std::printf("%s\n", line);
  std::snprintf(line, sizeof line, "%-8s %12zu %10.2f", "Total", gen + enc,
                mb(gen + enc));
  std::printf("%s\n", line);
  std::printf("(generation-time modules only; D/R/classifier head excluded)\n");
  if (!out_path.empty()) write_json(out_path, j);
  return 0;
}

int cmd_grid(const std::string& checkpoint, const std::string& style_dir,
             const std::vector<std::string>& texts, const std::string& out_path) {
  if (texts.empty()) throw ConfigError("grid needs at least one --text");
  NetworkBundle b = load_networks(checkpoint);
  const auto style_files = list_style_files(style_dir);

  int max_len = 1;
  for (const auto& t : texts) max_len = std::max(max_len, grapheme_count(t));
  const int cell_w = 16 * max_len + 4, cell_h = 32 + 4;
  const int label_chars = 8;
  const int left_w = 16 * label_chars + 4, top_h = 16 + 4;
  GrayImage canvas;
  canvas.h = top_h + cell_h * int(style_files.size());
  canvas.w = left_w + cell_w * int(texts.size());
  canvas.pix.assign(size_t(canvas.h) * size_t(canvas.w), 255.0f);

  auto blit = [&](const GrayImage& src, int y0, int x0) {
    for (int y = 0; y < src.h; ++y)
      for (int x = 0; x < src.w; ++x)
        if (y0 + y < canvas.h && x0 + x < canvas.w)
          canvas.at(y0 + y, x0 + x) = src.at(y, x);
  };

  for (size_t c = 0; c < texts.size(); ++c)
    blit(render_label(b.font, texts[c], max_len), 2, left_w + int(c) * cell_w + 2);

  for (size_t r = 0; r < style_files.size(); ++r) {
    blit(render_label(b.font, fs::path(style_files[r]).stem().string(), label_chars),
         top_h + int(r) * cell_h + 10, 2);
    std::vector<Tensor<float>> style = {load_style_image(style_files[r])};
    GeneratedBatch<float> row =
        generate(b.nets.gen, b.nets.writer, style, 0, texts, b.font);
    for (size_t c = 0; c < row.images.size(); ++c)
      blit(tensor_to_gray(row.images[c]), top_h + int(r) * cell_h + 2,
           left_w + int(c) * cell_w + 2);
  }
  write_pgm(out_path, canvas);
  std::cout << "wrote " << out_path << " (" << style_files.size() << " styles x "
            << texts.size() << " texts)\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& out_dir,
               std::vector<std::string> axes, int steps_override, int n_per_pool) {
  RunConfig base = RunConfig::load(default_config_path(config_path));
  if (steps_override > 0) base.steps = steps_override;
  const std::vector<std::string> known = {"vit_generator", "multi_scale",
                                          "vit_recognizer_writerid"};
  if (axes.empty()) axes = known;
  for (const auto& a : axes)
    if (std::find(known.begin(), known.end(), a) == known.end())
      throw ConfigError("unknown ablation axis: " + a);

  // cumulative variants in the fixed row order: base, then one axis at a time
  struct Variant {
    std::string name;
    RunConfig cfg;
  };
  std::vector<Variant> variants;
  RunConfig cur = base;
  cur.use_vit_generator = false;
  cur.use_vit_recognizer = false;
  cur.use_vit_writerid = false;
  cur.n_scales = 1;
  // variants change the scale count, so decoder widths are re-derived
  cur.decoder_channels.clear();
  variants.push_back({"base-conv", cur});
  for (const auto& axis : known) {
    if (std::find(axes.begin(), axes.end(), axis) == axes.end()) continue;
    if (axis == "vit_generator") cur.use_vit_generator = true;
    if (axis == "multi_scale") cur.n_scales = std::max(2, base.n_scales);
    if (axis == "vit_recognizer_writerid") {
      cur.use_vit_recognizer = true;
      cur.use_vit_writerid = true;
    }
    variants.push_back({"+" + axis, cur});
  }

  fs::create_directories(out_dir);
  json rows = json::array();
  for (const auto& [name, vc] : variants) {
    RunConfig cfg = vc;
    cfg.out_dir = (fs::path(out_dir) / name).string();
    cfg.raw = cfg.to_json();
    std::cout << "ablate variant '" << name << "' ..." << std::flush;
    TrainState st = make_train_state(cfg);
    std::ofstream log((fs::path(cfg.out_dir) / "metrics.jsonl").string());
    fit(st, &log);

    EvalGrid grid = build_eval_grid(st.split, st.manifest.samples);
    FourWayResult fw = eval_four_way(grid, st, n_per_pool, cfg.seed);
    json row;
    row["variant"] = name;
    row["config_hash"] = string_hash_hex(cfg.to_json().dump());
    row["seed"] = cfg.seed;
    row["steps"] = cfg.steps;
    row["fid_iv_s"] = fw.fid_value[0] ? json(*fw.fid_value[0]) : json(nullptr);
    rows.push_back(row);
    std::cout << " fid(IV-S) = "
              << (fw.fid_value[0] ? std::to_string(*fw.fid_value[0]) : "n/a") << "\n";
  }
  json report;
  report["rows"] = rows;
  report["base_config"] = base.to_json();
  write_json((fs::path(out_dir) / "ablation.json").string(), report);
  std::cout << "ablation report: " << (fs::path(out_dir) / "ablation.json").string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scrawl: handwriting synthesis and evaluation toolkit"};
  app.require_subcommand(1);

  // font inspect
  auto* font = app.add_subcommand("font", "bitmap font utilities");
  font->require_subcommand(1);
  auto* inspect = font->add_subcommand("inspect", "print a glyph as ASCII art");
  std::string font_path, character;
  inspect->add_option("path", font_path, "hex font file")->required();
  inspect->add_option("char", character, "character to render")->required();

  // data prepare
  auto* data = app.add_subcommand("data", "dataset utilities");
  data->require_subcommand(1);
  auto* prepare = data->add_subcommand("prepare", "synthesize a word-image corpus");
  std::string prep_out = "corpus", prep_font = "data/fonts/scrawl8x16.hex";
  std::vector<std::string> prep_words;
  int prep_writers = 0, prep_reps = 4, prep_test_writers = 0, prep_test_words = 0;
  uint64_t prep_seed = 20240901;
  prepare->add_option("--out", prep_out, "output directory");
  prepare->add_option("--font", prep_font, "hex font file");
  prepare->add_option("--words", prep_words, "words (default: bundled 10-word set)")
      ->delimiter(',');
  prepare->add_option("--writers", prep_writers, "number of synthetic writers");
  prepare->add_option("--reps", prep_reps, "images per (writer, word)");
  prepare->add_option("--seed", prep_seed, "corpus seed");
  prepare->add_option("--test-writers", prep_test_writers, "writers held out of training");
  prepare->add_option("--test-words", prep_test_words, "words held out of the vocabulary");

  // train
  auto* train = app.add_subcommand("train", "run the alternating training loop");
  std::string train_config, train_resume, train_out;
  uint64_t train_seed = 0;
  bool train_seed_set = false;
  train->add_option("--config", train_config, "config JSON (or SCRAWL_CONFIG)");
  train->add_option("--resume", train_resume, "checkpoint to resume from");
  train->add_option("--out-dir", train_out, "override output directory");
  train->add_option("--seed", train_seed, "override config seed")
      ->each([&](const std::string&) { train_seed_set = true; });

  // generate
  auto* gen = app.add_subcommand("generate", "render texts in an exemplar style");
  std::string gen_ckpt, gen_style, gen_text_file, gen_out = "generated", gen_wiring;
  int gen_scales = 0;
  std::vector<std::string> gen_texts;
  gen->add_option("--checkpoint", gen_ckpt)->required();
  gen->add_option("--style-dir", gen_style, "directory of style images")->required();
  gen->add_option("--text", gen_texts, "text(s) to render");
  gen->add_option("--text-file", gen_text_file, "file with one text per line");
  gen->add_option("--out-dir", gen_out);
  gen->add_option("--wiring", gen_wiring, "conventional | paper-literal");
  gen->add_option("--scales", gen_scales,
                  "must match the checkpoint's scale stack; informational");

  // recognize
  auto* rec = app.add_subcommand("recognize", "transcribe images");
  std::string rec_ckpt, rec_manifest, rec_out;
  std::vector<std::string> rec_images;
  rec->add_option("--checkpoint", rec_ckpt)->required();
  rec->add_option("--manifest", rec_manifest, "JSON-lines manifest");
  rec->add_option("--image", rec_images, "individual image file(s)");
  rec->add_option("--out", rec_out, "output JSONL (default stdout)");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "FID/KID/CER/WER/NED report");
  std::string eval_ckpt, eval_manifest, eval_split, eval_out, eval_diffs;
  EvalOptions eval_opt;
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--manifest", eval_manifest, "eval manifest (default: train config)");
  eval->add_option("--split", eval_split, "split file (default: train config)");
  eval->add_option("--out", eval_out, "report path (default stdout)");
  eval->add_option("--diffs", eval_diffs, "aligned prediction/reference dump (JSONL)");
  eval->add_option("--n-gen", eval_opt.n_gen);
  eval->add_option("--n-per-pool", eval_opt.n_per_pool);
  eval->add_option("--kid-subset", eval_opt.kid_subset_size);
  eval->add_option("--kid-subsets", eval_opt.kid_subsets);
  eval->add_option("--seed", eval_opt.seed);

  // ablate
  auto* abl = app.add_subcommand("ablate", "cumulative component ablation");
  std::string abl_config, abl_out = "ablation";
  std::vector<std::string> abl_axes;
  int abl_steps = 0, abl_pool = 16;
  abl->add_option("--config", abl_config, "base config JSON");
  abl->add_option("--out-dir", abl_out);
  abl->add_option("--axes", abl_axes,
                  "subset of {vit_generator, multi_scale, vit_recognizer_writerid}")
      ->delimiter(',');
  abl->add_option("--steps", abl_steps, "override steps per variant");
  abl->add_option("--n-per-pool", abl_pool, "generated images per FID cell");

  // augment
  auto* aug = app.add_subcommand(
      "augment", "emit a synthetic training corpus from a checkpoint");
  std::string aug_ckpt, aug_vocab, aug_out = "augmented";
  int aug_n = 0;
  uint64_t aug_seed = 1;
  aug->add_option("--checkpoint", aug_ckpt)->required();
  aug->add_option("--vocab", aug_vocab, "one word per line")->required();
  aug->add_option("--n", aug_n, "number of images")->required();
  aug->add_option("--out-dir", aug_out);
  aug->add_option("--seed", aug_seed);

  // report-size
  auto* size = app.add_subcommand("report-size", "Gen/Enc parameter sizes in MB");
  std::string size_ckpt, size_config, size_out;
  int size_writers = 340, size_classes = 80;
  size->add_option("--checkpoint", size_ckpt);
  size->add_option("--config", size_config, "size a fresh model from a config");
  size->add_option("--out", size_out, "JSON report path");
  size->add_option("--n-writers", size_writers, "writer count when sizing from config");
  size->add_option("--n-classes", size_classes, "charset size when sizing from config");

  // grid
  auto* grid = app.add_subcommand("grid", "qualitative style x text image grid");
  std::string grid_ckpt, grid_style, grid_out = "grid.pgm";
  std::vector<std::string> grid_texts;
  grid->add_option("--checkpoint", grid_ckpt)->required();
  grid->add_option("--style-dir", grid_style)->required();
  grid->add_option("--text", grid_texts)->required();
  grid->add_option("--out", grid_out);

  try {
    app.parse(argc, argv);
    if (inspect->parsed()) return cmd_font_inspect(font_path, character);
    if (prepare->parsed())
      return cmd_data_prepare(prep_out, prep_font, prep_words, prep_writers, prep_reps,
                              prep_seed, prep_test_writers, prep_test_words);
    if (train->parsed())
      return cmd_train(train_config, train_resume, train_out, train_seed,
                       train_seed_set);
    if (gen->parsed())
      return cmd_generate(gen_ckpt, gen_style, gen_texts, gen_text_file, gen_out,
                          gen_wiring, gen_scales);
    if (rec->parsed()) return cmd_recognize(rec_ckpt, rec_manifest, rec_images, rec_out);
    if (eval->parsed())
      return cmd_evaluate(eval_ckpt, eval_manifest, eval_split, eval_out, eval_diffs,
                          eval_opt);
    if (abl->parsed()) return cmd_ablate(abl_config, abl_out, abl_axes, abl_steps, abl_pool);
    if (aug->parsed()) return cmd_augment(aug_ckpt, aug_vocab, aug_n, aug_out, aug_seed);
    if (size->parsed())
      return cmd_report_size(size_ckpt, size_config, size_out, size_writers,
                             size_classes);
    if (grid->parsed()) return cmd_grid(grid_ckpt, grid_style, grid_texts, grid_out);
    std::cerr << app.help() << "\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
