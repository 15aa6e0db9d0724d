#include "scrawl/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "scrawl/errors.hpp"

namespace scrawl {

namespace fs = std::filesystem;
using nlohmann::json;

Networks build_networks(const RunConfig& cfg, int n_writers, int n_classes) {
  BlockConfig block;
  block.d_model = cfg.d_model;
  block.n_heads = cfg.n_heads;
  block.d_ff = cfg.d_ff;
  block.dropout = cfg.dropout;

  Rng rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 17);
  Networks nets;

  GenConfig gc;
  gc.block = block;
  gc.block.n_layers = cfg.gen_layers_per_scale;
  gc.wiring = wiring_from_string(cfg.wiring);
  gc.n_scales = cfg.n_scales;
  gc.fuse_layers = cfg.gen_fuse_layers;
  gc.layers_per_scale = cfg.gen_layers_per_scale;
  gc.use_cpe = cfg.use_cpe;
  gc.use_vit = cfg.use_vit_generator;
  gc.decoder_channels = cfg.decoder_channels;
  nets.gen.init(gc, rng);

  DiscConfig dc;
  dc.base_channels = cfg.disc_base_channels;
  nets.disc.init(dc, rng);

  RecognizerConfig rc;
  rc.block = block;
  rc.block.n_layers = cfg.recognizer_layers;
  rc.n_classes = n_classes;
  rc.use_vit = cfg.use_vit_recognizer;
  rc.stem_c1 = cfg.recog_c1;
  rc.stem_c2 = cfg.recog_c2;
  nets.recog.init(rc, rng);

  WriterIdConfig wc;
  wc.block = block;
  wc.block.n_layers = cfg.writerid_layers;
  wc.n_writers = n_writers;
  wc.use_vit = cfg.use_vit_writerid;
  nets.writer.init(wc, rng);

  return nets;
}

// ---------------------------------------------------------------------------
// Adam

void Adam::step(const std::vector<Entry>& entries) {
  ++t_;
  const float b1 = float(cfg_.beta1), b2 = float(cfg_.beta2);
  const float bc1 = 1.0f - std::pow(b1, float(t_));
  const float bc2 = 1.0f - std::pow(b2, float(t_));
  for (const Entry& e : entries) {
    if (!e.grad) continue;
    auto& [m, v] = moments_[e.name];
    if (!m.defined()) {
      m = Tensor<float>::zeros(e.param->shape());
      v = Tensor<float>::zeros(e.param->shape());
    }
    Tensor<float>& p = *e.param;
    const Tensor<float>& g = *e.grad;
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const float mhat = m[i] / bc1;
      const float vhat = v[i] / bc2;
      p[i] -= float(cfg_.lr) * mhat / (std::sqrt(vhat) + float(cfg_.eps));
    }
  }
}

// ---------------------------------------------------------------------------
// balancing

double group_std(const std::vector<Tensor<float>>& group) {
  size_t n = 0;
  double mean = 0;
  for (const auto& t : group) {
    for (size_t i = 0; i < t.size(); ++i) mean += double(t[i]);
    n += t.size();
  }
  if (n == 0) return 0;
  mean /= double(n);
  double var = 0;
  for (const auto& t : group)
    for (size_t i = 0; i < t.size(); ++i) {
      const double d = double(t[i]) - mean;
      var += d * d;
    }
  return std::sqrt(var / double(n));
}

std::vector<Tensor<float>> balance_gradients(const std::vector<Tensor<float>>& g_adv,
                                             const std::vector<Tensor<float>>& g_r,
                                             const std::vector<Tensor<float>>& g_w,
                                             const BalanceConfig& cfg,
                                             GradStats* stats,
                                             std::vector<std::string>* warnings) {
  if (g_adv.size() != g_r.size() || g_adv.size() != g_w.size())
    throw NumericError("balance_gradients: group sizes differ");
  for (size_t i = 0; i < g_adv.size(); ++i)
    if (!g_adv[i].same_shape(g_r[i]) || !g_adv[i].same_shape(g_w[i]))
      throw NumericError("balance_gradients: tensor shape mismatch");

  GradStats st;
  st.sigma_d = group_std(g_adv);
  st.sigma_r = group_std(g_r);
  st.sigma_w = group_std(g_w);
  if (stats) *stats = st;

  constexpr double kDegenerate = 1e-12;
  double scale_r = 1.0, scale_w = 1.0;
  if (st.sigma_r < kDegenerate) {
    if (warnings)
      warnings->push_back("balance_gradients: sigma_R degenerate, term unscaled");
  } else {
    scale_r = cfg.alpha * st.sigma_d / st.sigma_r;
  }
  if (st.sigma_w < kDegenerate) {
    if (warnings)
      warnings->push_back("balance_gradients: sigma_W degenerate, term unscaled");
  } else {
    scale_w = cfg.beta * st.sigma_d / st.sigma_w;
  }

  std::vector<Tensor<float>> out;
  out.reserve(g_adv.size());
  for (size_t i = 0; i < g_adv.size(); ++i) {
    Tensor<float> c(g_adv[i].shape());
    for (size_t k = 0; k < c.size(); ++k)
      c[k] = g_adv[i][k] + float(scale_r) * g_r[i][k] + float(scale_w) * g_w[i][k];
    out.push_back(std::move(c));
  }
  return out;
}

Tensor<float> balance_gradients(const Tensor<float>& g_adv, const Tensor<float>& g_r,
                                const Tensor<float>& g_w, const BalanceConfig& cfg,
                                GradStats* stats, std::vector<std::string>* warnings) {
  return balance_gradients(std::vector<Tensor<float>>{g_adv},
                           std::vector<Tensor<float>>{g_r},
                           std::vector<Tensor<float>>{g_w}, cfg, stats, warnings)[0];
}

// ---------------------------------------------------------------------------
// state construction

const Tensor<float>& TrainState::real_image(int sample_idx) {
  auto it = image_cache.find(sample_idx);
  if (it != image_cache.end()) return it->second;
  const Sample& s = manifest.samples[size_t(sample_idx)];
  auto [ins, ok] = image_cache.emplace(sample_idx, load_preprocessed(s));
  return ins->second;
}

TrainState make_train_state(const RunConfig& cfg) {
  cfg.require_paths(true, true, true);
  TrainState st;
  st.cfg = cfg;
  st.font = load_hex_font(cfg.font_path);
  st.manifest = load_manifest(cfg.manifest_path);
  st.split = load_split(cfg.split_path, st.manifest);
  st.vocab.assign(st.split.train_vocab.begin(), st.split.train_vocab.end());
  if (st.vocab.empty()) throw DataError("training vocabulary is empty");
  for (size_t i = 0; i < st.manifest.samples.size(); ++i)
    if (st.split.train_writers.count(st.manifest.samples[i].writer_id))
      st.train_samples.push_back(int(i));
  if (st.train_samples.empty()) throw DataError("no training samples in split");

  std::vector<std::string> texts;
  for (int i : st.train_samples) texts.push_back(st.manifest.samples[size_t(i)].transcript);
  for (const auto& w : st.vocab) texts.push_back(w);
  st.charset = Charset::from_texts(texts);

  st.nets = build_networks(cfg, st.manifest.n_writers(), st.charset.n_classes());
  AdamConfig ag{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8};
  AdamConfig ac = ag;
  if (cfg.critic_lr > 0) ac.lr = cfg.critic_lr;
  st.opt_gen = Adam(ag);
  st.opt_critic = Adam(ac);
  st.rng.reseed(cfg.seed);
  return st;
}

TrainBatch sample_batch(TrainState& st) {
  TrainBatch batch;
  for (int b = 0; b < st.cfg.batch_size; ++b) {
    BatchItem item;
    item.sample_idx =
        st.train_samples[size_t(st.rng.next_index(st.train_samples.size()))];
    const int writer = st.manifest.samples[size_t(item.sample_idx)].writer_id;
    std::vector<int> owned;
    for (int i : st.train_samples)
      if (st.manifest.samples[size_t(i)].writer_id == writer) owned.push_back(i);
    const int p = st.cfg.p_style;
    if (owned.size() >= size_t(p)) {
      for (size_t k : st.rng.sample_without_replacement(owned.size(), size_t(p)))
        item.style_idx.push_back(owned[k]);
    } else {
      for (int i = 0; i < p; ++i)
        item.style_idx.push_back(owned[st.rng.next_index(owned.size())]);
    }
    item.gen_text = st.vocab[size_t(st.rng.next_index(st.vocab.size()))];
    batch.items.push_back(std::move(item));
  }
  return batch;
}

// ---------------------------------------------------------------------------
// steps

namespace {

struct GenForward {
  Graph<float> graph;
  Var<float> image;
  std::vector<int> labels;
  int writer_id = 0;
};

void check_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw NumericError(std::string("non-finite ") + what + " loss, step aborted");
}

}  // namespace

StepReport generator_step(TrainState& st, const TrainBatch& batch) {
  const int n = int(batch.items.size());
  if (n == 0) throw DataError("generator_step: empty batch");
  StepReport rep;
  rep.phase = "generator";

  // forward generate per sample, writer identifier frozen as feature extractor
  std::vector<GenForward> fwd(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const BatchItem& item = batch.items[size_t(i)];
    GenForward& f = fwd[size_t(i)];
    f.writer_id = st.manifest.samples[size_t(item.sample_idx)].writer_id;
    f.labels = st.charset.encode(item.gen_text);
    f.graph.set_trainable(false);
    std::vector<Var<float>> style_vars;
    for (int si : item.style_idx)
      style_vars.push_back(f.graph.constant(st.real_image(si)));
    const StyleEmbedding<float> style = st.nets.writer.embed_style(f.graph, style_vars);
    f.graph.set_trainable(true);
    const ContentSequence seq =
        render_text(st.font, item.gen_text, st.cfg.d_model);
    f.image = st.nets.gen.synthesize(f.graph, seq, style);
  }

  // per-loss gradients at the generated images (D, R, W all frozen here)
  std::vector<Tensor<float>> g_adv, g_r, g_w;
  for (int i = 0; i < n; ++i) {
    const Tensor<float>& img = fwd[size_t(i)].image.value();
    {
      Graph<float> g(false);
      Var<float> leaf = Var<float>::leaf(img, true);
      Var<float> loss = g_hinge_loss<float>({st.nets.disc.discriminate(g, leaf)});
      check_finite(loss.scalar(), "adversarial");
      rep.l_adv += loss.scalar() / n;
      backward_scalar(loss);
      g_adv.push_back(leaf.grad().clone());
    }
    {
      Graph<float> g(false);
      Var<float> leaf = Var<float>::leaf(img, true);
      Var<float> loss =
          recognition_loss(st.nets.recog.recognize(g, leaf), fwd[size_t(i)].labels);
      check_finite(loss.scalar(), "recognition");
      rep.l_r += loss.scalar() / n;
      backward_scalar(loss);
      g_r.push_back(leaf.grad().clone());
    }
    {
      Graph<float> g(false);
      Var<float> leaf = Var<float>::leaf(img, true);
      const StyleEmbedding<float> emb = st.nets.writer.embed_style(g, {leaf});
      Var<float> loss =
          writer_loss(st.nets.writer.classify(g, emb), fwd[size_t(i)].writer_id);
      check_finite(loss.scalar(), "writer");
      rep.l_w += loss.scalar() / n;
      backward_scalar(loss);
      g_w.push_back(leaf.grad().clone());
    }
  }

  BalanceConfig bc{st.cfg.alpha, st.cfg.beta};
  std::vector<Tensor<float>> combined =
      balance_gradients(g_adv, g_r, g_w, bc, &rep.stats, &rep.warnings);

  // push the combined image gradient through the generator graphs
  for (int i = 0; i < n; ++i) {
    Tensor<float>& seed = combined[size_t(i)];
    for (size_t k = 0; k < seed.size(); ++k) seed[k] /= float(n);
    backward(fwd[size_t(i)].image, seed);
  }

  std::vector<std::pair<std::string, Tensor<float>*>> named;
  st.nets.gen.visit("gen", [&](const std::string& name, Tensor<float>& t) {
    named.emplace_back(name, &t);
  });
  std::map<std::string, Tensor<float>> acc;
  for (auto& [name, param] : named) {
    for (int i = 0; i < n; ++i) {
      const Tensor<float>* g = fwd[size_t(i)].graph.grad_for(*param);
      if (!g) continue;
      auto it = acc.find(name);
      if (it == acc.end())
        acc.emplace(name, g->clone());
      else
        for (size_t k = 0; k < it->second.size(); ++k) it->second[k] += (*g)[k];
    }
  }
  std::vector<Adam::Entry> entries;
  for (auto& [name, param] : named) {
    auto it = acc.find(name);
    entries.push_back({name, param, it == acc.end() ? nullptr : &it->second});
  }
  st.opt_gen.step(entries);

  rep.total = rep.l_adv + rep.l_r + rep.l_w;
  return rep;
}

StepReport critic_step(TrainState& st, const TrainBatch& batch) {
  const int n = int(batch.items.size());
  if (n == 0) throw DataError("critic_step: empty batch");
  StepReport rep;
  rep.phase = "critic";

  // regenerate fakes with the current generator, no gradient into G
  std::vector<Tensor<float>> fakes;
  for (const BatchItem& item : batch.items) {
    Graph<float> g(false);
    std::vector<Var<float>> style_vars;
    for (int si : item.style_idx) style_vars.push_back(g.constant(st.real_image(si)));
    const StyleEmbedding<float> style = st.nets.writer.embed_style(g, style_vars);
    const ContentSequence seq = render_text(st.font, item.gen_text, st.cfg.d_model);
    fakes.push_back(st.nets.gen.synthesize(g, seq, style).value());
  }

  // discriminator: hinge on real vs fake
  Graph<float> gd(true);
  std::vector<Var<float>> real_scores, fake_scores;
  for (int i = 0; i < n; ++i) {
    real_scores.push_back(st.nets.disc.discriminate(
        gd, gd.constant(st.real_image(batch.items[size_t(i)].sample_idx))));
    fake_scores.push_back(
        st.nets.disc.discriminate(gd, gd.constant(fakes[size_t(i)])));
  }
  Var<float> loss_d = d_hinge_loss(real_scores, fake_scores);
  check_finite(loss_d.scalar(), "discriminator hinge");
  rep.l_adv = loss_d.scalar();
  backward_scalar(loss_d);

  // recognizer: real images only
  Graph<float> gr(true);
  Var<float> loss_r;
  for (int i = 0; i < n; ++i) {
    const Sample& s = st.manifest.samples[size_t(batch.items[size_t(i)].sample_idx)];
    Var<float> logits =
        st.nets.recog.recognize(gr, gr.constant(st.real_image(batch.items[size_t(i)].sample_idx)));
    Var<float> l = recognition_loss(logits, s.transcript, st.charset);
    loss_r = loss_r.defined() ? add(loss_r, l) : l;
  }
  loss_r = scale(loss_r, 1.0f / float(n));
  check_finite(loss_r.scalar(), "recognition");
  rep.l_r = loss_r.scalar();
  backward_scalar(loss_r);

  // writer identifier: classification on real images only
  Graph<float> gw(true);
  Var<float> loss_w;
  for (int i = 0; i < n; ++i) {
    const Sample& s = st.manifest.samples[size_t(batch.items[size_t(i)].sample_idx)];
    const StyleEmbedding<float> emb = st.nets.writer.embed_style(
        gw, {gw.constant(st.real_image(batch.items[size_t(i)].sample_idx))});
    Var<float> l = writer_loss(st.nets.writer.classify(gw, emb), s.writer_id);
    loss_w = loss_w.defined() ? add(loss_w, l) : l;
  }
  loss_w = scale(loss_w, 1.0f / float(n));
  check_finite(loss_w.scalar(), "writer");
  rep.l_w = loss_w.scalar();
  backward_scalar(loss_w);

  // one critic update covering D, R, W
  std::vector<std::pair<std::string, Tensor<float>*>> named;
  st.nets.disc.visit("disc", [&](const std::string& nm, Tensor<float>& t) {
    named.emplace_back(nm, &t);
  });
  st.nets.recog.visit("recog", [&](const std::string& nm, Tensor<float>& t) {
    named.emplace_back(nm, &t);
  });
  st.nets.writer.visit("writerid", [&](const std::string& nm, Tensor<float>& t) {
    named.emplace_back(nm, &t);
  });
  std::vector<Adam::Entry> entries;
  std::vector<const Tensor<float>*> grads;
  for (auto& [name, param] : named) {
    const Tensor<float>* g = gd.grad_for(*param);
    if (!g) g = gr.grad_for(*param);
    if (!g) g = gw.grad_for(*param);
    entries.push_back({name, param, g});
  }
  st.opt_critic.step(entries);

  rep.total = rep.l_adv + rep.l_r + rep.l_w;
  return rep;
}

// ---------------------------------------------------------------------------
// checkpointing

void save_train_state(const TrainState& st, const std::string& path) {
  Archive ar;
  ar.header["format"] = "scrawl-checkpoint";
  ar.header["step"] = st.step;
  ar.header["config"] = st.cfg.to_json();
  json symbols = json::array();
  for (char32_t cp : st.charset.symbols) symbols.push_back(uint32_t(cp));
  ar.header["charset"] = symbols;
  ar.header["writer_tags"] = st.manifest.writer_tags;
  json rng_state = json::array();
  for (uint64_t v : st.rng.state()) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
    rng_state.push_back(std::string(buf));
  }
  ar.header["rng"] = rng_state;
  ar.header["adam_t_gen"] = st.opt_gen.t();
  ar.header["adam_t_critic"] = st.opt_critic.t();

  Networks& nets = const_cast<Networks&>(st.nets);
  nets.visit_all([&](const std::string& name, Tensor<float>& t) {
    ar.arrays.emplace_back(name, t);
  });
  auto dump_moments = [&](const char* group, Adam& opt) {
    for (auto& [name, mv] : opt.moments()) {
      ar.arrays.emplace_back(std::string("adam.") + group + ".m." + name, mv.first);
      ar.arrays.emplace_back(std::string("adam.") + group + ".v." + name, mv.second);
    }
  };
  dump_moments("gen", const_cast<Adam&>(st.opt_gen));
  dump_moments("critic", const_cast<Adam&>(st.opt_critic));
  save_archive(path, ar);
}

TrainState load_train_state(const std::string& path) {
  Archive ar = load_archive(path);
  if (!ar.header.contains("config"))
    throw DataError("checkpoint missing config header: " + path);
  RunConfig cfg = RunConfig::from_json(ar.header["config"]);
  TrainState st = make_train_state(cfg);

  // charset must come from the checkpoint, not be rebuilt
  std::vector<char32_t> symbols;
  for (const auto& v : ar.header.at("charset")) symbols.push_back(char32_t(v.get<uint32_t>()));
  st.charset = Charset::from_symbols(symbols);
  st.nets = build_networks(cfg, st.manifest.n_writers(), st.charset.n_classes());

  st.nets.visit_all([&](const std::string& name, Tensor<float>& t) {
    const Tensor<float>* stored = ar.find(name);
    if (!stored) throw DataError("checkpoint missing array: " + name);
    if (!stored->same_shape(t))
      throw DataError("checkpoint shape mismatch for " + name);
    for (size_t i = 0; i < t.size(); ++i) t[i] = (*stored)[i];
  });
  auto load_moments = [&](const char* group, Adam& opt) {
    const std::string mp = std::string("adam.") + group + ".m.";
    const std::string vp = std::string("adam.") + group + ".v.";
    for (const auto& [name, t] : ar.arrays) {
      if (name.rfind(mp, 0) == 0)
        opt.moments()[name.substr(mp.size())].first = t.clone();
      else if (name.rfind(vp, 0) == 0)
        opt.moments()[name.substr(vp.size())].second = t.clone();
    }
  };
  load_moments("gen", st.opt_gen);
  load_moments("critic", st.opt_critic);
  st.opt_gen.set_t(ar.header.value("adam_t_gen", int64_t(0)));
  st.opt_critic.set_t(ar.header.value("adam_t_critic", int64_t(0)));

  std::vector<uint64_t> rng_state;
  for (const auto& v : ar.header.at("rng"))
    rng_state.push_back(std::stoull(v.get<std::string>(), nullptr, 16));
  st.rng.restore(rng_state);
  st.step = ar.header.at("step").get<int64_t>();
  return st;
}

NetworkBundle load_networks(const std::string& path) {
  Archive ar = load_archive(path);
  if (!ar.header.contains("config"))
    throw DataError("checkpoint missing config header: " + path);
  NetworkBundle b;
  b.cfg = RunConfig::from_json(ar.header["config"]);
  std::vector<char32_t> symbols;
  for (const auto& v : ar.header.at("charset"))
    symbols.push_back(char32_t(v.get<uint32_t>()));
  b.charset = Charset::from_symbols(symbols);
  b.writer_tags = ar.header.at("writer_tags").get<std::vector<std::string>>();
  b.step = ar.header.value("step", int64_t(0));
  b.nets = build_networks(b.cfg, int(b.writer_tags.size()), b.charset.n_classes());
  b.nets.visit_all([&](const std::string& name, Tensor<float>& t) {
    const Tensor<float>* stored = ar.find(name);
    if (!stored) throw DataError("checkpoint missing array: " + name);
    if (!stored->same_shape(t)) throw DataError("checkpoint shape mismatch for " + name);
    for (size_t i = 0; i < t.size(); ++i) t[i] = (*stored)[i];
  });
  b.cfg.require_paths(true, false, false);
  b.font = load_hex_font(b.cfg.font_path);
  return b;
}

// ---------------------------------------------------------------------------
// fit

void fit(TrainState& st, std::ostream* metrics_log) {
  fs::create_directories(st.cfg.out_dir);
  StepReport last_critic, last_gen;
  std::vector<std::string> pending_warnings;
  while (st.step < st.cfg.steps) {
    TrainBatch batch = sample_batch(st);
    if (st.step % 2 == 0)
      last_critic = critic_step(st, batch);
    else
      last_gen = generator_step(st, batch);
    ++st.step;
    const StepReport& rep = (st.step % 2 == 1) ? last_critic : last_gen;
    pending_warnings.insert(pending_warnings.end(), rep.warnings.begin(),
                            rep.warnings.end());

    if (metrics_log && st.step % st.cfg.log_interval == 0) {
      // one line per interval carrying the latest losses from both phases
      json line;
      line["step"] = st.step;
      line["d_hinge"] = last_critic.l_adv;
      line["critic_r"] = last_critic.l_r;
      line["critic_w"] = last_critic.l_w;
      line["gen_adv"] = last_gen.l_adv;
      line["gen_r"] = last_gen.l_r;
      line["gen_w"] = last_gen.l_w;
      line["gen_total"] = last_gen.total;
      line["sigma_d"] = last_gen.stats.sigma_d;
      line["sigma_r"] = last_gen.stats.sigma_r;
      line["sigma_w"] = last_gen.stats.sigma_w;
      if (!pending_warnings.empty()) {
        line["warnings"] = pending_warnings;
        pending_warnings.clear();
      }
      (*metrics_log) << line.dump() << "\n";
      metrics_log->flush();
    }
    if (st.step % st.cfg.checkpoint_interval == 0 || st.step == st.cfg.steps) {
      const std::string name =
          st.step == st.cfg.steps ? "checkpoint_final.sckp"
                                  : "checkpoint_" + std::to_string(st.step) + ".sckp";
      save_train_state(st, (fs::path(st.cfg.out_dir) / name).string());
    }
  }
}

}  // namespace scrawl
