#include "scrawl/evaluate.hpp"

#include <algorithm>

#include "scrawl/errors.hpp"

namespace scrawl {

using nlohmann::json;

Tensor<float> generate_one(TrainState& st, const std::vector<Tensor<float>>& style,
                           const std::string& text) {
  GeneratedBatch<float> b =
      generate(st.nets.gen, st.nets.writer, style, 0, {text}, st.font);
  return b.images[0];
}

namespace {

// style images for a sample's writer, drawn from the training manifest
std::vector<Tensor<float>> style_for_writer(TrainState& st, int writer_id,
                                            uint64_t seed) {
  std::vector<int> owned;
  for (size_t i = 0; i < st.manifest.samples.size(); ++i)
    if (st.manifest.samples[i].writer_id == writer_id) owned.push_back(int(i));
  if (owned.empty())
    throw DataError("no style exemplars for writer " + std::to_string(writer_id));
  Rng rng(seed);
  std::vector<Tensor<float>> images;
  const int p = st.cfg.p_style;
  if (owned.size() >= size_t(p)) {
    for (size_t k : rng.sample_without_replacement(owned.size(), size_t(p)))
      images.push_back(st.real_image(owned[k]));
  } else {
    for (int i = 0; i < p; ++i)
      images.push_back(st.real_image(owned[rng.next_index(owned.size())]));
  }
  return images;
}

std::vector<Tensor<float>> generate_over_samples(TrainState& st,
                                                 const std::vector<Sample>& pool,
                                                 int n, uint64_t seed,
                                                 std::vector<std::string>* texts) {
  std::vector<Tensor<float>> out;
  for (int k = 0; k < n; ++k) {
    const Sample& s = pool[size_t(k) % pool.size()];
    const auto style = style_for_writer(st, s.writer_id, seed + uint64_t(k) * 7919);
    out.push_back(generate_one(st, style, s.transcript));
    if (texts) texts->push_back(s.transcript);
  }
  return out;
}

FeatureSet features_of(const std::vector<Tensor<float>>& images, uint64_t seed) {
  std::vector<Tensor<float>> padded;
  padded.reserve(images.size());
  for (const auto& img : images) padded.push_back(pad_or_truncate_eval(img));
  return default_feature_extractor(padded, seed);
}

}  // namespace

FourWayResult eval_four_way(const EvalGrid& grid, TrainState& st, int n_per_pool,
                            uint64_t seed) {
  if (n_per_pool <= 0) throw ConfigError("eval_four_way: n_per_pool must be > 0");
  FourWayResult res;
  for (int p = 0; p < 4; ++p) {
    const auto& pool = grid.pools[p];
    res.n_real[p] = int(pool.size());
    if (pool.size() < 2 || n_per_pool < 2) continue;  // covariance undefined
    std::vector<Tensor<float>> real;
    real.reserve(pool.size());
    for (const Sample& s : pool) real.push_back(load_preprocessed(s));
    const auto fake =
        generate_over_samples(st, pool, n_per_pool, seed + uint64_t(p) * 1313, nullptr);
    res.n_generated[p] = int(fake.size());
    res.fid_value[p] = fid(features_of(real, seed), features_of(fake, seed));
  }
  return res;
}

json EvalReport::to_json() const {
  json j;
  j["fid"] = fid_value;
  j["kid"] = kid_value;
  j["cer"] = cer_value;
  j["wer"] = wer_value;
  j["ned"] = ned_value;
  json fw = json::object();
  for (int p = 0; p < 4; ++p) {
    json cell;
    if (four_way.fid_value[p])
      cell["fid"] = *four_way.fid_value[p];
    else
      cell["fid"] = nullptr;
    cell["n_real"] = four_way.n_real[p];
    cell["n_generated"] = four_way.n_generated[p];
    fw[EvalGrid::pool_name(p)] = cell;
  }
  j["four_way"] = fw;
  j["extractor_id"] = extractor_id;
  return j;
}

EvalReport evaluate_checkpoint(TrainState& st, const std::vector<Sample>& eval_samples,
                               const EvalGrid& grid, const EvalOptions& opt) {
  if (eval_samples.size() < 2)
    throw DataError("evaluate: need at least 2 evaluation samples");
  EvalReport rep;

  std::vector<Tensor<float>> real;
  real.reserve(eval_samples.size());
  for (const Sample& s : eval_samples) real.push_back(load_preprocessed(s));

  std::vector<std::string> gen_texts;
  const int n_gen = std::max(2, opt.n_gen);
  const auto fake =
      generate_over_samples(st, eval_samples, n_gen, opt.seed, &gen_texts);

  const FeatureSet real_f = features_of(real, opt.seed);
  const FeatureSet fake_f = features_of(fake, opt.seed);
  rep.extractor_id = real_f.extractor_id;
  rep.fid_value = fid(real_f, fake_f);
  const int subset =
      std::min({opt.kid_subset_size, real_f.n(), fake_f.n()});
  rep.kid_value = subset >= 2
                      ? kid(real_f, fake_f, subset, opt.kid_subsets, opt.seed)
                      : 0.0;

  // transcription fidelity of generated images under the trained recognizer
  std::vector<std::pair<std::string, std::string>> pairs;
  for (size_t i = 0; i < fake.size(); ++i) {
    Graph<float> g(false);
    Var<float> logits = st.nets.recog.recognize(g, g.constant(fake[i]));
    pairs.emplace_back(greedy_decode(logits.value(), st.charset), gen_texts[i]);
    const EditCounts counts = edit_distance_utf8(pairs.back().first, pairs.back().second);
    rep.diffs.push_back({pairs.back().first, pairs.back().second,
                         counts.substitutions, counts.insertions, counts.deletions});
  }
  rep.cer_value = cer(pairs);
  rep.wer_value = wer(pairs);
  rep.ned_value = ned(pairs);

  rep.four_way = eval_four_way(grid, st, opt.n_per_pool, opt.seed);
  return rep;
}

}  // namespace scrawl
