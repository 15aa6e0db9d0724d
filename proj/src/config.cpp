#include "scrawl/config.hpp"

#include <fstream>

#include "scrawl/errors.hpp"
#include "scrawl/generator.hpp"

namespace scrawl {

using nlohmann::json;

namespace {

template <class T>
void read_field(const json& j, const char* name, T& out) {
  if (!j.contains(name)) return;
  try {
    out = j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + name + "' has the wrong type");
  }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  RunConfig c;
  c.raw = j;
  read_field(j, "seed", c.seed);
  read_field(j, "font", c.font_path);
  read_field(j, "manifest", c.manifest_path);
  read_field(j, "split", c.split_path);
  read_field(j, "out_dir", c.out_dir);
  read_field(j, "steps", c.steps);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "p_style", c.p_style);
  read_field(j, "log_interval", c.log_interval);
  read_field(j, "checkpoint_interval", c.checkpoint_interval);
  read_field(j, "lr", c.lr);
  read_field(j, "critic_lr", c.critic_lr);
  read_field(j, "adam_beta1", c.adam_beta1);
  read_field(j, "adam_beta2", c.adam_beta2);
  read_field(j, "alpha", c.alpha);
  read_field(j, "beta", c.beta);
  read_field(j, "d_model", c.d_model);
  read_field(j, "n_heads", c.n_heads);
  read_field(j, "d_ff", c.d_ff);
  read_field(j, "dropout", c.dropout);
  read_field(j, "gen_fuse_layers", c.gen_fuse_layers);
  read_field(j, "gen_layers_per_scale", c.gen_layers_per_scale);
  read_field(j, "writerid_layers", c.writerid_layers);
  read_field(j, "recognizer_layers", c.recognizer_layers);
  read_field(j, "n_scales", c.n_scales);
  read_field(j, "use_cpe", c.use_cpe);
  read_field(j, "wiring", c.wiring);
  read_field(j, "use_vit_generator", c.use_vit_generator);
  read_field(j, "use_vit_recognizer", c.use_vit_recognizer);
  read_field(j, "use_vit_writerid", c.use_vit_writerid);
  read_field(j, "disc_base_channels", c.disc_base_channels);
  read_field(j, "recog_c1", c.recog_c1);
  read_field(j, "recog_c2", c.recog_c2);
  read_field(j, "decoder_channels", c.decoder_channels);

  for (const auto& [key, field] : std::initializer_list<std::pair<const char*, int>>{
           {"steps", c.steps},
           {"batch_size", c.batch_size},
           {"p_style", c.p_style},
           {"log_interval", c.log_interval},
           {"checkpoint_interval", c.checkpoint_interval},
           {"d_model", c.d_model},
           {"n_heads", c.n_heads},
           {"d_ff", c.d_ff}})
    if (field < 1)
      throw ConfigError(std::string("config field '") + key + "' must be >= 1");
  if (c.d_model % c.n_heads != 0)
    throw ConfigError("config: d_model must be divisible by n_heads");
  if (c.lr <= 0) throw ConfigError("config field 'lr' must be > 0");
  if (c.critic_lr < 0)
    throw ConfigError("config field 'critic_lr' must be >= 0");
  if (c.alpha <= 0 || c.alpha > 10 || c.beta <= 0 || c.beta > 10)
    throw ConfigError("config: alpha/beta must lie in (0, 10]");
  if (c.dropout < 0 || c.dropout >= 1)
    throw ConfigError("config field 'dropout' must lie in [0,1)");
  if (c.n_scales < 1 || c.n_scales > 4)
    throw ConfigError("config field 'n_scales' must lie in 1..4");
  wiring_from_string(c.wiring);  // validates
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  json j = raw.is_object() ? raw : json::object();
  j["seed"] = seed;
  j["font"] = font_path;
  j["manifest"] = manifest_path;
  j["split"] = split_path;
  j["out_dir"] = out_dir;
  j["steps"] = steps;
  j["batch_size"] = batch_size;
  j["p_style"] = p_style;
  j["log_interval"] = log_interval;
  j["checkpoint_interval"] = checkpoint_interval;
  j["lr"] = lr;
  j["critic_lr"] = critic_lr;
  j["adam_beta1"] = adam_beta1;
  j["adam_beta2"] = adam_beta2;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["d_model"] = d_model;
  j["n_heads"] = n_heads;
  j["d_ff"] = d_ff;
  j["dropout"] = dropout;
  j["gen_fuse_layers"] = gen_fuse_layers;
  j["gen_layers_per_scale"] = gen_layers_per_scale;
  j["writerid_layers"] = writerid_layers;
  j["recognizer_layers"] = recognizer_layers;
  j["n_scales"] = n_scales;
  j["use_cpe"] = use_cpe;
  j["wiring"] = wiring;
  j["use_vit_generator"] = use_vit_generator;
  j["use_vit_recognizer"] = use_vit_recognizer;
  j["use_vit_writerid"] = use_vit_writerid;
  j["disc_base_channels"] = disc_base_channels;
  j["recog_c1"] = recog_c1;
  j["recog_c2"] = recog_c2;
  j["decoder_channels"] = decoder_channels;
  return j;
}

void RunConfig::require_paths(bool need_font, bool need_manifest,
                              bool need_split) const {
  if (need_font && font_path.empty())
    throw ConfigError("config field 'font' is required");
  if (need_manifest && manifest_path.empty())
    throw ConfigError("config field 'manifest' is required");
  if (need_split && split_path.empty())
    throw ConfigError("config field 'split' is required");
}

}  // namespace scrawl
