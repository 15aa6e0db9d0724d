// Run configuration: one JSON document covering data paths, optimization,
// architecture widths, and the ablation toggles. The parsed source document
// is kept verbatim for embedding into checkpoints and reports.
#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace scrawl {

struct RunConfig {
  uint64_t seed = 1;
  std::string font_path;
  std::string manifest_path;
  std::string split_path;
  std::string out_dir = "runs/out";

  int steps = 2000;
  int batch_size = 4;
  int p_style = 2;
  int log_interval = 10;
  int checkpoint_interval = 500;

  double lr = 5e-5;         // generator phase (pinned)
  double critic_lr = 0.0;   // 0 -> same as lr
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double alpha = 0.7;
  double beta = 0.7;

  int d_model = 64;
  int n_heads = 2;
  int d_ff = 128;
  double dropout = 0.0;
  int gen_fuse_layers = 1;
  int gen_layers_per_scale = 1;
  int writerid_layers = 1;
  int recognizer_layers = 1;

  int n_scales = 2;
  bool use_cpe = true;
  std::string wiring = "conventional";
  bool use_vit_generator = true;
  bool use_vit_recognizer = true;
  bool use_vit_writerid = true;

  int disc_base_channels = 16;
  int recog_c1 = 16;
  int recog_c2 = 32;
  std::vector<int> decoder_channels;  // empty -> derived from d_model

  nlohmann::json raw;  // source document, embedded verbatim in artifacts

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;

  // throws ConfigError naming the missing field
  void require_paths(bool need_font, bool need_manifest, bool need_split) const;
};

}  // namespace scrawl
