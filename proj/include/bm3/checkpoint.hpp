#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "bm3/model.hpp"

namespace bm3 {

/// Contents of manifest.json alongside the per-tensor FMAT files.
struct CheckpointManifest {
  Index dim = 0;
  int layers = 1;
  double drop_prob = 0;
  double lambda_reg = 0;
  Index num_users = 0;
  Index num_items = 0;
  std::map<std::string, Index> modality_dims;  // modality key -> feature dim
  std::string dataset_fingerprint;             // hex
  int epoch = 0;
  // Where to find the data again for `evaluate`; empty when trained in memory.
  std::string dataset_dir;
  std::vector<int> cutoffs{10, 20};
};

/// Writes one FMAT per tensor (user_emb.fmat, proj_v_W.fmat, pred_b.fmat, ...)
/// plus manifest.json. Values are stored as binary32.
void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params, const CheckpointManifest& manifest);

struct Checkpoint {
  ModelParams params;
  CheckpointManifest manifest;
};

Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Rounds every parameter value to binary32, i.e. what a save/load round trip yields.
void round_to_checkpoint_precision(ModelParams& params);

std::string fingerprint_hex(std::uint64_t fp);

}  // namespace bm3
