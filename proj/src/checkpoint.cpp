#include "bm3/checkpoint.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "bm3/fmat.hpp"

namespace bm3 {

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params, const CheckpointManifest& manifest) {
  std::filesystem::create_directories(dir);
  for (const ParamTensor* p : params.all_params()) fmat::write(dir / (p->name + ".fmat"), p->value);

  nlohmann::ordered_json j;
  j["d"] = manifest.dim;
  j["L"] = manifest.layers;
  j["p"] = manifest.drop_prob;
  j["lambda"] = manifest.lambda_reg;
  j["num_users"] = manifest.num_users;
  j["num_items"] = manifest.num_items;
  nlohmann::ordered_json mods = nlohmann::ordered_json::object();
  for (const auto& [key, d] : manifest.modality_dims) mods[key] = d;
  j["modalities"] = mods;
  j["dataset_fingerprint"] = manifest.dataset_fingerprint;
  j["epoch"] = manifest.epoch;
  j["dataset_dir"] = manifest.dataset_dir;
  j["cutoffs"] = manifest.cutoffs;

  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw DataError("cannot write manifest in " + dir.string());
  out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("no manifest.json in checkpoint directory " + dir.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest.json in " + dir.string() + ": " + e.what());
  }

  Checkpoint ck;
  auto& m = ck.manifest;
  try {
    m.dim = j.at("d").get<Index>();
    m.layers = j.at("L").get<int>();
    m.drop_prob = j.at("p").get<double>();
    m.lambda_reg = j.at("lambda").get<double>();
    m.num_users = j.at("num_users").get<Index>();
    m.num_items = j.at("num_items").get<Index>();
    for (const auto& [key, d] : j.at("modalities").items()) m.modality_dims[key] = d.get<Index>();
    m.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
    m.epoch = j.at("epoch").get<int>();
    m.dataset_dir = j.value("dataset_dir", "");
    if (j.contains("cutoffs")) m.cutoffs = j.at("cutoffs").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest.json in " + dir.string() + ": " + e.what());
  }

  ck.params = init_model(m.num_users, m.num_items, m.dim, m.modality_dims, 0);
  for (ParamTensor* p : ck.params.all_params()) {
    Matrix v = fmat::read(dir / (p->name + ".fmat"));
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols())
      throw DataError("checkpoint tensor " + p->name + " has the wrong shape");
    p->value = std::move(v);
  }
  return ck;
}

void round_to_checkpoint_precision(ModelParams& params) {
  for (ParamTensor* p : params.all_params()) p->value = p->value.cast<float>().cast<Real>();
}

}  // namespace bm3
