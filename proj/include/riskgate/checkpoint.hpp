#pragma once

// Flat binary checkpoints for the risk model and the critic ensemble.
//
// Layout (all integers and reals little-endian):
//   magic   "RGK1" | "RGKE"        4 bytes
//   header  u32 fields as documented per kind
//   params  IEEE-754 doubles, 64-bit little-endian, in flat layout order
//           (w1 row-major, b1, w2, b2 for hidden nets; w, b for linear)
//
// Risk file ("RGK1"): feature_dim, action_count, hidden_dim, u64
// updates_seen, f64 learning_rate, u64 n_params, params.
// Ensemble file ("RGKE"): feature_dim, action_count, members, hidden_dim,
// flags (bit0 joint encoding, bit1 gate bootstrap), sync_interval, f64
// learning_rate, f64 mask_prob, f64 reward_clip, u64 update_count, u64
// n_params_per_member, then member params, then target params.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "riskgate/critics.hpp"
#include "riskgate/risk.hpp"

namespace riskgate {

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline void put_params(std::ostream& os, const std::vector<double>& p) {
  for (double v : p) put_f64(os, v);
}

inline void get_params(std::istream& is, std::vector<double>& p) {
  for (double& v : p) v = get_f64(is);
}

}  // namespace detail

inline void write_risk_checkpoint(const std::filesystem::path& path, const RiskModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path.string());
  os.write("RGK1", 4);
  detail::put_u32(os, static_cast<std::uint32_t>(model.feature_dim()));
  detail::put_u32(os, static_cast<std::uint32_t>(model.action_count()));
  detail::put_u32(os, static_cast<std::uint32_t>(model.net().hidden_dim()));
  detail::put_u64(os, model.updates_seen());
  detail::put_f64(os, model.learning_rate());
  detail::put_u64(os, model.net().params().size());
  detail::put_params(os, model.net().params());
}

inline RiskModel read_risk_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (std::string(magic, 4) != "RGK1") throw std::runtime_error("bad risk checkpoint magic");
  const int feat = static_cast<int>(detail::get_u32(is));
  const int actions = static_cast<int>(detail::get_u32(is));
  const int hidden = static_cast<int>(detail::get_u32(is));
  const std::uint64_t updates = detail::get_u64(is);
  const double lr = detail::get_f64(is);
  const std::uint64_t n = detail::get_u64(is);
  RiskModel model(feat, actions, hidden, lr);
  if (model.net().params().size() != n) throw std::runtime_error("risk checkpoint size mismatch");
  detail::get_params(is, model.net().params());
  model.set_updates_seen(updates);
  if (!is) throw std::runtime_error("truncated risk checkpoint");
  return model;
}

inline void write_critic_checkpoint(const std::filesystem::path& path, const CriticEnsemble& ens) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path.string());
  const auto& cfg = ens.config();
  os.write("RGKE", 4);
  detail::put_u32(os, static_cast<std::uint32_t>(ens.feature_dim()));
  detail::put_u32(os, static_cast<std::uint32_t>(ens.action_count()));
  detail::put_u32(os, static_cast<std::uint32_t>(cfg.members));
  detail::put_u32(os, static_cast<std::uint32_t>(cfg.hidden_dim));
  std::uint32_t flags = 0;
  if (cfg.tabular_joint_encoding) flags |= 1u;
  if (cfg.gate_bootstrap) flags |= 2u;
  detail::put_u32(os, flags);
  detail::put_u32(os, static_cast<std::uint32_t>(cfg.sync_interval));
  detail::put_f64(os, cfg.learning_rate);
  detail::put_f64(os, cfg.bootstrap_mask_prob);
  detail::put_f64(os, cfg.reward_clip);
  detail::put_u64(os, ens.update_count());
  detail::put_u64(os, ens.member(0).params().size());
  for (int m = 0; m < ens.member_count(); ++m)
    detail::put_params(os, ens.member(static_cast<std::size_t>(m)).params());
  for (int m = 0; m < ens.member_count(); ++m)
    detail::put_params(os, ens.target(static_cast<std::size_t>(m)).params());
}

inline CriticEnsemble read_critic_checkpoint(const std::filesystem::path& path, std::uint64_t seed) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (std::string(magic, 4) != "RGKE") throw std::runtime_error("bad critic checkpoint magic");
  const int feat = static_cast<int>(detail::get_u32(is));
  const int actions = static_cast<int>(detail::get_u32(is));
  CriticConfig cfg;
  cfg.members = static_cast<int>(detail::get_u32(is));
  cfg.hidden_dim = static_cast<int>(detail::get_u32(is));
  const std::uint32_t flags = detail::get_u32(is);
  cfg.tabular_joint_encoding = (flags & 1u) != 0;
  cfg.gate_bootstrap = (flags & 2u) != 0;
  cfg.sync_interval = static_cast<int>(detail::get_u32(is));
  cfg.learning_rate = detail::get_f64(is);
  cfg.bootstrap_mask_prob = detail::get_f64(is);
  cfg.reward_clip = detail::get_f64(is);
  const std::uint64_t updates = detail::get_u64(is);
  const std::uint64_t n = detail::get_u64(is);
  CriticEnsemble ens(feat, actions, cfg, seed, /*random_init=*/false);
  if (ens.member(0).params().size() != n) throw std::runtime_error("critic checkpoint size mismatch");
  for (int m = 0; m < cfg.members; ++m) detail::get_params(is, ens.member(static_cast<std::size_t>(m)).params());
  for (int m = 0; m < cfg.members; ++m) detail::get_params(is, ens.target(static_cast<std::size_t>(m)).params());
  ens.set_update_count(updates);
  if (!is) throw std::runtime_error("truncated critic checkpoint");
  return ens;
}

}  // namespace riskgate
