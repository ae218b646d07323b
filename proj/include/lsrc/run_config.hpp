#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include "lsrc/model.hpp"
#include "lsrc/train.hpp"

// Flat key=value run configuration ('#' starts a comment, blank lines
// ignored). One file describes a whole run: model, training schedule, and
// file paths. See the README for the key reference.

namespace lsrc {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::string vocab_path;
  std::string checkpoint_path;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct KvFile {
  std::map<std::string, std::string> kv;
  std::string path;

  std::optional<std::string> get(const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  }
  std::string require(const std::string& key) const {
    auto v = get(key);
    if (!v) throw UsageError("config " + path + ": missing required key '" + key + "'");
    return *v;
  }
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      return std::stoll(*v);
    } catch (...) {
      throw UsageError("config " + path + ": key '" + key + "' is not an integer: " + *v);
    }
  }
  double get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      return std::stod(*v);
    } catch (...) {
      throw UsageError("config " + path + ": key '" + key + "' is not a number: " + *v);
    }
  }
};

inline KvFile parse_kv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open config: " + path);
  KvFile out;
  out.path = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config " + path + ": line " + std::to_string(lineno) +
                       " is not key=value: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw UsageError("config " + path + ": empty key at line " + std::to_string(lineno));
    out.kv[key] = val;
  }
  return out;
}

}  // namespace detail

inline RunConfig load_run_config(const std::string& path) {
  const auto kv = detail::parse_kv_file(path);
  RunConfig rc;

  const std::string arch = kv.require("arch");
  auto a = arch_from_name(arch);
  if (!a) throw UsageError("config " + path + ": unknown arch '" + arch + "'");
  rc.model.arch = *a;
  rc.model.vocab_size = kv.get_int("vocab_size", 0);
  rc.model.embed_size = kv.get_int("embed_size", 0);
  rc.model.hidden_size = kv.get_int("hidden_size", 0);
  rc.model.dense_size = kv.get_int("dense_size", 0);
  rc.model.validate();

  rc.train.lr0 = kv.get_double("lr", rc.train.lr0);
  rc.train.momentum = kv.get_double("momentum", rc.train.momentum);
  rc.train.weight_decay = kv.get_double("weight_decay", rc.train.weight_decay);
  rc.train.batch_size = kv.get_int("batch_size", rc.train.batch_size);
  rc.train.bptt_steps = kv.get_int("bptt_steps", rc.train.bptt_steps);
  rc.train.improve_threshold = kv.get_double("improve_threshold", rc.train.improve_threshold);
  rc.train.max_post_halving_epochs =
      kv.get_int("max_post_halving_epochs", rc.train.max_post_halving_epochs);
  rc.train.max_epochs = kv.get_int("max_epochs", rc.train.max_epochs);
  rc.train.clip_norm = kv.get_double("clip_norm", rc.train.clip_norm);
  rc.train.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
  rc.train.validate();

  rc.train_path = kv.get("train").value_or("");
  rc.valid_path = kv.get("valid").value_or("");
  rc.test_path = kv.get("test").value_or("");
  rc.vocab_path = kv.get("vocab").value_or("");
  rc.checkpoint_path = kv.get("checkpoint").value_or("");
  return rc;
}

inline void require_readable(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("config: no ") + what + " path given");
  if (!std::filesystem::exists(path))
    throw UsageError(std::string(what) + " path does not exist: " + path);
}

}  // namespace lsrc
