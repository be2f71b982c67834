#pragma once

// Flat named-parameter store. Registration order fixes the layout, the
// checkpoint format, and the initialization stream, so two models built
// from the same code and seed are bit-identical.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dagmp/tensor.hpp"

namespace dagmp {

class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor2 value;
    int fan_in = 1;  // scale for the uniform initializer
  };

  int add(const std::string& name, int rows, int cols, int fan_in) {
    if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
    if (fan_in <= 0) throw std::invalid_argument("ParamStore: fan_in must be positive");
    Entry e;
    e.name = name;
    e.value = Tensor2(rows, cols);
    e.fan_in = fan_in;
    entries_.push_back(std::move(e));
    index_[name] = static_cast<int>(entries_.size() - 1);
    return static_cast<int>(entries_.size() - 1);
  }

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], one RNG stream consumed
  // in registration order.
  void init_uniform(uint64_t seed) {
    seed_ = seed;
    std::mt19937_64 rng(seed);
    for (Entry& e : entries_) {
      double bound = 1.0 / std::sqrt(static_cast<double>(e.fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& x : e.value.v) x = dist(rng);
    }
  }

  int count() const { return static_cast<int>(entries_.size()); }
  const Entry& entry(int i) const { return entries_.at(i); }
  Tensor2& value(int i) { return entries_.at(i).value; }
  const Tensor2& value(int i) const { return entries_.at(i).value; }

  int find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown name " + name);
    return it->second;
  }

  uint64_t seed() const { return seed_; }

  size_t total_scalars() const {
    size_t n = 0;
    for (const Entry& e : entries_) n += e.value.size();
    return n;
  }

  // FNV-1a over the layout string "name:rows:cols;...". Identifies the
  // architecture a checkpoint belongs to.
  uint64_t layout_hash() const {
    uint64_t h = 1469598103934665603ull;
    auto feed = [&h](const std::string& s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
      }
    };
    for (const Entry& e : entries_) {
      feed(e.name);
      feed(":" + std::to_string(e.value.rows) + ":" + std::to_string(e.value.cols) + ";");
    }
    return h;
  }

  // Writes <path> with little-endian f64 values in registration order and
  // <path>.manifest.json describing them. extra_config is embedded so a
  // checkpoint can be evaluated without the original config file.
  void save(const std::string& path, const nlohmann::json& extra_config = {}) const {
    std::ofstream bin(path, std::ios::binary | std::ios::trunc);
    if (!bin) throw std::runtime_error("cannot write " + path);
    for (const Entry& e : entries_) write_le(bin, e.value.v);
    bin.close();

    nlohmann::json manifest;
    manifest["format"] = "dagmp-params-v1";
    manifest["seed"] = seed_;
    manifest["layout_hash"] = layout_hash();
    nlohmann::json tensors = nlohmann::json::array();
    size_t offset = 0;
    for (const Entry& e : entries_) {
      tensors.push_back({{"name", e.name},
                         {"rows", e.value.rows},
                         {"cols", e.value.cols},
                         {"offset", offset}});
      offset += e.value.size() * sizeof(double);
    }
    manifest["tensors"] = std::move(tensors);
    if (!extra_config.is_null() && !extra_config.empty()) manifest["config"] = extra_config;
    std::ofstream mf(path + ".manifest.json", std::ios::trunc);
    if (!mf) throw std::runtime_error("cannot write " + path + ".manifest.json");
    mf << manifest.dump(2) << "\n";
  }

  // Loads values into an already-registered store; layouts must match.
  void load(const std::string& path) {
    nlohmann::json manifest = read_manifest(path);
    if (manifest.value("layout_hash", 0ull) != layout_hash())
      throw std::runtime_error("checkpoint layout does not match model: " + path);
    seed_ = manifest.value("seed", 0ull);
    std::ifstream bin(path, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot read " + path);
    for (Entry& e : entries_) read_le(bin, e.value.v, path);
  }

  static nlohmann::json read_manifest(const std::string& path) {
    std::ifstream mf(path + ".manifest.json");
    if (!mf) throw std::runtime_error("cannot read " + path + ".manifest.json");
    nlohmann::json manifest;
    mf >> manifest;
    return manifest;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
  uint64_t seed_ = 0;

  static void write_le(std::ofstream& out, const std::vector<double>& xs) {
    for (double x : xs) {
      uint64_t bits;
      std::memcpy(&bits, &x, 8);
      unsigned char buf[8];
      for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
      out.write(reinterpret_cast<const char*>(buf), 8);
    }
  }

  static void read_le(std::ifstream& in, std::vector<double>& xs, const std::string& path) {
    for (double& x : xs) {
      unsigned char buf[8];
      in.read(reinterpret_cast<char*>(buf), 8);
      if (!in) throw std::runtime_error("truncated checkpoint: " + path);
      uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(buf[i]) << (8 * i);
      std::memcpy(&x, &bits, 8);
    }
  }
};

// Per-tape leaves for every parameter, created on demand.
class ParamBinding {
 public:
  ParamBinding(Tape& tape, ParamStore& store) : tape_(&tape), store_(&store) {
    vars_.assign(store.count(), Var{});
  }

  Var operator[](int i) {
    if (!vars_.at(i).valid()) vars_[i] = tape_->leaf(store_->value(i), true);
    return vars_[i];
  }

  // Adds tape gradients of all bound parameters into acc (laid out like the store).
  void accumulate_grads(std::vector<Tensor2>& acc) const {
    if (acc.size() != vars_.size()) {
      acc.resize(vars_.size());
      for (size_t i = 0; i < vars_.size(); ++i)
        acc[i] = Tensor2(store_->value(static_cast<int>(i)).rows,
                         store_->value(static_cast<int>(i)).cols);
    }
    for (size_t i = 0; i < vars_.size(); ++i) {
      if (!vars_[i].valid()) continue;
      const Tensor2& g = tape_->grad(vars_[i]);
      if (g.size() == 0) continue;
      for (size_t j = 0; j < g.size(); ++j) acc[i].v[j] += g.v[j];
    }
  }

  Tape& tape() { return *tape_; }
  ParamStore& store() { return *store_; }

 private:
  Tape* tape_;
  ParamStore* store_;
  std::vector<Var> vars_;
};

}  // namespace dagmp
