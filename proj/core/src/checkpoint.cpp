#include "vsensor/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace vsensor {

namespace {

constexpr char kMagic[4] = {'V', 'S', 'C', 'K'};

template <class T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Block {
  std::string name;
  std::size_t rows = 0, cols = 0;
  std::vector<double> values;
};

void put_block(std::string& out, const Block& b) {
  if (b.name.size() > 0xffff) throw CheckpointError("block name too long");
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(b.name.size()));
  out += b.name;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b.rows));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(b.cols));
  for (double v : b.values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string r = s_.substr(pos_, n);
    pos_ += n;
    return r;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (s_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

std::vector<Block> model_blocks(const Model& model) {
  std::vector<Block> out;
  if (model.is_neural()) {
    Model copy = model;  // parameters() needs a mutable model
    for (const Param* p : copy.parameters()) {
      if (!p->value.all_finite()) throw CheckpointError("refusing to save non-finite parameter " + p->name);
      const auto v = p->value.values();
      out.push_back({p->name, p->value.rows(), p->value.cols(), {v.begin(), v.end()}});
    }
    return out;
  }
  const auto& g = std::get<GbtModel>(model.impl());
  if (!std::isfinite(g.init)) throw CheckpointError("refusing to save non-finite GBT init");
  out.push_back({"gbt.meta", 1, 2, {g.init, static_cast<double>(g.n_features)}});
  for (std::size_t i = 0; i < g.trees.size(); ++i) {
    Block b{"gbt.tree." + std::to_string(i), g.trees[i].nodes.size(), 5, {}};
    for (const auto& n : g.trees[i].nodes) {
      if (!std::isfinite(n.threshold) || !std::isfinite(n.value)) {
        throw CheckpointError("refusing to save non-finite GBT node");
      }
      b.values.insert(b.values.end(), {static_cast<double>(n.feature), n.threshold, static_cast<double>(n.left),
                                       static_cast<double>(n.right), n.value});
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

std::string encode_checkpoint(const Model& model, const std::optional<StandardizationStats>& stats,
                              const nlohmann::json& config, const FeatureSchema& schema) {
  std::vector<Block> blocks;
  if (stats) {
    for (double v : stats->mean) {
      if (!std::isfinite(v)) throw CheckpointError("refusing to save non-finite standardization mean");
    }
    for (double v : stats->std) {
      if (!std::isfinite(v)) throw CheckpointError("refusing to save non-finite standardization std");
    }
    blocks.push_back({"stats.mean", 1, stats->mean.size(), stats->mean});
    blocks.push_back({"stats.std", 1, stats->std.size(), stats->std});
  }
  for (auto& b : model_blocks(model)) blocks.push_back(std::move(b));

  const nlohmann::json header = {
      {"model", to_json(model.config())}, {"input_dim", model.input_dim()}, {"meta", config}};
  const std::string js = header.dump();

  std::string out(kMagic, 4);
  put_le<std::uint16_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, schema.hash());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(js.size()));
  out += js;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) put_block(out, b);
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes, const FeatureSchema& schema) {
  Reader r(bytes);
  if (r.bytes(4) != std::string(kMagic, 4)) throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  if (r.get<std::uint64_t>() != schema.hash()) throw CheckpointError("feature schema hash mismatch");
  const auto js_len = r.get<std::uint32_t>();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.bytes(js_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint config: ") + e.what());
  }

  std::map<std::string, Block> blocks;
  std::vector<std::string> order;
  const auto n_blocks = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    Block b;
    b.name = r.bytes(r.get<std::uint16_t>());
    b.rows = r.get<std::uint32_t>();
    b.cols = r.get<std::uint32_t>();
    b.values.resize(b.rows * b.cols);
    for (double& v : b.values) v = std::bit_cast<double>(r.get<std::uint64_t>());
    order.push_back(b.name);
    if (!blocks.emplace(b.name, std::move(b)).second) throw CheckpointError("duplicate block " + order.back());
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint blocks");

  Checkpoint ck;
  ck.config = header.value("meta", nlohmann::json::object());
  ModelConfig mc;
  std::size_t input_dim = 0;
  try {
    mc = model_config_from_json(header.at("model"));
    input_dim = header.at("input_dim").get<std::size_t>();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad checkpoint config: ") + e.what());
  }
  if (input_dim != schema.size()) throw CheckpointError("checkpoint input width differs from the schema");

  if (blocks.count("stats.mean")) {
    const auto& m = blocks.at("stats.mean");
    const auto& s = blocks.at("stats.std");
    ck.stats = StandardizationStats{m.values, s.values};
  }

  ck.model = Model::create(mc, input_dim, 0);
  std::size_t used = ck.stats ? 2 : 0;
  if (ck.model.is_neural()) {
    for (Param* p : ck.model.parameters()) {
      auto it = blocks.find(p->name);
      if (it == blocks.end()) throw CheckpointError("missing parameter block " + p->name);
      if (it->second.rows != p->value.rows() || it->second.cols != p->value.cols()) {
        throw CheckpointError("shape mismatch for " + p->name + ": expected " + p->value.shape_string());
      }
      std::copy(it->second.values.begin(), it->second.values.end(), p->value.values().begin());
      ++used;
    }
  } else {
    auto& g = std::get<GbtModel>(ck.model.impl());
    auto it = blocks.find("gbt.meta");
    if (it == blocks.end() || it->second.values.size() != 2) throw CheckpointError("missing gbt.meta block");
    g.init = it->second.values[0];
    g.n_features = static_cast<std::size_t>(it->second.values[1]);
    ++used;
    for (std::size_t i = 0;; ++i) {
      auto t = blocks.find("gbt.tree." + std::to_string(i));
      if (t == blocks.end()) break;
      if (t->second.cols != 5) throw CheckpointError("bad tree block " + t->first);
      RegressionTree tree;
      for (std::size_t k = 0; k < t->second.rows; ++k) {
        const double* v = &t->second.values[k * 5];
        tree.nodes.push_back({static_cast<std::int32_t>(v[0]), v[1], static_cast<std::int32_t>(v[2]),
                              static_cast<std::int32_t>(v[3]), v[4]});
      }
      g.trees.push_back(std::move(tree));
      ++used;
    }
  }
  if (used != blocks.size()) throw CheckpointError("checkpoint has unrecognised blocks");
  return ck;
}

void save_checkpoint(const std::string& path, const Model& model, const std::optional<StandardizationStats>& stats,
                     const nlohmann::json& config, const FeatureSchema& schema) {
  const std::string bytes = encode_checkpoint(model, stats, config, schema);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write " + tmp);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path, const FeatureSchema& schema) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str(), schema);
}

}  // namespace vsensor
