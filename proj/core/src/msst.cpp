#include "dmssn/msst.hpp"

#include <numeric>
#include <string>

#include "dmssn/error.hpp"

namespace dmssn {

void MssBlockConfig::validate() const {
  if (channels < 1 || heads_per_group < 1 || channels % heads_per_group != 0) {
    throw ConfigError("MSS block: channels (" + std::to_string(channels) + ") must be divisible by heads_per_group (" +
                      std::to_string(heads_per_group) + ")");
  }
  if (reduction < 1) throw ConfigError("MSS block: reduction K must be >= 1");
  if (ffn_ratio < 1) throw ConfigError("MSS block: ffn_ratio must be >= 1");
}

MssBlockConfig MsstConfig::block_config(int stage) const {
  const auto& s = stages.at(static_cast<std::size_t>(stage));
  return {s.channels, heads_per_group, s.reduction, ffn_ratio};
}

int MsstConfig::min_input_size() const {
  int l = 1, cumulative = 1;
  for (const auto& s : stages) {
    cumulative *= s.stride;
    l = std::lcm(l, cumulative * s.reduction);
  }
  return l;
}

void MsstConfig::validate() const {
  if (stages.empty()) throw ConfigError("MSST needs at least one stage");
  if (in_channels < 1) throw ConfigError("MSST input channels must be >= 1");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    if (s.blocks < 0 || s.stride < 1) throw ConfigError("MSST stage " + std::to_string(i + 1) + ": bad blocks/stride");
    if (i > 0 && s.channels < stages[i - 1].channels) {
      throw ConfigError("MSST channel widths must be nondecreasing over stages");
    }
    block_config(static_cast<int>(i)).validate();
  }
}

PatchEmbed::PatchEmbed(int in, int out, int stride, nn::Rng& rng)
    : proj(in, out, stride, stride, 0, rng), norm(out) {}

Var PatchEmbed::project(const Var& x) const {
  const Tensor& v = x.value();
  require_map(v, "patch_embed");
  const int s = proj.stride;
  if (v.height() % s != 0 || v.width() % s != 0) {
    const int ph = (s - v.height() % s) % s, pw = (s - v.width() % s) % s;
    throw ShapeError("patch_embed: " + std::to_string(v.height()) + "x" + std::to_string(v.width()) +
                     " is not divisible by stride " + std::to_string(s) + "; pad by " + std::to_string(ph) + " rows and " +
                     std::to_string(pw) + " columns");
  }
  return proj(x);
}

void PatchEmbed::collect(const std::string& prefix, NamedParams& out) const {
  proj.collect(prefix + ".proj", out);
  norm.collect(prefix + ".norm", out);
}

Var group_attention(const Var& q, const Var& k, const Var& v, int heads) { return ops::attention(q, k, v, heads); }

MssBlock::MssBlock(const MssBlockConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const int c = cfg.channels;
  query = nn::Linear(c, 2 * c, rng);
  reduce = nn::Conv2d(c, c, cfg.reduction, cfg.reduction, 0, rng);
  key1 = nn::Linear(c, c, rng);
  value1 = nn::Linear(c, c, rng);
  key2 = nn::SharedSpatialConv(3, rng);
  value2 = nn::SharedSpatialConv(3, rng);
  proj = nn::Linear(2 * c, c, rng);
  ffn_norm = nn::LayerNorm(c);
  fc1 = nn::Linear(c, c * cfg.ffn_ratio, rng);
  fc2 = nn::Linear(c * cfg.ffn_ratio, c, rng);
}

QkvMaps MssBlock::compute_qkv(const Var& e) const {
  const Tensor& v = e.value();
  require_map(v, "mss_block");
  const int c = cfg_.channels, k = cfg_.reduction;
  if (v.channels() != c) {
    throw ShapeError("mss_block expects " + std::to_string(c) + " channels, got " + std::to_string(v.channels()));
  }
  if (v.height() % k != 0 || v.width() % k != 0) {
    throw ShapeError("mss_block: " + std::to_string(v.height()) + "x" + std::to_string(v.width()) +
                     " is not divisible by the reduction K=" + std::to_string(k));
  }
  QkvMaps m;
  Var q = query(e);
  m.q1 = ops::slice_channels(q, 0, c);
  m.q2 = ops::slice_channels(q, c, c);
  m.e_hat = reduce(e);
  m.k1 = key1(m.e_hat);
  m.v1 = value1(m.e_hat);
  m.k2 = key2(m.e_hat);
  m.v2 = value2(m.e_hat);
  return m;
}

Var MssBlock::operator()(const Var& e) const {
  const QkvMaps m = compute_qkv(e);
  Var a1 = group_attention(m.q1, m.k1, m.v1, cfg_.heads_per_group);
  Var a2 = group_attention(m.q2, m.k2, m.v2, cfg_.heads_per_group);
  Var a = proj(ops::concat_channels(a1, a2));
  return ops::add(fc2(ops::gelu(fc1(ffn_norm(a)))), e);
}

void MssBlock::zero_output_layers() {
  proj.zero();
  fc2.zero();
}

void MssBlock::collect(const std::string& prefix, NamedParams& out) const {
  query.collect(prefix + ".query", out);
  reduce.collect(prefix + ".reduce", out);
  key1.collect(prefix + ".key1", out);
  value1.collect(prefix + ".value1", out);
  key2.collect(prefix + ".key2", out);
  value2.collect(prefix + ".value2", out);
  proj.collect(prefix + ".proj", out);
  ffn_norm.collect(prefix + ".ffn_norm", out);
  fc1.collect(prefix + ".fc1", out);
  fc2.collect(prefix + ".fc2", out);
}

Msst::Msst(const MsstConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  int in = cfg.in_channels;
  for (int i = 0; i < cfg.num_stages(); ++i) {
    const auto& s = cfg.stages[static_cast<std::size_t>(i)];
    Stage stage{PatchEmbed(in, s.channels, s.stride, rng), {}};
    for (int b = 0; b < s.blocks; ++b) stage.blocks.emplace_back(cfg.block_config(i), rng);
    stages.push_back(std::move(stage));
    in = s.channels;
  }
}

PyramidFeatures Msst::forward(const Var& x) const {
  const Tensor& v = x.value();
  require_map(v, "msst");
  if (v.channels() != cfg_.in_channels) {
    throw ShapeError("msst expects " + std::to_string(cfg_.in_channels) + " channels, got " +
                     std::to_string(v.channels()));
  }
  const int m = cfg_.min_input_size();
  if (v.height() % m != 0 || v.width() % m != 0) {
    const int ph = (v.height() + m - 1) / m * m, pw = (v.width() + m - 1) / m * m;
    throw ShapeError("msst: input " + std::to_string(v.height()) + "x" + std::to_string(v.width()) +
                     " must be a multiple of " + std::to_string(m) + " on each side; pad to " + std::to_string(ph) + "x" +
                     std::to_string(pw));
  }
  PyramidFeatures out;
  Var h = x;
  for (const Stage& s : stages) {
    h = s.embed(h);
    for (const MssBlock& b : s.blocks) h = b(h);
    out.maps.push_back(h);
  }
  return out;
}

NamedParams Msst::parameters() const {
  NamedParams out;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const std::string p = "msst.stage" + std::to_string(i);
    stages[i].embed.collect(p + ".embed", out);
    for (std::size_t b = 0; b < stages[i].blocks.size(); ++b) {
      stages[i].blocks[b].collect(p + ".block" + std::to_string(b), out);
    }
  }
  return out;
}

}  // namespace dmssn
