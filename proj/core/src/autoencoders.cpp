#include "dmssn/autoencoders.hpp"

#include <string>

#include "dmssn/error.hpp"

namespace dmssn {

void ChannelSchedule::validate() const {
  if (c_prime < 1 || !(c_prime < c2 && c2 < c1 && c1 < c)) {
    throw ConfigError("channel schedule must satisfy 1 <= C' < C2 < C1 < C, got C=" + std::to_string(c) +
                      " C1=" + std::to_string(c1) + " C2=" + std::to_string(c2) + " C'=" + std::to_string(c_prime));
  }
}

EncodingBlock::EncodingBlock(int in, int out, nn::Rng& rng)
    : spectral(in, in, rng), spatial(3, rng), fuse(2 * in, out, rng) {}

Var EncodingBlock::operator()(const Var& x) const {
  return fuse(ops::concat_channels(spectral_features(x), spatial_features(x)));
}

void EncodingBlock::collect(const std::string& prefix, NamedParams& out) const {
  spectral.collect(prefix + ".spectral", out);
  spatial.collect(prefix + ".spatial", out);
  fuse.collect(prefix + ".fuse", out);
}

TeacherAutoencoder::TeacherAutoencoder(const ChannelSchedule& schedule, std::uint64_t seed) : schedule_(schedule) {
  schedule_.validate();
  nn::Rng rng(seed);
  const int widths[] = {schedule.c, schedule.c1, schedule.c2, schedule.c_prime};
  for (int i = 0; i < 3; ++i) {
    encoder_.push_back({EncodingBlock(widths[i], widths[i + 1], rng), nn::Linear(widths[i + 1], widths[i + 1], rng)});
  }
  for (int i = 3; i > 0; --i) {
    decoder_.push_back({EncodingBlock(widths[i], widths[i - 1], rng), nn::Linear(widths[i - 1], widths[i - 1], rng)});
  }
}

TeacherActivations TeacherAutoencoder::forward(const Var& g) const {
  require_map(g.value(), "teacher input");
  if (g.value().channels() != schedule_.c) {
    throw ShapeError("teacher expects " + std::to_string(schedule_.c) + " bands, got " +
                     std::to_string(g.value().channels()));
  }
  // Each stage: the block changes the width, then a residual pointwise MLP
  // refines it. The skip path keeps the deep stack easy to optimize.
  auto stage = [](const Stage& s, const Var& x) {
    const Var y = s.block(x);
    return ops::add(y, s.refine(ops::gelu(y)));
  };
  Var taps[6];
  Var x = g;
  for (int i = 0; i < 3; ++i) x = taps[i] = stage(encoder_[static_cast<std::size_t>(i)], x);
  for (int i = 0; i < 3; ++i) x = taps[3 + i] = stage(decoder_[static_cast<std::size_t>(i)], x);
  return {taps[0], taps[1], taps[2], taps[3], taps[4], taps[5]};
}

NamedParams TeacherAutoencoder::parameters() const {
  NamedParams out;
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    const std::string p = "teacher.encoder." + std::to_string(i);
    encoder_[i].block.collect(p + ".block", out);
    encoder_[i].refine.collect(p + ".refine", out);
  }
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const std::string p = "teacher.decoder." + std::to_string(i);
    decoder_[i].block.collect(p + ".block", out);
    decoder_[i].refine.collect(p + ".refine", out);
  }
  return out;
}

StudentAutoencoder::StudentAutoencoder(const ChannelSchedule& schedule, std::uint64_t seed) : schedule_(schedule) {
  schedule_.validate();
  nn::Rng rng(seed);
  enc1 = nn::Linear(schedule.c, schedule.c2, rng);
  enc2 = nn::Linear(schedule.c2, schedule.c_prime, rng);
  dec1 = nn::Linear(schedule.c_prime, schedule.c2, rng);
  dec2 = nn::Linear(schedule.c2, schedule.c, rng);
}

StudentActivations StudentAutoencoder::forward(const Var& g) const {
  require_map(g.value(), "student input");
  if (g.value().channels() != schedule_.c) {
    throw ShapeError("student expects " + std::to_string(schedule_.c) + " bands, got " +
                     std::to_string(g.value().channels()));
  }
  StudentActivations a;
  a.e1 = enc1(g);
  a.e = enc2(ops::gelu(a.e1));
  a.d1 = dec1(a.e);
  a.d = dec2(ops::gelu(a.d1));
  return a;
}

Var StudentAutoencoder::encode(const Var& g) const { return enc2(ops::gelu(enc1(g))); }

NamedParams StudentAutoencoder::parameters() const {
  NamedParams out;
  enc1.collect("student.enc1", out);
  enc2.collect("student.enc2", out);
  dec1.collect("student.dec1", out);
  dec2.collect("student.dec2", out);
  return out;
}

}  // namespace dmssn
