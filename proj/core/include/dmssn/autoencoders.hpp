#pragma once

#include <cstdint>

#include "dmssn/nn.hpp"

namespace dmssn {

/// Channel widths of the autoencoders: C > C1 > C2 > C'.
struct ChannelSchedule {
  int c = 32;
  int c1 = 24;
  int c2 = 16;
  int c_prime = 8;

  void validate() const;
  bool operator==(const ChannelSchedule&) const = default;
};

/// Dual-branch block: a per-pixel spectral transform and a channel-shared
/// 3x3 spatial transform, concatenated and projected to `out` channels.
struct EncodingBlock {
  nn::Linear spectral;
  nn::SharedSpatialConv spatial;
  nn::Linear fuse;

  EncodingBlock() = default;
  EncodingBlock(int in, int out, nn::Rng& rng);

  Var spectral_features(const Var& x) const { return spectral(x); }
  Var spatial_features(const Var& x) const { return spatial(x); }
  Var operator()(const Var& x) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct TeacherActivations {
  Var e1;  // C1
  Var e2;  // C2
  Var e;   // C'
  Var d2;  // C2
  Var d1;  // C1
  Var d;   // C
};

struct StudentActivations {
  Var e1;  // C2
  Var e;   // C'
  Var d1;  // C2
  Var d;   // C
};

class TeacherAutoencoder {
 public:
  TeacherAutoencoder(const ChannelSchedule& schedule, std::uint64_t seed);

  TeacherActivations forward(const Var& g) const;
  const ChannelSchedule& schedule() const { return schedule_; }
  NamedParams parameters() const;

 private:
  struct Stage {
    EncodingBlock block;
    nn::Linear refine;  // residual: y + refine(gelu(y))
  };
  ChannelSchedule schedule_;
  std::vector<Stage> encoder_;
  std::vector<Stage> decoder_;
};

class StudentAutoencoder {
 public:
  StudentAutoencoder(const ChannelSchedule& schedule, std::uint64_t seed);

  StudentActivations forward(const Var& g) const;
  /// Encoder half only: returns E.
  Var encode(const Var& g) const;
  const ChannelSchedule& schedule() const { return schedule_; }
  NamedParams parameters() const;

  nn::Linear enc1, enc2, dec1, dec2;

 private:
  ChannelSchedule schedule_;
};

}  // namespace dmssn
