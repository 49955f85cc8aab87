#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "dmssn/autoencoders.hpp"
#include "dmssn/training.hpp"
#include "test_support.hpp"

using namespace dmssn;
using testing::Rng;

namespace {

ChannelSchedule random_schedule(Rng& rng) {
  std::uniform_int_distribution<int> d(1, 4);
  ChannelSchedule s;
  s.c_prime = d(rng);
  s.c2 = s.c_prime + d(rng);
  s.c1 = s.c2 + d(rng);
  s.c = s.c1 + d(rng);
  return s;
}

void set(Var v, std::vector<double> values) { v.mutable_value() = Tensor(v.shape(), std::move(values)); }

void check_map(const Var& v, int h, int w, int c) {
  REQUIRE(v.value().rank() == 3);
  CHECK(v.value().height() == h);
  CHECK(v.value().width() == w);
  CHECK(v.value().channels() == c);
}

Tensor permute_pixels(const Tensor& x, const std::vector<int>& perm) {
  Tensor y = x;
  const int c = x.channels();
  for (std::size_t p = 0; p < perm.size(); ++p)
    for (int k = 0; k < c; ++k) y[p * c + k] = x[static_cast<std::size_t>(perm[p]) * c + k];
  return y;
}

}  // namespace

TEST_CASE("schedule validation") {
  CHECK_NOTHROW(ChannelSchedule{}.validate());
  CHECK_THROWS_AS((ChannelSchedule{8, 6, 6, 2}.validate()), ConfigError);
  CHECK_THROWS_AS((ChannelSchedule{8, 6, 4, 0}.validate()), ConfigError);
  CHECK_THROWS_AS(TeacherAutoencoder(ChannelSchedule{4, 5, 3, 2}, 0), ConfigError);
  CHECK_THROWS_AS(StudentAutoencoder(ChannelSchedule{4, 3, 3, 2}, 0), ConfigError);
}

TEST_CASE("encoding block: hand-set 2x2x4 example") {
  Rng rng(0);
  EncodingBlock blk(4, 2, rng);
  set(blk.spectral.weight, {1, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, -1});
  set(blk.spectral.bias, {0, 0, 0, 0});
  set(blk.spatial.kernel, {0, 0, 0, 0, 1, 0.5, 0, 0, 0});
  set(blk.spatial.bias, {0});
  set(blk.fuse.weight, {1, 1, 1, 1, 0, 0, 0, 0, /**/ 0, 0, 0, 0, 1, 0, 0, -1});
  set(blk.fuse.bias, {0.5, -1});
  Tensor x({2, 2, 4}, std::vector<double>{1, 2, 3, 4, 0, 1, 0, 1, 2, 0, 1, 0, -1, 1, 2, -2});
  Tensor y = blk(constant(x)).value();
  const std::vector<double> expected = {1.5, -4.5, 1.5, -2, 2.5, 1.5, 3.5, 0};
  for (std::size_t i = 0; i < 8; ++i) CHECK(y[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("encoding block preserves spatial size; spectral branch keeps constants constant") {
  Rng rng(1);
  EncodingBlock blk(5, 3, rng);
  for (auto [h, w] : {std::pair{1, 1}, std::pair{3, 7}, std::pair{8, 2}}) {
    check_map(blk(constant(testing::random_tensor({h, w, 5}, rng))), h, w, 3);
  }
  Tensor c({4, 4, 5});
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.1 * static_cast<double>(i % 5);
  Tensor f = blk.spectral_features(constant(c)).value();
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int k = 0; k < 5; ++k) CHECK(f.at(y, x, k) == f.at(0, 0, k));
}

TEST_CASE("activation bundle shapes hold for random schedules") {
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    ChannelSchedule s = random_schedule(rng);
    const int h = 1 + static_cast<int>(rng() % 6), w = 1 + static_cast<int>(rng() % 6);
    Var g = constant(testing::random_tensor({h, w, s.c}, rng));
    TeacherActivations ta = TeacherAutoencoder(s, rng()).forward(g);
    check_map(ta.e1, h, w, s.c1);
    check_map(ta.e2, h, w, s.c2);
    check_map(ta.e, h, w, s.c_prime);
    check_map(ta.d2, h, w, s.c2);
    check_map(ta.d1, h, w, s.c1);
    check_map(ta.d, h, w, s.c);
    StudentActivations sa = StudentAutoencoder(s, rng()).forward(g);
    check_map(sa.e1, h, w, s.c2);
    check_map(sa.e, h, w, s.c_prime);
    check_map(sa.d1, h, w, s.c2);
    check_map(sa.d, h, w, s.c);
    // the first distillation pair is dimension-compatible
    CHECK(sa.e1.shape() == ta.e2.shape());
  }
}

TEST_CASE("zero input with zero biases gives zero activations") {
  TeacherAutoencoder t(ChannelSchedule{}, 3);
  TeacherActivations a = t.forward(constant(Tensor::map(4, 4, 32)));
  for (const Var* v : {&a.e1, &a.e2, &a.e, &a.d2, &a.d1, &a.d}) CHECK(v->value().max_abs() == 0.0);
}

TEST_CASE("wrong band count is a shape error") {
  ChannelSchedule s;
  CHECK_THROWS_AS(TeacherAutoencoder(s, 0).forward(constant(Tensor::map(2, 2, 31))), ShapeError);
  CHECK_THROWS_AS(StudentAutoencoder(s, 0).forward(constant(Tensor::map(2, 2, 31))), ShapeError);
}

TEST_CASE("student: hand-computed 1x1 example") {
  StudentAutoencoder st(ChannelSchedule{4, 3, 2, 1}, 0);
  set(st.enc1.weight, {1, 0, 0, 0, 0, 1, 0, 0});
  set(st.enc2.weight, {1, 1});
  set(st.dec1.weight, {1, -1});
  set(st.dec2.weight, {1, 0, 0, 1, 1, 1, 0, 0});
  StudentActivations a = st.forward(constant(Tensor({1, 1, 4}, std::vector<double>{1, 2, 3, 4})));
  CHECK(a.e1.value()[0] == 1.0);
  CHECK(a.e1.value()[1] == 2.0);
  CHECK(a.e.value()[0] == doctest::Approx(2.7958444821721846).epsilon(1e-12));
  CHECK(a.d1.value()[1] == doctest::Approx(-2.7958444821721846).epsilon(1e-12));
  const std::vector<double> d = {2.7886082351523305, -0.007236247019854178, 2.7813719881324763, 0.0};
  for (std::size_t i = 0; i < 4; ++i) CHECK(a.d.value()[i] == doctest::Approx(d[i]).epsilon(1e-12));
  CHECK(st.encode(constant(Tensor({1, 1, 4}, std::vector<double>{1, 2, 3, 4}))).value()[0] ==
        a.e.value()[0]);
}

TEST_CASE("student is per-pixel: constant in, constant out; pixel permutations commute") {
  Rng rng(4);
  ChannelSchedule s{6, 5, 4, 2};
  StudentAutoencoder st(s, 7);
  Tensor c = Tensor::map(3, 3, 6);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.3 * static_cast<double>(i % 6) - 0.4;
  StudentActivations a = st.forward(constant(c));
  for (const Var* v : {&a.e1, &a.e, &a.d1, &a.d}) {
    const Tensor& t = v->value();
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x)
        for (int k = 0; k < t.channels(); ++k) CHECK(t.at(y, x, k) == t.at(0, 0, k));
  }
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = testing::random_tensor({4, 5, 6}, rng);
    std::vector<int> perm(20);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    StudentActivations p = st.forward(constant(permute_pixels(x, perm)));
    StudentActivations q = st.forward(constant(x));
    CHECK(testing::max_abs_diff(p.e1.value(), permute_pixels(q.e1.value(), perm)) < 1e-14);
    CHECK(testing::max_abs_diff(p.e.value(), permute_pixels(q.e.value(), perm)) < 1e-14);
    CHECK(testing::max_abs_diff(p.d1.value(), permute_pixels(q.d1.value(), perm)) < 1e-14);
    CHECK(testing::max_abs_diff(p.d.value(), permute_pixels(q.d.value(), perm)) < 1e-14);
  }
}

TEST_CASE("teacher has more parameters than the student whenever C1 > C2") {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    ChannelSchedule s = random_schedule(rng);
    CHECK(parameter_count(TeacherAutoencoder(s, 0).parameters()) > parameter_count(StudentAutoencoder(s, 0).parameters()));
  }
}

TEST_CASE("parameter names are unique and stable") {
  NamedParams p = TeacherAutoencoder(ChannelSchedule{}, 0).parameters();
  std::set<std::string> names;
  for (auto& [n, v] : p) names.insert(n);
  CHECK(names.size() == p.size());
  CHECK(names.count("teacher.encoder.0.block.spectral.weight") == 1);
  CHECK(names.count("teacher.decoder.2.refine.bias") == 1);
  NamedParams s = StudentAutoencoder(ChannelSchedule{}, 0).parameters();
  CHECK(s.size() == 8);
  CHECK(s[0].first == "student.enc1.weight");
}

TEST_CASE("autoencoder gradients agree with central differences") {
  Rng rng(6);
  ChannelSchedule s{5, 4, 3, 2};
  TeacherAutoencoder t(s, 1);
  StudentAutoencoder st(s, 2);
  const Tensor g = testing::random_tensor({3, 3, 5}, rng);
  const Tensor target = testing::random_tensor({3, 3, 5}, rng, 0.0, 1.0);
  auto rt = testing::check_gradients(t.parameters(), [&] { return hs_loss(t.forward(constant(g)).d, constant(target)); }, rng);
  INFO(rt.worst);
  CHECK(rt.max_rel_error < 1e-4);
  auto rs = testing::check_gradients(st.parameters(), [&] { return hs_loss(st.forward(constant(g)).d, constant(target)); }, rng);
  INFO(rs.worst);
  CHECK(rs.max_rel_error < 1e-4);
}

TEST_CASE("teacher reconstructs a rank-deficient cube after pre-training") {
  // 8 bands whose spectra live in a 4-dimensional subspace.
  Rng rng(7);
  std::vector<std::vector<double>> basis(4, std::vector<double>(8));
  for (auto& b : basis)
    for (double& v : b) v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  std::vector<Sample> data;
  for (int scene = 0; scene < 4; ++scene) {
    HyperCube cube(16, 16, 8);
    std::uniform_real_distribution<double> phase(0.0, 6.28);
    const double p[4] = {phase(rng), phase(rng), phase(rng), phase(rng)};
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        double a[4];
        for (int j = 0; j < 4; ++j) a[j] = 0.5 + 0.5 * std::sin(p[j] + 0.3 * (j + 1) * x + 0.2 * (4 - j) * y);
        for (int b = 0; b < 8; ++b) {
          double v = 0;
          for (int j = 0; j < 4; ++j) v += a[j] * basis[j][b];
          cube.at(y, x, b) = static_cast<float>(v / 4);
        }
      }
    Sample s;
    s.id = "scene" + std::to_string(scene);
    s.raw = cube;
    s.homogenized = cube;
    s.mask = SaliencyMask(16, 16);
    data.push_back(s);
  }
  TrainConfig cfg = TrainConfig::desk_teacher();
  cfg.model.schedule = {8, 6, 5, 4};
  cfg.learning_rate = 0.01;
  cfg.batch_size = 1;
  cfg.epochs = 1500;
  cfg.augment_probability = 0.0;
  cfg.weight_decay = 0.0;
  Checkpoint ckpt = pretrain_teacher(data, cfg);
  TeacherAutoencoder t = load_teacher(ckpt);
  double mse = 0;
  for (const Sample& s : data) {
    Tensor d = t.forward(constant(to_tensor(s.homogenized))).d.value();
    Tensor i = to_tensor(s.raw);
    for (std::size_t k = 0; k < d.size(); ++k) mse += (d[k] - i[k]) * (d[k] - i[k]) / (d.size() * data.size());
  }
  MESSAGE("rank-deficient reconstruction MSE = " << mse);
  CHECK(mse < 1e-3);
}
