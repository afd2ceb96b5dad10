#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "chor/error.hpp"
#include "chor/gradient_check.hpp"
#include "chor/pose_ae.hpp"
#include "model_fixtures.hpp"

using namespace chor;
using data::Frame;

namespace {

const PoseAutoencoder& trained_ae() {
  static const PoseAutoencoder model = [] {
    Rng rng(11);
    PoseAutoencoder m(fixtures::tiny_ae_config(), rng);
    ae_train(m, fixtures::normalized_synth(200, 1), fixtures::tiny_ae_options());
    return m;
  }();
  return model;
}

double norm(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double max_frame_diff(std::span<const Frame> a, std::span<const Frame> b) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t i = 0; i < data::kFrameDim; ++i) worst = std::max(worst, std::abs(a[t].coords[i] - b[t].coords[i]));
  return worst;
}

}  // namespace

TEST(PoseAe, ArchitectureShapes) {
  Rng rng(1);
  PoseAutoencoder m(fixtures::tiny_ae_config(), rng);
  const auto& p = m.parameters();
  EXPECT_EQ(p[p.index_of("encoder.0.weight")].shape(), (Shape{159, 64}));
  EXPECT_EQ(p[p.index_of("encoder.latent.weight")].shape(), (Shape{64, 32}));
  EXPECT_EQ(p[p.index_of("decoder.output.weight")].shape(), (Shape{64, 159}));
  PoseAeConfig bad = fixtures::tiny_ae_config(159);
  EXPECT_THROW(PoseAutoencoder(bad, rng), InvalidArgument);
}

TEST(PoseAe, ZeroWeightsDecodeToOutputBias) {
  Rng rng(2);
  PoseAutoencoder m(fixtures::tiny_ae_config(), rng);
  for (auto& t : m.parameters().values()) std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
  auto& bias = m.parameters()[m.parameters().index_of("decoder.output.bias")];
  for (std::size_t i = 0; i < 159; ++i) bias.mutable_data()[i] = 0.01 * static_cast<double>(i);
  const Frame out = m.decode(std::vector<double>(32, 0.7));
  for (std::size_t i = 0; i < 159; ++i) EXPECT_EQ(out.coords[i], 0.01 * static_cast<double>(i));
}

TEST(PoseAe, EncodeDeterministicAndChecksDimensions) {
  const auto& m = trained_ae();
  const auto ds = fixtures::normalized_synth(3, 4);
  EXPECT_EQ(m.encode(ds.frames[0]), m.encode(ds.frames[0]));
  EXPECT_THROW(m.decode(std::vector<double>(31)), ShapeError);
}

TEST(PoseAe, GradientOfLeakyStackMatchesFiniteDifferences) {
  Rng rng(3);
  PoseAeConfig cfg;
  cfg.latent_dim = 3;
  cfg.hidden = 6;
  PoseAutoencoder m(cfg, rng);
  const auto ds = fixtures::normalized_synth(4, 5);
  const Tensor x(Shape{4, 159}, data::flatten(ds.frames));
  const auto report = gradient_check(
      [&](ad::Tape& tape, std::span<const ad::Var> vars) {
        BoundParams p(vars);
        auto in = tape.constant(x);
        return ad::mse(m.decode(p, m.encode(p, in)), in);
      },
      m.parameters().values(), 1e-5, 1e-4, m.parameters().names());
  for (const auto& b : report.blocks) EXPECT_TRUE(b.passed) << b.name << " " << b.max_relative_error;
}

TEST(PoseAe, TrainsBelowThresholdAndGeneralizes) {
  Rng rng(11);
  PoseAutoencoder m(fixtures::tiny_ae_config(), rng);
  const auto report = ae_train(m, fixtures::normalized_synth(200, 1), fixtures::tiny_ae_options());
  ASSERT_FALSE(report.aborted);
  ASSERT_EQ(report.epochs.size(), 51u);
  EXPECT_LT(report.final().train_loss, 1e-3);
  EXPECT_LT(report.final().test_loss, 10 * report.final().train_loss);
  EXPECT_LE(report.final().train_loss * 10, report.initial().train_loss);
  EXPECT_EQ(m.record.epoch, 50u);
}

TEST(PoseAe, ZeroLearningRateLeavesParameters) {
  Rng rng(12);
  PoseAutoencoder m(fixtures::tiny_ae_config(), rng);
  const ParameterSet before = m.parameters();
  auto opts = fixtures::tiny_ae_options(1);
  opts.learning_rate = 0.0;
  ae_train(m, fixtures::normalized_synth(60, 2), opts);
  EXPECT_TRUE(m.parameters() == before);
}

TEST(PoseAe, SeededRerunGivesIdenticalCurve) {
  auto run = [] {
    Rng rng(13);
    PoseAutoencoder m(fixtures::tiny_ae_config(), rng);
    return ae_train(m, fixtures::normalized_synth(80, 3), fixtures::tiny_ae_options(5)).train_curve();
  };
  EXPECT_EQ(run(), run());
}

TEST(PoseAe, OffsetAugmentedTrainingRuns) {
  Rng rng(14);
  PoseAutoencoder m(fixtures::tiny_ae_config(), rng);
  const auto report = ae_train(m, fixtures::normalized_synth(80, 3), fixtures::tiny_ae_options(3), true);
  EXPECT_FALSE(report.aborted);
  EXPECT_EQ(m.record.config["offset_augment"], true);
}

TEST(PoseAe, NonFiniteLossAbortsAndKeepsLastGoodParameters) {
  Rng rng(15);
  PoseAutoencoder m(fixtures::tiny_ae_config(), rng);
  auto ds = fixtures::normalized_synth(40, 4);
  auto opts = fixtures::tiny_ae_options(3);
  opts.learning_rate = 1e300;
  const auto report = ae_train(m, ds, opts);
  EXPECT_TRUE(report.aborted);
  EXPECT_FALSE(report.abort_reason.empty());
  for (const auto& t : m.parameters().values()) EXPECT_TRUE(t.all_finite());
}

TEST(PoseAe, TrajectoryDecodingShapes) {
  const auto& m = trained_ae();
  Rng rng(16);
  std::vector<double> z1(32), z2(32);
  for (double& v : z1) v = rng.normal(0, 0.3);
  for (double& v : z2) v = rng.normal(0, 0.3);

  const auto one = ae_decode_trajectory(m, {32, {z1}, 35.0}, Interpolation::kCatmullRom, 8);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], m.decode(z1));

  const auto same = ae_decode_trajectory(m, {32, {z1, z1}, 35.0}, Interpolation::kLinear, 5);
  ASSERT_EQ(same.size(), 6u);
  for (const auto& f : same) EXPECT_EQ(f, same[0]);

  const auto four = ae_decode_trajectory(m, {32, {z1, z2, z1, z2}, 35.0}, Interpolation::kCatmullRom, 7);
  EXPECT_EQ(four.size(), 22u);
  EXPECT_THROW(ae_decode_trajectory(m, {32, {}, 35.0}, Interpolation::kLinear, 4), InvalidArgument);
}

TEST(PoseAe, TrajectoryDecodingCommutesWithConcatenation) {
  const auto& m = trained_ae();
  Rng rng(17);
  std::vector<std::vector<double>> pts(5, std::vector<double>(32));
  for (auto& p : pts)
    for (double& v : p) v = rng.normal(0, 0.3);
  const auto whole = ae_decode_trajectory(m, {32, pts, 35.0}, Interpolation::kLinear, 4);
  const auto a = ae_decode_trajectory(m, {32, {pts[0], pts[1], pts[2]}, 35.0}, Interpolation::kLinear, 4);
  const auto b = ae_decode_trajectory(m, {32, {pts[2], pts[3], pts[4]}, 35.0}, Interpolation::kLinear, 4);
  std::vector<Frame> joined(a.begin(), a.end());
  joined.insert(joined.end(), b.begin() + 1, b.end());
  ASSERT_EQ(joined.size(), whole.size());
  EXPECT_LE(max_frame_diff(joined, whole), 1e-12);
}

TEST(PoseAe, MidpointReencodesNearSegment) {
  const auto& m = trained_ae();
  const auto ds = fixtures::normalized_synth(200, 1);
  const auto z1 = m.encode(ds.frames[10]);
  const auto z2 = m.encode(ds.frames[40]);
  const auto frames = ae_decode_trajectory(m, {32, {z1, z2}, 35.0}, Interpolation::kLinear, 2);
  const auto mid = m.encode(frames[1]);
  // Re-encoding error bound: the largest latent drift of encode(decode(z)) at the endpoints, plus slack.
  const double drift = std::max(norm(m.encode(m.decode(z1)), z1), norm(m.encode(m.decode(z2)), z2));
  const double bound = 3.0 * drift + 1e-3 * norm(z1, z2);
  for (std::size_t j = 0; j < 32; ++j) {
    EXPECT_GE(mid[j], std::min(z1[j], z2[j]) - bound);
    EXPECT_LE(mid[j], std::max(z1[j], z2[j]) + bound);
  }
}

TEST(PoseAe, LipschitzSanity) {
  const auto& m = trained_ae();
  Rng rng(18);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> z(32), dz(32);
    for (double& v : z) v = rng.normal();
    for (double& v : dz) v = rng.normal();
    const double n = norm(dz, std::vector<double>(32, 0.0));
    std::vector<double> z2(32);
    for (std::size_t j = 0; j < 32; ++j) z2[j] = z[j] + 1e-3 * dz[j] / n;
    const Frame a = m.decode(z), b = m.decode(z2);
    double change = 0.0;
    for (std::size_t i = 0; i < 159; ++i) change += (a.coords[i] - b.coords[i]) * (a.coords[i] - b.coords[i]);
    EXPECT_TRUE(std::isfinite(change));
    EXPECT_LT(std::sqrt(change), 1e3 * 1e-3);
  }
}

TEST(PoseAe, SinusoidZeroAmplitudeIsReconstruction) {
  const auto& m = trained_ae();
  const auto ds = fixtures::normalized_synth(30, 6);
  SinusoidOptions opts;
  opts.amplitude = 0.0;
  Rng rng(19);
  const auto out = ae_sinusoidal_variation(m, ds.frames, opts, rng);
  EXPECT_EQ(out.frames, ae_reconstruct(m, ds.frames));
}

TEST(PoseAe, SinusoidGeometry) {
  const auto& m = trained_ae();
  const auto ds = fixtures::normalized_synth(40, 7);
  SinusoidOptions opts;
  opts.amplitude = 0.2;
  opts.frequency = 1.75;  // 20-frame period at 35 fps
  opts.fps = 35.0;
  Rng rng(20);
  const auto out = ae_sinusoidal_variation(m, std::span(ds.frames).first(20), opts, rng);
  for (std::size_t j = 0; j < 32; ++j) {
    double mean = 0.0;
    for (std::size_t t = 0; t < 20; ++t) mean += out.latents[t][j] - out.base_latents[t][j];
    EXPECT_NEAR(mean / 20, 0.0, opts.amplitude / 10);
  }

  // Equal phases of pi/2: every perturbed axis peaks at t = 0.
  opts.axes = {0, 3, 5, 9, 30};
  opts.phases.assign(5, std::numbers::pi / 2);
  const auto peak = ae_sinusoidal_variation(m, std::span(ds.frames).first(1), opts, rng);
  EXPECT_NEAR(norm(peak.latents[0], peak.base_latents[0]), opts.amplitude * std::sqrt(5.0), 1e-9);
  EXPECT_EQ(peak.latents[0][1], peak.base_latents[0][1]);
}

TEST(PoseAe, ProjectConstantSequence) {
  const auto& m = trained_ae();
  const auto ds = fixtures::normalized_synth(1, 8);
  const std::vector<Frame> constant(6, ds.frames[0]);
  const auto traj = ae_project(m, constant);
  ASSERT_EQ(traj.points.size(), 6u);
  for (const auto& p : traj.points) EXPECT_EQ(p, traj.points[0]);
}

TEST(PoseAe, OrientationRemovedModelIgnoresRotation) {
  Rng rng(21);
  auto cfg = fixtures::tiny_ae_config(2);
  cfg.remove_orientation = true;
  PoseAutoencoder m(cfg, rng);
  const auto ds = fixtures::normalized_synth(60, 9);
  ae_train(m, ds, fixtures::tiny_ae_options(5));
  std::vector<Frame> turned;
  for (const auto& f : ds.frames) turned.push_back(data::rotate_frame(f, 1.234, 0.3, 0.6));
  const auto a = ae_project(m, ds.frames);
  const auto b = ae_project(m, turned);
  for (std::size_t t = 0; t < a.points.size(); ++t) EXPECT_LE(norm(a.points[t], b.points[t]), 1e-6);
}

TEST(PoseAe, OrientationRemovalSmoothsProjectedTrajectory) {
  // Same data and budget, d = 2; compare mean step length relative to the
  // trajectory's spread so the two latent scales are comparable.
  const auto ds = fixtures::normalized_synth(400, 10);
  auto smoothness = [&](bool remove) {
    Rng rng(22);
    auto cfg = fixtures::tiny_ae_config(2);
    cfg.remove_orientation = remove;
    PoseAutoencoder m(cfg, rng);
    auto opts = fixtures::tiny_ae_options(30);
    ae_train(m, ds, opts);
    const auto traj = ae_project(m, ds.frames);
    double step = 0.0, cx = 0.0, cy = 0.0, spread = 0.0;
    for (const auto& p : traj.points) {
      cx += p[0] / traj.points.size();
      cy += p[1] / traj.points.size();
    }
    for (std::size_t t = 0; t < traj.points.size(); ++t) {
      spread += (traj.points[t][0] - cx) * (traj.points[t][0] - cx) + (traj.points[t][1] - cy) * (traj.points[t][1] - cy);
      if (t) step += norm(traj.points[t], traj.points[t - 1]);
    }
    return (step / (traj.points.size() - 1)) / std::sqrt(spread / traj.points.size());
  };
  EXPECT_LT(smoothness(true), smoothness(false));
}
