#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "chor/data/augment.hpp"
#include "chor/error.hpp"
#include "chor/gradient_check.hpp"
#include "chor/seq_vae.hpp"
#include "model_fixtures.hpp"

using namespace chor;
using data::Frame;
using data::Sequence;

namespace {

struct Trained {
  data::MotionDataset data;
  SequenceVae model;
  TrainingReport report;
};

const Trained& trained() {
  static const Trained t = [] {
    auto ds = fixtures::normalized_synth(1000, 3);
    Rng rng(7);
    SequenceVae m(fixtures::tiny_vae_config(), rng);
    auto report = vae_train(m, ds, fixtures::tiny_vae_options());
    return Trained{std::move(ds), std::move(m), std::move(report)};
  }();
  return t;
}

Sequence slice(const data::MotionDataset& ds, std::size_t start, std::size_t len) {
  return {ds.frames.begin() + static_cast<std::ptrdiff_t>(start),
          ds.frames.begin() + static_cast<std::ptrdiff_t>(start + len)};
}

double in_range_fraction(const Sequence& seq) {
  std::size_t inside = 0, total = 0;
  for (const auto& f : seq)
    for (double c : f.coords) {
      inside += (c >= -0.5 && c <= 1.5);
      ++total;
    }
  return static_cast<double>(inside) / static_cast<double>(total);
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double trajectory_distance(const data::LatentTrajectory& a, const data::LatentTrajectory& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.points.size(); ++i) s += distance(a.points[i], b.points[i]);
  return s / static_cast<double>(a.points.size());
}

}  // namespace

TEST(SeqVaeKl, ClosedFormExamples) {
  const std::vector<double> zero(256, 0.0), one(256, 1.0);
  EXPECT_EQ(gaussian_kl(zero, zero), 0.0);
  EXPECT_DOUBLE_EQ(gaussian_kl(one, zero), 128.0);
  const std::vector<double> m{0.3, -1.2}, lv{0.5, -2.0};
  double expect = 0.0;
  for (std::size_t i = 0; i < 2; ++i) expect += 0.5 * (m[i] * m[i] + std::exp(lv[i]) - 1.0 - lv[i]);
  EXPECT_DOUBLE_EQ(gaussian_kl(m, lv), expect);
  EXPECT_GT(gaussian_kl(m, lv), 0.0);
}

TEST(SeqVaeLoss, ZeroKlWeightIsScaledMse) {
  auto cfg = fixtures::tiny_vae_config();
  cfg.kl_weight = 0.0;
  Rng rng(1);
  SequenceVae m(cfg, rng);
  const auto ds = fixtures::normalized_synth(40, 1);
  const std::vector<Sequence> batch{slice(ds, 0, 16), slice(ds, 20, 16)};
  Rng noise(5);
  const auto loss = vae_loss(m, batch, &noise);
  EXPECT_EQ(loss.total, cfg.mse_scale * loss.mse);
  EXPECT_GE(loss.kl, 0.0);
}

TEST(SeqVaeLoss, KlTermNeverNegative) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    Rng rng(seed);
    SequenceVae m(fixtures::tiny_vae_config(), rng);
    const auto ds = fixtures::normalized_synth(40, seed);
    const std::vector<Sequence> batch{slice(ds, 0, 16), slice(ds, 10, 16), slice(ds, 24, 16)};
    EXPECT_GE(vae_loss(m, batch).kl, 0.0);
  }
}

TEST(SeqVae, ShapesAndDeterminism) {
  Rng rng(2);
  SequenceVae m(fixtures::tiny_vae_config(), rng);
  const auto ds = fixtures::normalized_synth(20, 2);
  const auto seq = slice(ds, 0, 16);
  const auto q1 = m.encode(seq), q2 = m.encode(seq);
  EXPECT_EQ(q1.mean.size(), 8u);
  EXPECT_EQ(q1.logvar.size(), 8u);
  EXPECT_EQ(q1.mean, q2.mean);
  EXPECT_EQ(q1.logvar, q2.logvar);
  const auto out = m.decode(q1.mean);
  EXPECT_EQ(out.size(), 16u);
  EXPECT_EQ(out, m.decode(q1.mean));
  const Sequence zeros(16, Frame{});
  for (double v : m.encode(zeros).logvar) EXPECT_TRUE(std::isfinite(v));
}

TEST(SeqVae, WrongLengthsRejected) {
  Rng rng(3);
  SequenceVae m(fixtures::tiny_vae_config(), rng);
  const auto ds = fixtures::normalized_synth(20, 2);
  EXPECT_THROW(m.encode(slice(ds, 0, 15)), ShapeError);
  EXPECT_THROW(m.decode(std::vector<double>(7, 0.0)), ShapeError);
}

TEST(SeqVae, BatchDecodeMatchesSingleDecode) {
  Rng rng(4);
  SequenceVae m(fixtures::tiny_vae_config(), rng);
  std::vector<double> block(3 * 8);
  Rng g(1);
  for (double& v : block) v = g.normal();
  const auto batch = m.decode_batch(block);
  ASSERT_EQ(batch.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_EQ(batch[i], m.decode(std::span<const double>(block).subspan(i * 8, 8)));
}

TEST(SeqVae, LossGradientCheck) {
  SeqVaeConfig cfg;
  cfg.seq_len = 3;
  cfg.encoder_layers = {4};
  cfg.decoder_layers = {4};
  cfg.dense_dim = 4;
  cfg.latent_dim = 2;
  cfg.mse_scale = 1.0;
  cfg.kl_weight = 0.5;
  Rng rng(5);
  SequenceVae m(cfg, rng);
  const auto ds = fixtures::normalized_synth(10, 5);
  std::vector<Tensor> steps;
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<double> rows(ds.frames[s].coords.begin(), ds.frames[s].coords.end());
    rows.insert(rows.end(), ds.frames[s + 5].coords.begin(), ds.frames[s + 5].coords.end());
    steps.emplace_back(Shape{2, 159}, rows);
  }
  const Tensor eps(Shape{2, 2}, {0.3, -1.1, 0.7, 0.2});
  const auto report = gradient_check(
      [&](ad::Tape& tape, std::span<const ad::Var> vars) {
        BoundParams p(vars);
        std::vector<ad::Var> in;
        for (const auto& s : steps) in.push_back(tape.constant(s));
        const ad::Var noise = tape.constant(eps);
        return vae_loss(m, p, in, &noise).total;
      },
      m.parameters().values(), 1e-5, 1e-4, m.parameters().names());
  for (const auto& b : report.blocks) EXPECT_TRUE(b.passed) << b.name << " " << b.max_relative_error;
}

TEST(SeqVae, ReparameterizationMoments) {
  const LatentGaussian q{{0.5, -2.0, 3.0}, {0.0, std::log(4.0), std::log(0.25)}};
  Rng rng(6);
  const std::size_t n = 100000;
  std::vector<double> sum(3, 0.0), sq(3, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = reparameterize(q, rng);
    for (std::size_t d = 0; d < 3; ++d) {
      sum[d] += z[d];
      sq[d] += z[d] * z[d];
    }
  }
  for (std::size_t d = 0; d < 3; ++d) {
    const double mean = sum[d] / n, var = sq[d] / n - mean * mean;
    EXPECT_NEAR(mean, q.mean[d], 0.02 * std::abs(q.mean[d])) << d;
    EXPECT_NEAR(var, std::exp(q.logvar[d]), 0.02 * std::exp(q.logvar[d])) << d;
  }
}

TEST(SeqVaeTrain, ReducesReconstructionErrorFivefold) {
  const auto& report = trained().report;
  ASSERT_FALSE(report.aborted);
  ASSERT_EQ(report.epochs.size(), 101u);
  EXPECT_LE(report.final().terms.at("train_mse") * 5.0, report.initial().terms.at("train_mse"));
  EXPECT_GT(report.final().terms.at("train_kl"), 0.0);
}

TEST(SeqVaeTrain, SeededRerunGivesIdenticalCurves) {
  auto run = [] {
    Rng rng(8);
    SequenceVae m(fixtures::tiny_vae_config(), rng);
    return vae_train(m, fixtures::normalized_synth(200, 3), fixtures::tiny_vae_options(2)).train_curve();
  };
  EXPECT_EQ(run(), run());
}

TEST(SeqVaeTrain, NonFiniteLossAborts) {
  Rng rng(9);
  SequenceVae m(fixtures::tiny_vae_config(), rng);
  auto opts = fixtures::tiny_vae_options(3);
  opts.learning_rate = 1e300;
  const auto report = vae_train(m, fixtures::normalized_synth(200, 3), opts);
  EXPECT_TRUE(report.aborted);
  for (const auto& t : m.parameters().values()) EXPECT_TRUE(t.all_finite());
}

TEST(SeqVaeTrain, DeterministicZeroKlTrainingIgnoresVarianceHead) {
  // With z = mean and no KL pressure the variance head is disconnected, so the
  // model trains exactly as a deterministic sequence autoencoder.
  auto cfg = fixtures::tiny_vae_config();
  cfg.kl_weight = 0.0;
  auto opts = fixtures::tiny_vae_options(3);
  opts.deterministic_latent = true;
  auto run = [&](bool perturb_logvar) {
    Rng rng(10);
    SequenceVae m(cfg, rng);
    if (perturb_logvar) {
      for (std::size_t i = 0; i < m.parameters().size(); ++i)
        if (m.parameters().name(i).starts_with("encoder.logvar"))
          for (double& v : m.parameters()[i].mutable_data()) v = -5.0;
    }
    const ParameterSet before = m.parameters();
    auto report = vae_train(m, fixtures::normalized_synth(200, 4), opts);
    for (std::size_t i = 0; i < m.parameters().size(); ++i)
      if (m.parameters().name(i).starts_with("encoder.logvar")) EXPECT_EQ(m.parameters()[i], before[i]);
    std::vector<double> mse;
    for (const auto& e : report.epochs) {
      EXPECT_EQ(e.train_loss, cfg.mse_scale * e.terms.at("train_mse"));
      mse.push_back(e.terms.at("train_mse"));
    }
    return mse;
  };
  const auto a = run(false), b = run(true);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(SeqVaeTrained, ReconstructsAndSeparatesSequences) {
  const auto& t = trained();
  const auto a = slice(t.data, 0, 16), b = slice(t.data, 160, 16);
  const auto qa = t.model.encode(a), qb = t.model.encode(b);
  EXPECT_GT(distance(qa.mean, qb.mean), 0.0);
  const auto recon = vae_reconstruct(t.model, a);
  double mse = 0.0;
  for (std::size_t f = 0; f < 16; ++f)
    for (std::size_t i = 0; i < 159; ++i) mse += std::pow(recon[f].coords[i] - a[f].coords[i], 2);
  mse /= 16.0 * 159.0;
  EXPECT_LT(mse, t.report.initial().terms.at("train_mse") / 5.0);
}

TEST(SeqVaeTrained, RotatedCopyReconstructsComparably) {
  const auto& t = trained();
  const auto seq = slice(t.data, 900, 16);
  const auto rotated = data::rotate_sequence(seq, 1.0);
  auto err = [&](const Sequence& s) {
    const auto r = vae_reconstruct(t.model, s);
    double e = 0.0;
    for (std::size_t f = 0; f < s.size(); ++f)
      for (std::size_t i = 0; i < 159; ++i) e += std::pow(r[f].coords[i] - s[f].coords[i], 2);
    return e;
  };
  const double e0 = err(seq), e1 = err(rotated);
  EXPECT_LT(std::abs(e0 - e1) / std::max(e0, e1), 0.5) << e0 << " vs " << e1;
}

TEST(SeqVaeSample, RadiusZeroAndSeeds) {
  const auto& m = trained().model;
  Rng a(1), b(2);
  EXPECT_EQ(vae_sample_unconditional(m, a, 0.0), m.decode(std::vector<double>(8, 0.0)));
  EXPECT_EQ(vae_sample_unconditional(m, b, 0.0), m.decode(std::vector<double>(8, 0.0)));
  Rng c(3), d(4);
  const auto x = vae_sample_unconditional(m, c), y = vae_sample_unconditional(m, d);
  EXPECT_GT(sequence_deviation(x, y), 0.0);
}

TEST(SeqVaeSample, TrainedSamplesStayNearUnitCube) {
  const auto& m = trained().model;
  Rng rng(11);
  for (int i = 0; i < 10; ++i) {
    const auto s = vae_sample_unconditional(m, rng);
    ASSERT_EQ(s.size(), 16u);
    EXPECT_GE(in_range_fraction(s), 0.99) << i;
  }
}

TEST(SeqVaeVary, ZeroScaleReturnsReconstruction) {
  const auto& t = trained();
  VariationRequest req{slice(t.data, 100, 16), 0.0, 4, 12};
  const auto out = vae_vary(t.model, req);
  ASSERT_EQ(out.size(), 4u);
  const auto recon = vae_reconstruct(t.model, req.base);
  for (const auto& s : out) EXPECT_EQ(s, recon);
}

TEST(SeqVaeVary, FixedSeedReproducible) {
  const auto& t = trained();
  VariationRequest req{slice(t.data, 100, 16), 1.0, 3, 13};
  EXPECT_EQ(vae_vary(t.model, req), vae_vary(t.model, req));
  auto other = req;
  other.seed = 14;
  EXPECT_NE(vae_vary(t.model, req), vae_vary(t.model, other));
}

TEST(SeqVaeVary, DeviationNondecreasingInScale) {
  const auto& t = trained();
  const auto base = slice(t.data, 300, 16);
  const auto recon = vae_reconstruct(t.model, base);
  double previous = 0.0;
  for (double k : {0.5, 1.0, 2.0, 4.0}) {
    const auto out = vae_vary(t.model, VariationRequest{base, k, 20, 15});
    double mean = 0.0;
    for (const auto& s : out) mean += sequence_deviation(s, recon);
    mean /= 20.0;
    EXPECT_GE(mean, previous) << "k = " << k;
    previous = mean;
  }
}

TEST(SeqVaeProject, TrajectoriesInPoseSpace) {
  const auto& t = trained();
  Rng rng(16);
  PoseAutoencoder pose(fixtures::tiny_ae_config(2), rng);
  ae_train(pose, t.data, fixtures::tiny_ae_options(5));
  const auto base = slice(t.data, 500, 16);
  const auto recon = vae_reconstruct(t.model, base);
  const auto k0 = vae_vary(t.model, VariationRequest{base, 0.0, 1, 17});
  const auto tr = vae_project_to_pose_space(t.model, pose, recon);
  EXPECT_EQ(tr.points.size(), 16u);
  EXPECT_EQ(tr.latent_dim, 2u);
  EXPECT_EQ(tr.points, vae_project_to_pose_space(t.model, pose, k0[0]).points);
  auto mean_distance = [&](double k) {
    const auto out = vae_vary(t.model, VariationRequest{base, k, 20, 18});
    double d = 0.0;
    for (const auto& s : out) d += trajectory_distance(tr, vae_project_to_pose_space(t.model, pose, s));
    return d / 20.0;
  };
  const double small = mean_distance(0.5), large = mean_distance(4.0);
  EXPECT_GT(small, 0.0);
  EXPECT_LT(small, large);
  EXPECT_THROW(vae_project_to_pose_space(t.model, pose, slice(t.data, 0, 10)), ShapeError);
}
