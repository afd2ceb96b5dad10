#include <benchmark/benchmark.h>

#include "chor/adam.hpp"
#include "chor/autodiff.hpp"
#include "chor/data/normalize.hpp"
#include "chor/data/synth.hpp"
#include "chor/mdn.hpp"
#include "chor/params.hpp"
#include "chor/pose_ae.hpp"

using namespace chor;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(shape);
  for (double& v : t.mutable_data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = random_tensor({n, n}, rng), b = random_tensor({n, n}, rng);
  for (auto _ : state) {
    ad::Tape tape;
    benchmark::DoNotOptimize(ad::matmul(tape.constant(a), tape.constant(b)).value());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(256);

void BM_LstmStep(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  ParameterSet params;
  const auto cell = layers::add_lstm(params, "lstm", 159, hidden, rng);
  const Tensor x = random_tensor({32, 159}, rng);
  for (auto _ : state) {
    ad::Tape tape;
    BoundParams p(tape, params, true);
    auto s = layers::lstm_step(p, cell, tape.constant(x), layers::lstm_zero_state(tape, 32, hidden));
    tape.backward(ad::sum(ad::square(s.h)));
    benchmark::DoNotOptimize(tape.size());
  }
}
BENCHMARK(BM_LstmStep)->Arg(64)->Arg(256);

void BM_MdnNll(benchmark::State& state) {
  const std::size_t m = 20, c = 159;
  Rng rng(3);
  const Tensor raw = random_tensor({32, mdn::raw_size(m, c)}, rng), targets = random_tensor({32, c}, rng);
  for (auto _ : state) {
    ad::Tape tape;
    auto loss = mdn::nll(tape.leaf(raw), tape.constant(targets), m, c);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.value());
  }
}
BENCHMARK(BM_MdnNll);

void BM_PoseAeTrainStep(benchmark::State& state) {
  Rng rng(4);
  data::SynthConfig synth;
  synth.frames = 64;
  const auto ds = data::center_and_scale(data::synth_generate(synth, rng));
  const Tensor batch(Shape{64, data::kFrameDim}, data::flatten(ds.frames));
  PoseAeConfig cfg;
  cfg.latent_dim = 32;
  PoseAutoencoder model(cfg, rng);
  Adam adam;
  for (auto _ : state) {
    ad::Tape tape;
    BoundParams p(tape, model.parameters(), true);
    auto in = tape.constant(batch);
    auto loss = ad::mse(model.decode(p, model.encode(p, in)), in);
    tape.backward(loss);
    const auto grads = collect_grads(tape, p);
    adam.step(model.parameters().values(), grads);
  }
}
BENCHMARK(BM_PoseAeTrainStep);

}  // namespace

BENCHMARK_MAIN();
