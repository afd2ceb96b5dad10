#pragma once

#include "chor/data/normalize.hpp"
#include "chor/data/synth.hpp"
#include "chor/pose_ae.hpp"
#include "chor/rng.hpp"
#include "chor/seq_rnn.hpp"
#include "chor/seq_vae.hpp"

namespace fixtures {

inline chor::data::MotionDataset normalized_synth(std::size_t frames, std::uint64_t seed,
                                                  chor::data::Centering centering = chor::data::Centering::kGlobal) {
  chor::Rng rng(seed);
  chor::data::SynthConfig cfg;
  cfg.frames = frames;
  return chor::data::center_and_scale(chor::data::synth_generate(cfg, rng), centering);
}

inline chor::PoseAeConfig tiny_ae_config(std::size_t latent = 32) {
  chor::PoseAeConfig cfg;
  cfg.latent_dim = latent;
  cfg.hidden = 64;
  cfg.hidden_layers = 2;
  return cfg;
}

inline chor::TrainOptions tiny_ae_options(std::size_t epochs = 50) {
  chor::TrainOptions opts;
  opts.epochs = epochs;
  opts.batch_size = 16;
  opts.learning_rate = 3e-3;
  opts.seed = 1;
  return opts;
}

inline chor::SeqRnnConfig tiny_rnn_config() {
  chor::SeqRnnConfig cfg;
  cfg.layers = {16, 16};
  cfg.prompt_length = 10;
  cfg.predict_frames = 1;
  cfg.num_mixtures = 2;
  return cfg;
}

inline chor::RnnTrainOptions tiny_rnn_options(std::size_t epochs = 150) {
  chor::RnnTrainOptions opts;
  opts.epochs = epochs;
  opts.batch_size = 32;
  opts.learning_rate = 1e-3;
  opts.seed = 2;
  opts.stride = 2;
  return opts;
}

inline chor::SeqVaeConfig tiny_vae_config() {
  chor::SeqVaeConfig cfg;
  cfg.seq_len = 16;
  cfg.encoder_layers = {32, 32};
  cfg.decoder_layers = {32, 32};
  cfg.dense_dim = 32;
  cfg.latent_dim = 8;
  return cfg;
}

inline chor::VaeTrainOptions tiny_vae_options(std::size_t epochs = 100) {
  chor::VaeTrainOptions opts;
  opts.epochs = epochs;
  opts.batch_size = 10;
  opts.learning_rate = 1e-3;
  opts.seed = 3;
  opts.stride = 16;
  return opts;
}

}  // namespace fixtures
