#include "chor_tools/cli.hpp"

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "chor/checkpoint.hpp"
#include "chor/data/io.hpp"
#include "chor/data/normalize.hpp"
#include "chor/data/synth.hpp"
#include "chor/pca.hpp"
#include "chor_tools/service.hpp"

namespace chor::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const fs::path& path) {
  try {
    return json::parse(data::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw data::FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_frames(const fs::path& path, std::span<const data::Frame> frames, double fps, const std::string& name = {}) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (path.extension() == ".csv") {
    data::write_text_file(path, data::frames_to_csv(frames));
  } else {
    data::export_animation(path, frames, fps, name);
  }
}

std::string numbered(const std::string& stem, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%03zu.json", i);
  return stem + buf;
}

data::Centering centering_of(const json& config) {
  const std::string c = config.value("centering", std::string("global"));
  if (c == "global") return data::Centering::kGlobal;
  if (c == "per_frame") return data::Centering::kPerFrame;
  throw data::FormatError("config.centering: must be 'global' or 'per_frame'");
}

std::vector<data::Frame> window(const std::vector<data::Frame>& frames, std::size_t from, std::size_t length,
                                const std::string& what) {
  if (from + length > frames.size()) {
    throw InvalidArgument(what + ": need " + std::to_string(length) + " frames from index " + std::to_string(from) +
                          ", input has " + std::to_string(frames.size()));
  }
  return {frames.begin() + static_cast<std::ptrdiff_t>(from),
          frames.begin() + static_cast<std::ptrdiff_t>(from + length)};
}

template <typename Model>
std::vector<data::Frame> raw_out(const Model& model, std::span<const data::Frame> frames) {
  return data::invert_normalization(model.norm, frames);
}

void report_training(std::ostream& out, const TrainingReport& report) {
  const auto& first = report.initial();
  const auto& last = report.final();
  out << "epochs " << last.epoch << ": train " << first.train_loss << " -> " << last.train_loss << ", test "
      << first.test_loss << " -> " << last.test_loss << "\n";
  if (report.aborted) out << "aborted: " << report.abort_reason << "\n";
}

struct TrainArgs {
  std::string data;
  std::string config;
  std::string out;
  std::string report;
};

void add_train_options(CLI::App* cmd, TrainArgs& args) {
  cmd->add_option("--data", args.data, "training data (animation JSON or CSV)")->required();
  cmd->add_option("--config", args.config, "JSON overrides for architecture and training");
  cmd->add_option("--out", args.out, "checkpoint path (.chor)")->required();
  cmd->add_option("--report", args.report, "write the per-epoch training report as JSON");
}

struct Prepared {
  json config = json::object();
  data::MotionDataset dataset;
};

Prepared prepare(const TrainArgs& args) {
  Prepared p;
  if (!args.config.empty()) p.config = read_json(args.config);
  if (!p.config.is_object()) throw data::FormatError("config: must be a JSON object");
  p.dataset = data::center_and_scale(data::load_dataset(args.data), centering_of(p.config));
  return p;
}

template <typename Model>
void finish_training(const TrainArgs& args, const Model& model, const TrainingReport& report, std::ostream& out) {
  report_training(out, report);
  store::save(model, args.out);
  if (!args.report.empty()) data::write_text_file(args.report, to_json(report).dump(2) + "\n");
  out << "wrote " << args.out << "\n";
  if (report.aborted) throw NumericError("training aborted: " + report.abort_reason);
}

const json& section(const json& config, const char* key) {
  static const json empty = json::object();
  return config.contains(key) ? config[key] : empty;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"chor: generative choreography models"};
  app.require_subcommand(1);

  std::size_t frames = 1000;
  std::uint64_t seed = 0;
  double fps = data::kDefaultFps;
  std::string out_path;
  auto* synth = app.add_subcommand("synth", "write a synthetic motion dataset");
  synth->add_option("--frames", frames, "number of frames")->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed, "random seed");
  synth->add_option("--fps", fps, "frame rate")->check(CLI::PositiveNumber);
  synth->add_option("--out", out_path, "output file (.json or .csv)")->required();

  TrainArgs ae_args, rnn_args, vae_args;
  auto* train_ae = app.add_subcommand("train-ae", "train a pose autoencoder");
  add_train_options(train_ae, ae_args);
  auto* train_rnn = app.add_subcommand("train-rnn", "train an LSTM + mixture density sequence model");
  add_train_options(train_rnn, rnn_args);
  auto* train_vae = app.add_subcommand("train-vae", "train a sequence variational autoencoder");
  add_train_options(train_vae, vae_args);

  std::string model_path, input_path, out_dir;
  std::size_t steps = 100, count = 1, from = 0;
  double temperature = 1.0, radius = 1.0, sigma = 0.5;
  auto* generate = app.add_subcommand("generate", "continue a prompt with a sequence model");
  generate->add_option("--model", model_path, "seq_rnn checkpoint")->required();
  generate->add_option("--prompt", input_path, "prompt frames (animation JSON or CSV)")->required();
  generate->add_option("--from", from, "first prompt frame in the file");
  generate->add_option("--steps", steps, "generation steps");
  generate->add_option("--temperature", temperature, "sampling temperature")->check(CLI::NonNegativeNumber);
  generate->add_option("--seed", seed, "random seed");
  generate->add_option("--out", out_path, "output file")->required();

  auto* sample = app.add_subcommand("sample", "draw unconditional sequences from a VAE");
  sample->add_option("--model", model_path, "seq_vae checkpoint")->required();
  sample->add_option("--count", count, "number of samples")->check(CLI::PositiveNumber);
  sample->add_option("--radius", radius, "latent radius")->check(CLI::NonNegativeNumber);
  sample->add_option("--seed", seed, "random seed");
  sample->add_option("--out-dir", out_dir, "output directory")->required();

  auto* vary = app.add_subcommand("vary", "generate variations of a sequence with a VAE");
  vary->add_option("--model", model_path, "seq_vae checkpoint")->required();
  vary->add_option("--input", input_path, "base sequence file")->required();
  vary->add_option("--from", from, "first base frame in the file");
  vary->add_option("--sigma", sigma, "noise scale in latent standard deviations")->check(CLI::NonNegativeNumber);
  vary->add_option("--count", count, "number of variations")->check(CLI::PositiveNumber);
  vary->add_option("--seed", seed, "random seed");
  vary->add_option("--out-dir", out_dir, "output directory")->required();

  std::string vae_path, pose_path;
  auto* project = app.add_subcommand("project", "export a pose-space trajectory");
  project->add_option("--vae", vae_path, "seq_vae checkpoint; projects its reconstruction of the input");
  project->add_option("--pose2d", pose_path, "pose autoencoder checkpoint")->required();
  project->add_option("--input", input_path, "frames to project")->required();
  project->add_option("--from", from, "first frame used with --vae");
  project->add_option("--out", out_path, "trajectory JSON")->required();

  auto* convert = app.add_subcommand("convert", "convert between animation JSON and CSV");
  convert->add_option("--input", input_path, "source file")->required();
  convert->add_option("--out", out_path, "destination file")->required();

  std::string config_path;
  int port = -1;
  auto* serve = app.add_subcommand("serve", "start the HTTP service");
  serve->add_option("--config", config_path, "service configuration JSON")->required();
  serve->add_option("--port", port, "override the configured port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      data::SynthConfig cfg;
      cfg.frames = frames;
      cfg.fps = fps;
      Rng rng(seed);
      const auto ds = data::synth_generate(cfg, rng);
      write_frames(out_path, ds.frames, ds.fps, ds.name);
      out << "wrote " << ds.frames.size() << " frames to " << out_path << "\n";
    } else if (train_ae->parsed()) {
      auto p = prepare(ae_args);
      Rng rng(section(p.config, "training").value("seed", std::uint64_t{0}));
      PoseAutoencoder model(pose_ae_config_from_json(section(p.config, "architecture")), rng);
      TrainOptions opts;
      merge_json(opts, section(p.config, "training"));
      const auto report = ae_train(model, p.dataset, opts, p.config.value("offset_augment", false));
      finish_training(ae_args, model, report, out);
    } else if (train_rnn->parsed()) {
      auto p = prepare(rnn_args);
      const json& training = section(p.config, "training");
      RnnTrainOptions opts;
      merge_json(opts, training);
      if (training.contains("stride")) opts.stride = training["stride"].get<std::size_t>();
      std::optional<PcaModel> pca;
      const json& pca_cfg = section(p.config, "pca");
      if (pca_cfg.contains("variance")) {
        const auto split = data::temporal_split(p.dataset.frames, opts.train_fraction);
        pca = pca_fit(data::flatten(split.first), split.first.size(), data::kFrameDim,
                      pca_cfg["variance"].get<double>());
        out << "pca keeps " << pca->k() << " components\n";
      }
      Rng rng(opts.seed);
      SeqRnn model(seq_rnn_config_from_json(section(p.config, "architecture")), std::move(pca), rng);
      const auto report = chor::rnn_train(model, p.dataset, opts);
      finish_training(rnn_args, model, report, out);
    } else if (train_vae->parsed()) {
      auto p = prepare(vae_args);
      const json& training = section(p.config, "training");
      VaeTrainOptions opts;
      merge_json(opts, training);
      if (training.contains("stride")) opts.stride = training["stride"].get<std::size_t>();
      if (training.contains("rotate_augment")) opts.rotate_augment = training["rotate_augment"].get<bool>();
      if (training.contains("deterministic_latent")) {
        opts.deterministic_latent = training["deterministic_latent"].get<bool>();
      }
      Rng rng(opts.seed);
      SequenceVae model(seq_vae_config_from_json(section(p.config, "architecture")), rng);
      const auto report = vae_train(model, p.dataset, opts);
      finish_training(vae_args, model, report, out);
    } else if (generate->parsed()) {
      const auto model = store::load_seq_rnn(model_path);
      const auto input = data::load_dataset(input_path);
      const auto prompt = data::apply_normalization(
          model.norm, window(input.frames, from, model.config().prompt_length, "prompt"));
      Rng rng(seed);
      const auto result = rnn_generate(model, prompt, steps, rng, temperature);
      write_frames(out_path, raw_out(model, result), model.fps);
      out << "wrote " << result.size() << " frames to " << out_path << "\n";
    } else if (sample->parsed()) {
      const auto model = store::load_seq_vae(model_path);
      Rng rng(seed);
      for (std::size_t i = 0; i < count; ++i) {
        const auto seq = vae_sample_unconditional(model, rng, radius);
        write_frames(fs::path(out_dir) / numbered("sample", i), raw_out(model, seq), model.fps);
      }
      out << "wrote " << count << " samples to " << out_dir << "\n";
    } else if (vary->parsed()) {
      const auto model = store::load_seq_vae(model_path);
      const auto input = data::load_dataset(input_path);
      VariationRequest req;
      req.base = data::apply_normalization(model.norm, window(input.frames, from, model.seq_len(), "input"));
      req.noise_scale = sigma;
      req.count = count;
      req.seed = seed;
      const auto recon = vae_reconstruct(model, req.base);
      write_frames(fs::path(out_dir) / "reconstruction.json", raw_out(model, recon), model.fps);
      const auto outs = vae_vary(model, req);
      double total = 0.0;
      for (std::size_t i = 0; i < outs.size(); ++i) {
        write_frames(fs::path(out_dir) / numbered("variation", i), raw_out(model, outs[i]), model.fps);
        total += sequence_deviation(outs[i], recon);
      }
      out << "wrote " << outs.size() << " variations to " << out_dir << "; mean deviation "
          << total / static_cast<double>(outs.size()) / model.norm.scale << "\n";
    } else if (project->parsed()) {
      const auto pose = store::load_pose_ae(pose_path);
      const auto input = data::load_dataset(input_path);
      data::LatentTrajectory traj;
      if (!vae_path.empty()) {
        const auto vae = store::load_seq_vae(vae_path);
        const auto base = data::apply_normalization(vae.norm, window(input.frames, from, vae.seq_len(), "input"));
        const auto recon = data::invert_normalization(vae.norm, vae_reconstruct(vae, base));
        traj = vae_project_to_pose_space(vae, pose, data::apply_normalization(pose.norm, recon));
      } else {
        traj = ae_project(pose, data::apply_normalization(pose.norm, input.frames));
      }
      traj.fps = pose.fps;
      data::write_text_file(out_path, data::trajectory_to_json(traj).dump() + "\n");
      out << "wrote " << traj.points.size() << " points to " << out_path << "\n";
    } else if (convert->parsed()) {
      const auto ds = data::load_dataset(input_path);
      write_frames(out_path, ds.frames, ds.fps, ds.name);
      out << "wrote " << ds.frames.size() << " frames to " << out_path << "\n";
    } else if (serve->parsed()) {
      auto config = service::load_serve_config(config_path);
      if (port >= 0) config.port = port;
      const service::Service svc(std::move(config));
      service::HttpServer server(svc);
      const int bound = server.bind();
      out << "listening on http://" << svc.config().host << ":" << bound << "\n" << std::flush;
      server.listen_after_bind();
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace chor::cli
