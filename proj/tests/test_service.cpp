#include <filesystem>
#include <fstream>
#include <thread>
#include <unistd.h>

#include <gtest/gtest.h>
#include <httplib.h>

#include "chor/checkpoint.hpp"
#include "chor/data/io.hpp"
#include "chor/data/normalize.hpp"
#include "chor_tools/service.hpp"
#include "model_fixtures.hpp"
#include "schema.hpp"

using namespace chor;
using nlohmann::json;
using service::Request;
using service::Response;
using service::Service;

namespace {

namespace fs = std::filesystem;

struct World {
  fs::path dir;
  data::MotionDataset raw;
  std::unique_ptr<Service> svc;

  World() {
    dir = fs::temp_directory_path() / ("chor_service_" + std::to_string(::getpid()));
    fs::create_directories(dir / "static");
    Rng synth_rng(7);
    data::SynthConfig sc;
    sc.frames = 300;
    raw = data::synth_generate(sc, synth_rng);
    data::export_animation(dir / "synth.json", raw.frames, raw.fps, "synth");
    const auto ds = data::center_and_scale(raw);

    Rng r1(1);
    PoseAutoencoder ae(fixtures::tiny_ae_config(2), r1);
    ae_train(ae, ds, fixtures::tiny_ae_options(20));
    store::save(ae, dir / "pose2d.chor");

    Rng r2(2);
    SequenceVae vae(fixtures::tiny_vae_config(), r2);
    vae_train(vae, ds, fixtures::tiny_vae_options(10));
    store::save(vae, dir / "vae.chor");

    const auto split = data::temporal_split(ds.frames, 0.8);
    Rng r3(3);
    SeqRnn rnn(fixtures::tiny_rnn_config(),
               pca_fit(data::flatten(split.first), split.first.size(), data::kFrameDim, 0.95), r3);
    rnn_train(rnn, ds, fixtures::tiny_rnn_options(5));
    store::save(rnn, dir / "rnn.chor");

    std::ofstream(dir / "static" / "index.html") << "<html>explorer</html>";
    std::ofstream(dir / "static" / "app.js") << "console.log(1);";
    json cfg{{"port", 0},
             {"static_dir", "static"},
             {"models", {{"pose2d", "pose2d.chor"}, {"vae", "vae.chor"}, {"rnn", "rnn.chor"}}},
             {"datasets", {{"synth", "synth.json"}}}};
    std::ofstream(dir / "serve.json") << cfg.dump(2);
    svc = std::make_unique<Service>(service::load_serve_config(dir / "serve.json"));
  }
  ~World() { fs::remove_all(dir); }
};

World& world() {
  static World w;
  return w;
}

Response post(const std::string& path, const json& body) {
  return world().svc->handle(Request{"POST", path, {}, body.dump()});
}

Response get(const std::string& path, std::map<std::string, std::string> query = {}) {
  return world().svc->handle(Request{"GET", path, std::move(query), {}});
}

json frames_json(std::span<const data::Frame> frames) {
  return data::animation_to_json(frames, 35.0)["frames"];
}

std::vector<data::Frame> frames_of(const json& doc) { return data::animation_from_json(doc).frames; }

std::vector<data::Frame> raw_slice(std::size_t from, std::size_t n) {
  const auto& f = world().raw.frames;
  return {f.begin() + static_cast<std::ptrdiff_t>(from), f.begin() + static_cast<std::ptrdiff_t>(from + n)};
}

std::size_t resident_bytes() {
  std::ifstream statm("/proc/self/statm");
  std::size_t size = 0, resident = 0;
  statm >> size >> resident;
  return resident * static_cast<std::size_t>(::sysconf(_SC_PAGESIZE));
}

}  // namespace

TEST(ServeConfig, ParsesAndResolvesRelativePaths) {
  const json doc{{"host", "0.0.0.0"},
                 {"port", 9000},
                 {"models", {{"a", "m/a.chor"}, {"b", "/abs/b.chor"}}},
                 {"static_dir", "ui"}};
  const auto c = service::serve_config_from_json(doc, "/srv/base");
  EXPECT_EQ(c.host, "0.0.0.0");
  EXPECT_EQ(c.port, 9000);
  EXPECT_EQ(c.models.at("a"), fs::path("/srv/base/m/a.chor"));
  EXPECT_EQ(c.models.at("b"), fs::path("/abs/b.chor"));
  EXPECT_EQ(c.static_dir, fs::path("/srv/base/ui"));
  EXPECT_EQ(c.body_limit, 8u * 1024 * 1024);
  EXPECT_EQ(service::serve_config_from_json(service::to_json(c)).models, c.models);
  EXPECT_THROW(service::serve_config_from_json(json{{"port", 70000}}), Error);
  EXPECT_THROW(service::serve_config_from_json(json{{"port", "x"}}), Error);
}

TEST(ServeConfig, StartupFailsWhenACheckpointDoesNotLoad) {
  service::ServeConfig c;
  c.models["missing"] = world().dir / "nope.chor";
  EXPECT_THROW(Service{c}, Error);
  c.models.clear();
  c.models["dataset"] = world().dir / "synth.json";
  EXPECT_THROW(Service{c}, Error);
}

TEST(ServiceModels, ListsKindsDimsAndRates) {
  const auto r = get("/api/models");
  ASSERT_EQ(r.status, 200);
  const auto doc = r.json();
  std::map<std::string, json> byname;
  for (const auto& m : doc["models"]) byname[m["name"]] = m;
  EXPECT_EQ(byname["pose2d"]["kind"], "pose_ae");
  EXPECT_EQ(byname["pose2d"]["latent_dim"], 2);
  EXPECT_EQ(byname["vae"]["kind"], "seq_vae");
  EXPECT_EQ(byname["vae"]["latent_dim"], 8);
  EXPECT_EQ(byname["vae"]["seq_len"], 16);
  EXPECT_EQ(byname["rnn"]["kind"], "seq_rnn");
  EXPECT_EQ(byname["rnn"]["prompt_length"], 10);
  for (const auto& [_, m] : byname) EXPECT_EQ(m["fps"], 35.0);
  ASSERT_EQ(doc["datasets"].size(), 1u);
  EXPECT_EQ(doc["datasets"][0]["frames"], 300);
  EXPECT_FALSE(doc["skeleton_edges"].empty());
}

TEST(ServicePose, SinglePointDecodesToSingleFrame) {
  const auto r = post("/api/pose/decode-trajectory", {{"model", "pose2d"}, {"points", {{0.1, -0.2}}}});
  ASSERT_EQ(r.status, 200) << r.body;
  const auto doc = r.json();
  ASSERT_TRUE(schema::animation(doc));
  ASSERT_EQ(doc["frames"].size(), 1u);
  const auto ae = store::load_pose_ae(world().dir / "pose2d.chor");
  data::LatentTrajectory t{2, {{0.1, -0.2}}, 35.0};
  const auto expect = data::invert_normalization(ae.norm, ae_decode_trajectory(ae, t, Interpolation::kLinear, 1));
  const auto got = frames_of(doc);
  for (std::size_t i = 0; i < 159; ++i) EXPECT_NEAR(got[0].coords[i], expect[0].coords[i], 1e-12);
}

TEST(ServicePose, InterpolatedTrajectoryLengthAndDeterminism) {
  const json body{{"model", "pose2d"},
                  {"points", {{0.0, 0.0}, {0.5, 0.5}, {1.0, -0.5}}},
                  {"interpolation", "catmull_rom"},
                  {"samples_per_segment", 4}};
  const auto a = post("/api/pose/decode-trajectory", body), b = post("/api/pose/decode-trajectory", body);
  ASSERT_EQ(a.status, 200);
  EXPECT_EQ(a.body, b.body);
  EXPECT_TRUE(schema::animation(a.json()));
  EXPECT_EQ(a.json()["frames"].size(), 9u);
}

TEST(ServicePose, DecodeErrors) {
  auto status = [](const json& body) { return post("/api/pose/decode-trajectory", body).status; };
  EXPECT_EQ(status({{"points", {{0.0, 0.0}}}}), 400);
  EXPECT_EQ(status({{"model", "ghost"}, {"points", {{0.0, 0.0}}}}), 404);
  EXPECT_EQ(status({{"model", "vae"}, {"points", {{0.0, 0.0}}}}), 422);
  EXPECT_EQ(status({{"model", "pose2d"}, {"points", {{0.0, 0.0, 0.0}}}}), 422);
  EXPECT_EQ(status({{"model", "pose2d"}, {"points", json::array()}}), 400);
  EXPECT_EQ(status({{"model", "pose2d"}, {"points", {{0.0, "x"}}}}), 400);
  EXPECT_EQ(status({{"model", "pose2d"}, {"points", {{0.0, 0.0}}}, {"interpolation", "cubic"}}), 400);
  EXPECT_EQ(status({{"model", "pose2d"}, {"points", {{0.0, 0.0}}}, {"samples_per_segment", 0}}), 400);
  const auto r = post("/api/pose/decode-trajectory", {{"model", "pose2d"}, {"points", {{0.0, 0.0, 1.0}}}});
  EXPECT_TRUE(schema::error(r.json(), 422));
  EXPECT_EQ(r.json()["error"]["field"], "points[0]");
}

TEST(ServicePose, ProjectMatchesLibraryProjection) {
  const auto frames = raw_slice(40, 25);
  const auto r = post("/api/pose/project", {{"model", "pose2d"}, {"frames", frames_json(frames)}});
  ASSERT_EQ(r.status, 200) << r.body;
  const auto doc = r.json();
  ASSERT_TRUE(schema::trajectory(doc));
  const auto ae = store::load_pose_ae(world().dir / "pose2d.chor");
  const auto expect = ae_project(ae, data::apply_normalization(ae.norm, frames));
  const auto got = data::trajectory_from_json(doc);
  ASSERT_EQ(got.points.size(), 25u);
  for (std::size_t t = 0; t < 25; ++t)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(got.points[t][j], expect.points[t][j], 1e-12);
}

TEST(ServicePose, ProjectRejectsMalformedFrames) {
  json frames = frames_json(raw_slice(0, 2));
  frames[1].erase(0);
  auto r = post("/api/pose/project", {{"model", "pose2d"}, {"frames", frames}});
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.json()["error"]["field"], "frames[1]");
  frames = frames_json(raw_slice(0, 2));
  frames[0][3] = {1.0, 2.0};
  EXPECT_EQ(post("/api/pose/project", {{"model", "pose2d"}, {"frames", frames}}).status, 400);
  EXPECT_EQ(post("/api/pose/project", {{"model", "pose2d"}, {"frames", 3}}).status, 400);
}

TEST(ServiceVae, SampleCountAndShape) {
  const auto r = post("/api/vae/sample", {{"model", "vae"}, {"count", 4}, {"radius", 1.0}, {"seed", 5}});
  ASSERT_EQ(r.status, 200) << r.body;
  const auto doc = r.json();
  ASSERT_EQ(doc["animations"].size(), 4u);
  for (const auto& a : doc["animations"]) {
    EXPECT_TRUE(schema::animation(a));
    EXPECT_EQ(a["frames"].size(), 16u);
  }
}

TEST(ServiceVae, SeededSamplingIsReferentiallyTransparent) {
  const json body{{"model", "vae"}, {"count", 2}, {"seed", 9}};
  EXPECT_EQ(post("/api/vae/sample", body).body, post("/api/vae/sample", body).body);
  json other = body;
  other["seed"] = 10;
  EXPECT_NE(post("/api/vae/sample", body).body, post("/api/vae/sample", other).body);
  EXPECT_EQ(post("/api/vae/sample", {{"model", "vae"}, {"count", 0}}).status, 400);
  EXPECT_EQ(post("/api/vae/sample", {{"model", "vae"}, {"radius", -1}}).status, 400);
  EXPECT_EQ(post("/api/vae/sample", {{"model", "vae"}, {"seed", -1}}).status, 400);
}

TEST(ServiceVae, ZeroSigmaVariationIsByteStableReconstruction) {
  const json body{{"model", "vae"}, {"frames", frames_json(raw_slice(100, 16))}, {"sigma", 0}, {"count", 3}, {"seed", 4}};
  const auto a = post("/api/vae/vary", body), b = post("/api/vae/vary", body);
  ASSERT_EQ(a.status, 200) << a.body;
  EXPECT_EQ(a.body, b.body);
  const auto doc = a.json();
  EXPECT_TRUE(schema::animation(doc["reconstruction"]));
  ASSERT_EQ(doc["animations"].size(), 3u);
  for (const auto& v : doc["animations"]) {
    EXPECT_TRUE(schema::animation(v));
    EXPECT_EQ(v, doc["reconstruction"]);
  }
  EXPECT_EQ(doc["mean_deviation"], 0.0);
}

TEST(ServiceVae, MeanDeviationGrowsWithSigma) {
  double previous = -1.0;
  for (double sigma : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    const auto r = post("/api/vae/vary",
                        {{"model", "vae"}, {"frames", frames_json(raw_slice(50, 16))}, {"sigma", sigma}, {"count", 20},
                         {"seed", 1}});
    ASSERT_EQ(r.status, 200);
    const double d = r.json()["mean_deviation"].get<double>();
    EXPECT_GE(d, previous) << "sigma " << sigma;
    previous = d;
  }
}

TEST(ServiceVae, VaryRejectsWrongLength) {
  const auto r = post("/api/vae/vary", {{"model", "vae"}, {"frames", frames_json(raw_slice(0, 15))}});
  EXPECT_EQ(r.status, 422);
  EXPECT_TRUE(schema::error(r.json(), 422));
  EXPECT_EQ(post("/api/vae/vary", {{"model", "vae"}}).status, 400);
}

TEST(ServiceRnn, GenerateShapeAndTransparency) {
  const json body{{"model", "rnn"}, {"prompt_frames", frames_json(raw_slice(0, 10))}, {"steps", 12},
                  {"temperature", 0.8}, {"seed", 3}};
  const auto a = post("/api/rnn/generate", body), b = post("/api/rnn/generate", body);
  ASSERT_EQ(a.status, 200) << a.body;
  EXPECT_EQ(a.body, b.body);
  EXPECT_TRUE(schema::animation(a.json()));
  EXPECT_EQ(a.json()["frames"].size(), 12u);
  json zero = body;
  zero["temperature"] = 0;
  json zero_other = zero;
  zero_other["seed"] = 99;
  EXPECT_EQ(post("/api/rnn/generate", zero).body, post("/api/rnn/generate", zero_other).body);
}

TEST(ServiceRnn, GenerateErrors) {
  EXPECT_EQ(post("/api/rnn/generate", {{"model", "rnn"}, {"prompt_frames", frames_json(raw_slice(0, 9))}}).status, 422);
  EXPECT_EQ(post("/api/rnn/generate", {{"model", "rnn"}, {"prompt_frames", frames_json(raw_slice(0, 10))},
                                       {"temperature", -1}})
                .status,
            400);
  EXPECT_EQ(post("/api/rnn/generate", {{"model", "pose2d"}, {"prompt_frames", frames_json(raw_slice(0, 10))}}).status,
            422);
}

TEST(ServiceDataset, ServesRawFrameSlices) {
  const auto r = get("/api/dataset/synth/frames", {{"from", "20"}, {"count", "5"}});
  ASSERT_EQ(r.status, 200);
  ASSERT_TRUE(schema::animation(r.json()));
  const auto got = frames_of(r.json());
  const auto expect = raw_slice(20, 5);
  ASSERT_EQ(got.size(), 5u);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t i = 0; i < 159; ++i) EXPECT_DOUBLE_EQ(got[t].coords[i], expect[t].coords[i]);
  EXPECT_EQ(get("/api/dataset/synth/frames", {{"from", "298"}, {"count", "10"}}).json()["frames"].size(), 2u);
  EXPECT_EQ(get("/api/dataset/synth/frames").json()["frames"].size(), 300u);
  EXPECT_EQ(get("/api/dataset/other/frames").status, 404);
  EXPECT_EQ(get("/api/dataset/synth/frames", {{"from", "abc"}}).status, 400);
  EXPECT_EQ(get("/api/dataset/synth/frames", {{"from", "301"}}).status, 400);
}

TEST(ServiceProtocol, RoutingAndBodyErrors) {
  EXPECT_EQ(get("/api/nothing").status, 404);
  EXPECT_EQ(get("/api/vae/sample").status, 404);
  EXPECT_EQ(world().svc->handle(Request{"POST", "/api/vae/sample", {}, "{not json"}).status, 400);
  EXPECT_EQ(world().svc->handle(Request{"POST", "/api/vae/sample", {}, "[1, 2]"}).status, 400);
  EXPECT_EQ(world().svc->handle(Request{"DELETE", "/api/models", {}, ""}).status, 405);
  const std::string huge(service::kDefaultBodyLimit + 1, ' ');
  EXPECT_EQ(world().svc->handle(Request{"POST", "/api/vae/sample", {}, huge}).status, 413);
  const auto idx = get("/");
  EXPECT_EQ(idx.status, 200);
  EXPECT_EQ(idx.content_type, "text/html");
  EXPECT_EQ(idx.body, "<html>explorer</html>");
}

TEST(ServiceProtocol, MemoryStableOverThousandRequests) {
  const json sample{{"model", "vae"}, {"count", 1}, {"seed", 2}};
  const json pose{{"model", "pose2d"}, {"points", {{0.0, 0.0}, {1.0, 1.0}}}, {"samples_per_segment", 3}};
  const json gen{{"model", "rnn"}, {"prompt_frames", frames_json(raw_slice(0, 10))}, {"steps", 2}, {"seed", 1}};
  auto burst = [&](int n) {
    for (int i = 0; i < n; ++i) {
      switch (i % 4) {
        case 0: ASSERT_EQ(post("/api/vae/sample", sample).status, 200); break;
        case 1: ASSERT_EQ(post("/api/pose/decode-trajectory", pose).status, 200); break;
        case 2: ASSERT_EQ(post("/api/rnn/generate", gen).status, 200); break;
        default: ASSERT_EQ(get("/api/models").status, 200); break;
      }
    }
  };
  burst(100);
  const std::size_t before = resident_bytes();
  const std::string first = post("/api/vae/sample", sample).body;
  burst(1000);
  const std::size_t after = resident_bytes();
  EXPECT_LT(after, before + 16u * 1024 * 1024) << before << " -> " << after;
  EXPECT_EQ(post("/api/vae/sample", sample).body, first);
}

TEST(ServiceProtocol, ConcurrentIdenticalRequestsAgree) {
  const json body{{"model", "vae"}, {"frames", frames_json(raw_slice(10, 16))}, {"sigma", 1.0}, {"count", 2},
                  {"seed", 8}};
  const std::string expect = post("/api/vae/vary", body).body;
  std::vector<std::string> results(8);
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < results.size(); ++t) {
    threads.emplace_back([&, t] { results[t] = post("/api/vae/vary", body).body; });
  }
  for (auto& t : threads) t.join();
  for (const auto& r : results) EXPECT_EQ(r, expect);
}

TEST(ServiceHttp, SocketRoundTripMatchesDirectDispatch) {
  service::HttpServer server(*world().svc);
  const int port = server.bind();
  ASSERT_GT(port, 0);
  std::thread loop([&] { server.listen_after_bind(); });
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(30, 0);

  auto models = client.Get("/api/models");
  ASSERT_TRUE(models);
  EXPECT_EQ(models->status, 200);
  EXPECT_EQ(models->body, get("/api/models").body);

  const json body{{"model", "vae"}, {"count", 2}, {"seed", 11}};
  auto sample = client.Post("/api/vae/sample", body.dump(), "application/json");
  ASSERT_TRUE(sample);
  EXPECT_EQ(sample->status, 200);
  EXPECT_EQ(sample->body, post("/api/vae/sample", body).body);

  auto slice = client.Get("/api/dataset/synth/frames?from=3&count=2");
  ASSERT_TRUE(slice);
  EXPECT_EQ(slice->body, get("/api/dataset/synth/frames", {{"from", "3"}, {"count", "2"}}).body);

  auto missing = client.Post("/api/vae/sample", json{{"model", "ghost"}}.dump(), "application/json");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_TRUE(schema::error(json::parse(missing->body), 404));

  auto asset = client.Get("/app.js");
  ASSERT_TRUE(asset);
  EXPECT_EQ(asset->status, 200);
  EXPECT_EQ(asset->body, "console.log(1);");

  const std::string huge(service::kDefaultBodyLimit + 16, 'x');
  auto too_big = client.Post("/api/vae/sample", huge, "application/json");
  if (too_big) EXPECT_EQ(too_big->status, 413);

  server.stop();
  loop.join();
}
