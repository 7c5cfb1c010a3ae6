#include <gtest/gtest.h>

#include "ecp/backend.hpp"
#include "ecp/cache.hpp"
#include "ecp/error.hpp"
#include "ecp/synthetic.hpp"
#include "test_support.hpp"

namespace ecp {
namespace {

using testing::TempDir;

ChatRequest point_request(const ImageBuffer& img, std::string instruction = "click the red square") {
  ChatRequest req;
  req.model_id = "m";
  req.instruction = std::move(instruction);
  req.expected = ExpectedOutput::kPoint;
  req.images.push_back(make_image_part("image", downsample(img, 1280), ImageFormat::kPng));
  return req;
}

TEST(BackendConfig, ValidationNamesField) {
  BackendConfig cfg;
  cfg.kind = BackendKind::kHttp;
  try {
    validate(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    EXPECT_NE(std::string(e.what()).find("endpoint"), std::string::npos);
  }
  cfg.kind = BackendKind::kScripted;
  EXPECT_THROW(validate(cfg), Error);
  cfg.kind = BackendKind::kRandom;
  cfg.model_id.clear();
  EXPECT_THROW(validate(cfg), Error);
  EXPECT_EQ(backend_kind_from_string("synthetic"), BackendKind::kSynthetic);
  EXPECT_THROW(backend_kind_from_string("gpu"), Error);
}

TEST(ChatRequest, Validation) {
  ChatRequest req = point_request(ImageBuffer::filled({8, 8}, {}));
  EXPECT_NO_THROW(validate(req));
  req.images.push_back(req.images.front());
  EXPECT_THROW(validate(req), Error);  // duplicate label
  req.images.clear();
  EXPECT_THROW(validate(req), Error);
  ChatRequest choice = point_request(ImageBuffer::filled({8, 8}, {}));
  choice.expected = ExpectedOutput::kChoice;
  choice.n_choices = 1;
  EXPECT_THROW(validate(choice), Error);
}

TEST(Fingerprint, DependsOnContentNotOnBytesOrLabels) {
  const ImageBuffer img = testing::random_image({32, 32}, 1);
  ChatRequest a = point_request(img);
  ChatRequest b = a;
  b.images[0] = make_image_part("image", downsample(img, 1280), ImageFormat::kJpeg);
  b.images[0].content_hash = a.images[0].content_hash;
  EXPECT_EQ(fingerprint(a), fingerprint(b));
  b.instruction += "!";
  EXPECT_NE(fingerprint(a), fingerprint(b));
  ChatRequest c = a;
  c.model_id = "other";
  EXPECT_NE(fingerprint(a), fingerprint(c));
  ChatRequest d = a;
  d.expected = ExpectedOutput::kBox;
  EXPECT_NE(fingerprint(a), fingerprint(d));
  ChatRequest e = point_request(testing::random_image({32, 32}, 2));
  EXPECT_NE(fingerprint(a), fingerprint(e));
}

TEST(Scripted, LookupAndParse) {
  TempDir dir;
  ChatRequest req = point_request(ImageBuffer::filled({3840, 2160}, {}));
  req.images = {make_image_part("image", downsample(ImageBuffer::filled({3840, 2160}, {}), 1920),
                                ImageFormat::kPng)};
  testing::write_fixtures(dir / "fx.json", {{fingerprint(req), "(1520, 340)"}});
  BackendConfig cfg;
  cfg.fixtures = dir / "fx.json";
  const ModelReply reply = complete(cfg, req);
  EXPECT_EQ(reply.raw_text, "(1520, 340)");
  ASSERT_TRUE(reply.parsed);
  EXPECT_EQ(std::get<FramedPoint>(*reply.parsed),
            (FramedPoint{1520, 340, submitted_frame({1920, 1080})}));
}

TEST(Scripted, MissNamesFingerprint) {
  TempDir dir;
  testing::write_fixtures(dir / "fx.json", {{"abc", "(1, 1)"}});
  BackendConfig cfg;
  cfg.fixtures = dir / "fx.json";
  const ChatRequest req = point_request(ImageBuffer::filled({16, 16}, {}));
  try {
    complete(cfg, req);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFixtureMiss);
    EXPECT_NE(std::string(e.what()).find(fingerprint(req)), std::string::npos);
  }
}

TEST(Scripted, BadFixtureFiles) {
  TempDir dir;
  BackendConfig cfg;
  cfg.fixtures = dir / "missing.json";
  EXPECT_THROW(make_backend(cfg), Error);
  testing::write_text_file(dir / "list.json", "[1, 2]");
  cfg.fixtures = dir / "list.json";
  EXPECT_THROW(make_backend(cfg), Error);
  testing::write_text_file(dir / "obj.json", R"({"f": {"reply": "B"}})");
  cfg.fixtures = dir / "obj.json";
  EXPECT_NO_THROW(make_backend(cfg));
}

TEST(Scripted, UnparseableReplyKeepsRawText) {
  TempDir dir;
  const ChatRequest req = point_request(ImageBuffer::filled({64, 64}, {}));
  testing::write_fixtures(dir / "fx.json", {{fingerprint(req), "somewhere on the left"}});
  BackendConfig cfg;
  cfg.fixtures = dir / "fx.json";
  const ModelReply reply = complete(cfg, req);
  EXPECT_FALSE(reply.parsed);
  EXPECT_EQ(reply.raw_text, "somewhere on the left");
  EXPECT_FALSE(reply.parse_error.empty());
}

TEST(Random, DeterministicPerFingerprint) {
  BackendConfig cfg;
  cfg.kind = BackendKind::kRandom;
  cfg.seed = 7;
  const ChatRequest req = point_request(ImageBuffer::filled({3840, 2160}, {}));
  const ModelReply a = complete(cfg, req);
  const ModelReply b = complete(cfg, req);
  ASSERT_TRUE(a.parsed);
  EXPECT_EQ(a.raw_text, b.raw_text);
  EXPECT_TRUE(is_valid(std::get<FramedPoint>(*a.parsed)));

  cfg.seed = 8;
  EXPECT_NE(complete(cfg, req).raw_text, a.raw_text);
}

TEST(Random, PointsCoverTheFrame) {
  BackendConfig cfg;
  cfg.kind = BackendKind::kRandom;
  cfg.seed = 1;
  auto backend = make_backend(cfg);
  const ImageBuffer img = ImageBuffer::filled({400, 200}, {});
  int left = 0;
  int top = 0;
  constexpr int kN = 400;
  for (int i = 0; i < kN; ++i) {
    const ModelReply r = complete(*backend, point_request(img, "q" + std::to_string(i)),
                                  cfg.convention);
    const auto p = std::get<FramedPoint>(*r.parsed);
    ASSERT_TRUE(is_valid(p));
    left += p.x < 200;
    top += p.y < 100;
  }
  EXPECT_NEAR(left, kN / 2, 60);
  EXPECT_NEAR(top, kN / 2, 60);
}

TEST(Random, ChoicesInRange) {
  BackendConfig cfg;
  cfg.kind = BackendKind::kRandom;
  cfg.seed = 3;
  auto backend = make_backend(cfg);
  std::array<int, 4> seen{};
  for (int i = 0; i < 200; ++i) {
    ChatRequest req = point_request(ImageBuffer::filled({8, 8}, {}), "q" + std::to_string(i));
    req.expected = ExpectedOutput::kChoice;
    req.n_choices = 4;
    const ModelReply r = complete(*backend, req, cfg.convention);
    ++seen.at(std::get<ChoiceIndex>(*r.parsed));
  }
  for (int n : seen) EXPECT_GT(n, 20);
}

TEST(Synthetic, LocatesLargeTargetsExactly) {
  BackendConfig cfg;
  cfg.kind = BackendKind::kSynthetic;
  auto backend = make_backend(cfg);
  // 96 px target at 3x downsampling spans 32 submitted px.
  const ImageBuffer img = testing::make_scene({3840, 2160}, 960, 600, 96, 96, synthetic::palette()[0].rgb);
  const ModelReply r = complete(*backend, point_request(img), cfg.convention);
  const auto p = std::get<FramedPoint>(*r.parsed);
  EXPECT_DOUBLE_EQ(p.x, (960 + 48) / 3.0);
  EXPECT_DOUBLE_EQ(p.y, (600 + 48) / 3.0);
}

TEST(Synthetic, SmallTargetsOnlyCoarsely) {
  BackendConfig cfg;
  cfg.kind = BackendKind::kSynthetic;
  auto backend = make_backend(cfg);
  // 12 px target shrinks to 4 px, below the 8 px default.
  const ImageBuffer img = testing::make_scene({3840, 2160}, 1300, 1300, 12, 12, synthetic::palette()[0].rgb);
  const ModelReply r = complete(*backend, point_request(img), cfg.convention);
  const auto p = std::get<FramedPoint>(*r.parsed);
  const FramedBox target{1300 / 3.0, 1300 / 3.0, 1312 / 3.0, 1312 / 3.0, p.frame};
  EXPECT_FALSE(point_in_box(p, target));
  // Still within one coarse cell of it.
  EXPECT_LT(std::abs(p.x - 435.3), 32.0);
  EXPECT_LT(std::abs(p.y - 435.3), 32.0);
}

TEST(Synthetic, ReadsDigitsOnlyAtSufficientResolution) {
  BackendConfig cfg;
  cfg.kind = BackendKind::kSynthetic;
  auto backend = make_backend(cfg);
  ImageBuffer img = ImageBuffer::filled({640, 480}, synthetic::kBackground);
  synthetic::draw_digit_tile(img, 100, 100, 7, 4);
  ChatRequest req;
  req.model_id = "m";
  req.expected = ExpectedOutput::kChoice;
  req.n_choices = 4;
  req.instruction = "What digit appears in the image?\nA. 3\nB. 7\nC. 1\nD. 9\nAnswer.";
  req.images.push_back(make_image_part("image", as_full_res(img), ImageFormat::kPng));
  EXPECT_EQ(std::get<ChoiceIndex>(*complete(*backend, req, cfg.convention).parsed), 1);

  req.images = {make_image_part("image", downsample(img, 160), ImageFormat::kPng)};
  EXPECT_EQ(std::get<ChoiceIndex>(*complete(*backend, req, cfg.convention).parsed), 0);
}

TEST(DigitFont, TilesReadBack) {
  for (int d = 0; d <= 9; ++d) {
    ImageBuffer img = ImageBuffer::filled({80, 80}, synthetic::kBackground);
    const Dims tile = synthetic::digit_tile_dims(4);
    synthetic::draw_digit_tile(img, 10, 10, d, 4);
    EXPECT_EQ(synthetic::read_digit_tile(img, 10, 10, 10 + tile.width, 10 + tile.height), d);
  }
}

TEST(FixtureRecorder, CapturesAndMerges) {
  TempDir dir;
  auto inner = std::make_shared<testing::FnBackend>([](const ChatRequest&) { return "(1, 2)"; });
  FixtureRecorder rec(inner);
  const ChatRequest req = point_request(ImageBuffer::filled({8, 8}, {}));
  rec.call(req);
  testing::write_fixtures(dir / "fx.json", {{"old", "keep"}});
  rec.save(dir / "fx.json");
  BackendConfig cfg;
  cfg.fixtures = dir / "fx.json";
  auto scripted = make_backend(cfg);
  EXPECT_EQ(scripted->call(req).text, "(1, 2)");
  EXPECT_NE(testing::read_text_file(dir / "fx.json").find("keep"), std::string::npos);
}

}  // namespace
}  // namespace ecp
