#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "ecp/error.hpp"
#include "ecp/parsing.hpp"

namespace ecp {
namespace {

const FrameId k720 = submitted_frame({1280, 720});
constexpr auto kPx = CoordConvention::kPixelAbsolute;
constexpr auto kK = CoordConvention::kNormalizedThousand;
constexpr auto kUnit = CoordConvention::kNormalizedUnit;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kInvalidArgument;
}

TEST(ParsePoint, Examples) {
  EXPECT_EQ(parse_point("(512, 256)", k720, kPx), (FramedPoint{512, 256, k720}));
  EXPECT_EQ(parse_point("(500, 500)", k720, kK), (FramedPoint{640, 360, k720}));
  EXPECT_EQ(parse_point("The icon is at [3999, 10]", k720, kPx), (FramedPoint{1280, 10, k720}));
}

TEST(ParsePoint, TolerantForms) {
  EXPECT_EQ(parse_point("click x=12.5, y=40", k720, kPx), (FramedPoint{12.5, 40, k720}));
  EXPECT_EQ(parse_point("(0.5,0.25)", k720, kUnit), (FramedPoint{640, 180, k720}));
  EXPECT_EQ(parse_point("point: [ 7 , 8 ]", k720, kPx), (FramedPoint{7, 8, k720}));
  EXPECT_EQ(code_of([] { parse_point("no numbers here", k720, kPx); }), ErrorCode::kNoParse);
  EXPECT_EQ(code_of([] { parse_point("", k720, kPx); }), ErrorCode::kNoParse);
}

TEST(ParseBox, Examples) {
  EXPECT_EQ(parse_box("(100, 100, 300, 400)", k720, kPx), (FramedBox{100, 100, 300, 400, k720}));
  EXPECT_EQ(parse_box("(300, 400, 100, 100)", k720, kPx), (FramedBox{100, 100, 300, 400, k720}));
  const FrameId f = submitted_frame({2000, 1000});
  // 250/1000*2000 = 500, 250/1000*1000 = 250, 750/1000*2000 = 1500, 750/1000*1000 = 750
  EXPECT_EQ(parse_box("(250, 250, 750, 750)", f, kK), (FramedBox{500, 250, 1500, 750, f}));
}

TEST(ParseBox, SplitPairsAndClamping) {
  EXPECT_EQ(parse_box("(10,20),(30,40)", k720, kPx), (FramedBox{10, 20, 30, 40, k720}));
  EXPECT_EQ(parse_box("[-5, 10, 5000, 9000]", k720, kPx), (FramedBox{0, 10, 1280, 720, k720}));
  EXPECT_EQ(code_of([] { parse_box("(1, 2)", k720, kPx); }), ErrorCode::kNoParse);
}

TEST(ParseSpatial, PicksShape) {
  EXPECT_TRUE(std::holds_alternative<FramedPoint>(parse_spatial("(1, 2)", k720, kPx)));
  EXPECT_TRUE(std::holds_alternative<FramedBox>(parse_spatial("(1, 2, 3, 4)", k720, kPx)));
}

TEST(ParseChoice, Examples) {
  EXPECT_EQ(parse_choice("B", 4), 1);
  EXPECT_EQ(parse_choice("The answer is (C).", 4), 2);
  EXPECT_EQ(code_of([] { parse_choice("E", 4); }), ErrorCode::kNoParse);
}

TEST(ParseChoice, Preferences) {
  EXPECT_EQ(parse_choice("answer: d", 4), 3);
  EXPECT_EQ(parse_choice("A. cat", 4), 0);
  EXPECT_EQ(parse_choice("I pick (B) over A", 4), 1);
  EXPECT_EQ(parse_choice("Answer: B. Although A is tempting", 4), 1);
  EXPECT_EQ(code_of([] { parse_choice("B", 1); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { parse_choice("B", 27); }), ErrorCode::kInvalidArgument);
}

TEST(Format, ParseInvertsFormatForInRangeBoxes) {
  std::mt19937_64 rng(11);
  const FrameId f = submitted_frame({1920, 1080});
  for (CoordConvention conv : {kPx, kK, kUnit}) {
    for (int i = 0; i < 500; ++i) {
      double xs[2] = {double(rng() % 1921), double(rng() % 1921)};
      double ys[2] = {double(rng() % 1081), double(rng() % 1081)};
      if (xs[0] > xs[1]) std::swap(xs[0], xs[1]);
      if (ys[0] > ys[1]) std::swap(ys[0], ys[1]);
      const FramedBox b{xs[0], ys[0], xs[1], ys[1], f};
      const FramedBox back = parse_box(format_box(b, conv), f, conv);
      ASSERT_NEAR(back.x1, b.x1, 1e-9);
      ASSERT_NEAR(back.y1, b.y1, 1e-9);
      ASSERT_NEAR(back.x2, b.x2, 1e-9);
      ASSERT_NEAR(back.y2, b.y2, 1e-9);
      const FramedPoint p = b.center();
      const FramedPoint pb = parse_point(format_point(p, conv), f, conv);
      ASSERT_NEAR(pb.x, p.x, 1e-9);
      ASSERT_NEAR(pb.y, p.y, 1e-9);
    }
  }
  EXPECT_EQ(format_box({1, 2, 3, 4, f}, kPx), "(1, 2, 3, 4)");
}

TEST(Parse, FuzzedTextAlwaysYieldsValidCoordinates) {
  std::mt19937_64 rng(5);
  const std::string alphabet = "0123456789-.,()[] xy=e+abc";
  const FrameId f = submitted_frame({640, 480});
  int parsed = 0;
  for (int i = 0; i < 20000; ++i) {
    std::string text;
    const std::size_t len = rng() % 40;
    for (std::size_t k = 0; k < len; ++k) text += alphabet[rng() % alphabet.size()];
    for (CoordConvention conv : {kPx, kK, kUnit}) {
      try {
        ASSERT_TRUE(is_valid(parse_point(text, f, conv))) << text;
        ++parsed;
      } catch (const Error& e) {
        ASSERT_EQ(e.code(), ErrorCode::kNoParse);
      }
      try {
        ASSERT_TRUE(is_valid(parse_box(text, f, conv))) << text;
      } catch (const Error& e) {
        ASSERT_EQ(e.code(), ErrorCode::kNoParse);
      }
    }
  }
  EXPECT_GT(parsed, 100);
}

TEST(ChoiceLetter, Letters) {
  EXPECT_EQ(choice_letter(0), 'A');
  EXPECT_EQ(choice_letter(25), 'Z');
}

}  // namespace
}  // namespace ecp
