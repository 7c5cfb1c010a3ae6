#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ecp/error.hpp"
#include "ecp/geometry.hpp"

namespace ecp {
namespace {

const Dims k4k{3840, 2160};

FramedPoint full(double x, double y, Dims d = k4k) { return {x, y, full_res_frame(d)}; }

// Written without min/max so it does not share code shape with the library.
double clamp_oracle(double rep, int image_side, int crop_side) {
  const int side = crop_side < image_side ? crop_side : image_side;
  const double ideal = rep - side / 2.0;
  if (ideal < 0.0) return 0.0;
  if (ideal > image_side - side) return image_side - side;
  return ideal;
}

// Integer left edge whose window centre is nearest to rep, searching every
// feasible shift.
int brute_force_left(double rep, int image_side, int crop_side) {
  const int side = crop_side < image_side ? crop_side : image_side;
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int left = 0; left + side <= image_side; ++left) {
    const double dist = std::abs(left + side / 2.0 - rep);
    if (dist < best_dist) {
      best_dist = dist;
      best = left;
    }
  }
  return best;
}

TEST(Dims, RejectsNonPositive) {
  EXPECT_THROW(make_dims(0, 5), Error);
  EXPECT_THROW(make_dims(5, -1), Error);
  EXPECT_EQ(make_dims(3, 4), (Dims{3, 4}));
}

TEST(RepresentativeCoordinate, PointIsIdentity) {
  const FramedPoint p = full(312.0, 40.5);
  EXPECT_EQ(representative_coordinate(p), p);
}

TEST(RepresentativeCoordinate, BoxCentre) {
  EXPECT_EQ(representative_coordinate(FramedBox{10, 20, 30, 40, full_res_frame(k4k)}),
            full(20, 30));
  EXPECT_EQ(representative_coordinate(FramedBox{0, 0, 3840, 2160, full_res_frame(k4k)}),
            full(1920, 1080));
}

TEST(CandidateBox, WorkedExamples) {
  const CropSpec crop{1024, 1024};
  EXPECT_EQ(candidate_box(full(1920, 1080), k4k, crop),
            (FramedBox{1408, 568, 2432, 1592, full_res_frame(k4k)}));
  EXPECT_EQ(candidate_box(full(100, 100), k4k, crop),
            (FramedBox{0, 0, 1024, 1024, full_res_frame(k4k)}));
  EXPECT_EQ(candidate_box(full(3800, 2100), k4k, crop),
            (FramedBox{2816, 1136, 3840, 2160, full_res_frame(k4k)}));
  const Dims small{640, 480};
  EXPECT_EQ(candidate_box(full(200, 150, small), small, crop),
            (FramedBox{0, 0, 640, 480, full_res_frame(small)}));
}

TEST(CandidateBox, BruteForceAgreesOnWorkedExamples) {
  EXPECT_EQ(brute_force_left(3800, 3840, 1024), 2816);
  EXPECT_EQ(brute_force_left(2100, 2160, 1024), 1136);
  EXPECT_EQ(brute_force_left(100, 3840, 1024), 0);
  EXPECT_EQ(brute_force_left(1920, 3840, 1024), 1408);
}

TEST(CandidateBox, RejectsForeignFrame) {
  const FramedPoint p{10, 10, submitted_frame({1280, 720})};
  EXPECT_THROW(candidate_box(p, k4k, {}), Error);
  try {
    candidate_box(full(10, 10, {1280, 720}), k4k, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFrameMismatch);
  }
}

TEST(CandidateBox, FuzzAgainstClampOracle) {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> side(1, 5000);
  std::uniform_int_distribution<int> crop_side(1, 3000);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const Dims img{side(rng), side(rng)};
    const CropSpec crop{crop_side(rng), crop_side(rng)};
    const FramedPoint rep = full(unit(rng) * img.width, unit(rng) * img.height, img);
    const FramedBox b = candidate_box(rep, img, crop);
    const int ew = crop.w < img.width ? crop.w : img.width;
    const int eh = crop.h < img.height ? crop.h : img.height;

    ASSERT_EQ(b.x1, clamp_oracle(rep.x, img.width, crop.w));
    ASSERT_EQ(b.y1, clamp_oracle(rep.y, img.height, crop.h));
    // x2 - x1 can be off by an ulp for fractional edges; the sum is exact.
    ASSERT_EQ(b.x2, b.x1 + ew);
    ASSERT_EQ(b.y2, b.y1 + eh);
    ASSERT_NEAR(b.width(), ew, 1e-9);
    ASSERT_NEAR(b.height(), eh, 1e-9);
    ASSERT_GE(b.x1, 0.0);
    ASSERT_LE(b.x2, img.width);
    ASSERT_GE(b.y1, 0.0);
    ASSERT_LE(b.y2, img.height);
    ASSERT_TRUE(is_valid(b));
    ASSERT_EQ(b.frame, rep.frame);

    const bool unclamped_x = ew / 2.0 <= rep.x && rep.x <= img.width - ew / 2.0;
    const bool unclamped_y = eh / 2.0 <= rep.y && rep.y <= img.height - eh / 2.0;
    // Exact in real arithmetic; doubles leave at most a few ulps.
    if (unclamped_x) ASSERT_NEAR(b.center().x, rep.x, 1e-9);
    if (unclamped_y) ASSERT_NEAR(b.center().y, rep.y, 1e-9);
    if (unclamped_x && unclamped_y) {
      const FramedBox again = candidate_box(b.center(), img, crop);
      ASSERT_NEAR(again.x1, b.x1, 1e-9);
      ASSERT_NEAR(again.y1, b.y1, 1e-9);
      ASSERT_NEAR(again.x2, b.x2, 1e-9);
      ASSERT_NEAR(again.y2, b.y2, 1e-9);
    }
  }
}

TEST(CandidateBox, IntegerRepsMatchBruteForce) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const Dims img{static_cast<int>(rng() % 300) + 1, static_cast<int>(rng() % 300) + 1};
    // Even crop sides keep the ideal left edge integral, so the nearest
    // integer shift is unique.
    const CropSpec crop{2 * static_cast<int>(rng() % 200 + 1), 2 * static_cast<int>(rng() % 200 + 1)};
    const FramedPoint rep = full(static_cast<double>(rng() % (img.width + 1)),
                                 static_cast<double>(rng() % (img.height + 1)), img);
    const FramedBox b = candidate_box(rep, img, crop);
    if (crop.w <= img.width) ASSERT_EQ(b.x1, brute_force_left(rep.x, img.width, crop.w));
    if (crop.h <= img.height) ASSERT_EQ(b.y1, brute_force_left(rep.y, img.height, crop.h));
  }
}

TEST(Transform, PointExamples) {
  const FrameId a = submitted_frame({100, 100});
  const FrameId b = full_res_frame({200, 200});
  const FrameTransform t{2.0, 2.0, 0.0, 0.0, a, b};
  EXPECT_EQ(transform_point({10, 10, a}, t), (FramedPoint{20, 20, b}));
  EXPECT_EQ(transform_point({0, 0, a}, identity_transform(a)), (FramedPoint{0, 0, a}));

  const FrameId crop = crop_local_frame({1024, 1024});
  const FrameTransform shift = translation_transform(crop, full_res_frame(k4k), 1408, 568);
  EXPECT_EQ(transform_point({100, 50, crop}, shift), full(1508, 618));
}

TEST(Transform, PointClampsToTarget) {
  const FrameId a = submitted_frame({100, 100});
  const FrameId b = full_res_frame({150, 150});
  const FrameTransform t{2.0, 2.0, 0.0, 0.0, a, b};
  EXPECT_EQ(transform_point({90, 10, a}, t), (FramedPoint{150, 20, b}));
}

TEST(Transform, FrameMismatchThrows) {
  const FrameTransform t = identity_transform(submitted_frame({10, 10}));
  try {
    transform_point({1, 1, crop_local_frame({10, 10})}, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFrameMismatch);
  }
}

TEST(Transform, BoxExamples) {
  const FrameId a = submitted_frame({100, 100});
  const FrameId big = full_res_frame({300, 300});
  EXPECT_EQ(transform_box({0, 0, 10, 10, a}, FrameTransform{3, 3, 0, 0, a, big}),
            (FramedBox{0, 0, 30, 30, big}));
  EXPECT_EQ(transform_box({1, 2, 3, 4, a}, identity_transform(a)), (FramedBox{1, 2, 3, 4, a}));

  const FrameTransform t{0.5, 0.5, 100, 100, a, big};
  const FramedBox got = transform_box({5, 5, 15, 15, a}, t);
  EXPECT_EQ(got, (FramedBox{102.5, 102.5, 107.5, 107.5, big}));
  // Corner-wise oracle.
  EXPECT_EQ(transform_point({5, 5, a}, t).x, got.x1);
  EXPECT_EQ(transform_point({15, 15, a}, t).y, got.y2);
}

TEST(Transform, InvertExamples) {
  const FrameId a = submitted_frame({100, 100});
  const FrameId b = full_res_frame({300, 300});
  const FrameTransform inv = invert({2, 2, 6, 6, a, b});
  EXPECT_DOUBLE_EQ(inv.scale_x, 0.5);
  EXPECT_DOUBLE_EQ(inv.offset_x, -3.0);
  EXPECT_EQ(inv.from, b);
  EXPECT_EQ(inv.to, a);

  const FrameTransform id = invert(identity_transform(a));
  EXPECT_EQ(id.scale_x, 1.0);
  EXPECT_EQ(id.offset_y, 0.0);
  EXPECT_EQ(id.from, a);
}

TEST(Transform, InverseRoundTripProperty) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> log_scale(std::log(0.01), std::log(100.0));
  std::uniform_real_distribution<double> offset(0.0, 1000.0);
  std::uniform_real_distribution<double> coord(0.0, 1000.0);
  const FrameId from = full_res_frame({1000, 1000});
  for (int i = 0; i < 1000; ++i) {
    const double sx = std::exp(log_scale(rng));
    const double sy = std::exp(log_scale(rng));
    const double ox = offset(rng);
    const double oy = offset(rng);
    const FrameId to = submitted_frame({static_cast<int>(std::ceil(1000 * sx + ox)) + 1,
                                        static_cast<int>(std::ceil(1000 * sy + oy)) + 1});
    const FrameTransform t{sx, sy, ox, oy, from, to};
    const FrameTransform back = invert(t);
    const FramedPoint p{coord(rng), coord(rng), from};
    const FramedPoint q = transform_point(transform_point(p, t), back);
    ASSERT_EQ(q.frame, from);
    ASSERT_NEAR(q.x, p.x, 1e-9);
    ASSERT_NEAR(q.y, p.y, 1e-9);
  }
}

TEST(Transform, ComposeMatchesSequentialApplication) {
  const FrameId a = crop_local_frame({64, 64});
  const FrameId b = submitted_frame({500, 400});
  const FrameId c = full_res_frame({2000, 1600});
  const FrameTransform t1 = translation_transform(a, b, 100, 40);
  const FrameTransform t2 = scaling_transform(b, c);
  const FrameTransform both = compose(t1, t2);
  EXPECT_EQ(both.from, a);
  EXPECT_EQ(both.to, c);
  for (double x : {0.0, 13.5, 64.0}) {
    const FramedPoint p{x, 64.0 - x, a};
    const FramedPoint seq = transform_point(transform_point(p, t1), t2);
    const FramedPoint one = transform_point(p, both);
    EXPECT_NEAR(seq.x, one.x, 1e-9);
    EXPECT_NEAR(seq.y, one.y, 1e-9);
  }
  EXPECT_THROW(compose(t2, t1), Error);
}

TEST(PointInBox, Examples) {
  const FrameId f = full_res_frame({100, 100});
  const FramedBox b{0, 0, 10, 10, f};
  EXPECT_TRUE(point_in_box({5, 5, f}, b));
  EXPECT_TRUE(point_in_box({10, 10, f}, b));
  EXPECT_FALSE(point_in_box({10.01, 5, f}, b));
  EXPECT_THROW(point_in_box({5, 5, submitted_frame({100, 100})}, b), Error);
}

TEST(PointInBox, GridAgainstFourInequalities) {
  std::mt19937_64 rng(3);
  const FrameId f = full_res_frame({50, 50});
  for (int i = 0; i < 100; ++i) {
    double xs[2] = {static_cast<double>(rng() % 51), static_cast<double>(rng() % 51)};
    double ys[2] = {static_cast<double>(rng() % 51), static_cast<double>(rng() % 51)};
    if (xs[0] > xs[1]) std::swap(xs[0], xs[1]);
    if (ys[0] > ys[1]) std::swap(ys[0], ys[1]);
    const FramedBox b{xs[0], ys[0], xs[1], ys[1], f};
    for (int y = 0; y < 50; ++y) {
      for (int x = 0; x < 50; ++x) {
        const bool oracle = !(x < xs[0]) && !(x > xs[1]) && !(y < ys[0]) && !(y > ys[1]);
        ASSERT_EQ(point_in_box({static_cast<double>(x), static_cast<double>(y), f}, b), oracle);
      }
    }
  }
}

TEST(Validity, PointAndBoxInvariants) {
  const FrameId f = full_res_frame({10, 10});
  EXPECT_TRUE(is_valid(FramedPoint{10, 0, f}));
  EXPECT_FALSE(is_valid(FramedPoint{-0.5, 0, f}));
  EXPECT_TRUE(is_valid(FramedBox{0, 0, 10, 10, f}));
  EXPECT_FALSE(is_valid(FramedBox{5, 0, 4, 10, f}));
  EXPECT_FALSE(is_valid(FramedBox{0, 0, 10, 11, f}));
}

}  // namespace
}  // namespace ecp
