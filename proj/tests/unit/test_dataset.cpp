#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <set>

#include <opencv2/imgproc.hpp>

#include "lbgan/dataset.hpp"
#include "lbgan/errors.hpp"
#include "lbgan/mask.hpp"
#include "lbgan/synthetic.hpp"
#include "test_support.hpp"

using namespace lbgan;

namespace {

// Independent rasteriser: a pixel is inside a patch when its index lies in the
// side-long window anchored at the landmark's pixel.
int oracle_mask_count(const LandmarkSet& lm, int size, int eye, int mouth) {
  auto inside = [](int r, int c, const Point& p, int side) {
    const int pr = static_cast<int>(std::floor(p.row)), pc = static_cast<int>(std::floor(p.col));
    return r >= pr - side / 2 && r <= pr - side / 2 + side - 1 && c >= pc - side / 2 && c <= pc - side / 2 + side - 1;
  };
  int count = 0;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      if (inside(r, c, lm.left_eye, eye) || inside(r, c, lm.right_eye, eye) || inside(r, c, lm.mouth_center, mouth)) {
        ++count;
      }
    }
  }
  return count;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("default mask has 850 pixels when patches do not overlap") {
    const LandmarkSet lm{{40, 30}, {40, 66}, {72, 48}};
    auto mask = build_mask(lm, 96);
    CHECK(mask.sum().item<double>() == 850.0);
    CHECK(oracle_mask_count(lm, 96, 15, 20) == 850);
    CHECK(((mask == 0) | (mask == 1)).all().item<bool>());
  }

  TEST_CASE("overlapping and clipped patches") {
    const LandmarkSet overlap{{40, 40}, {40, 46}, {72, 48}};
    const double overlapped = build_mask(overlap, 96).sum().item<double>();
    CHECK(overlapped < 850.0);
    CHECK(overlapped == oracle_mask_count(overlap, 96, 15, 20));

    const LandmarkSet corners{{0, 0}, {0, 95.5}, {95.9, 95.9}};
    auto mask = build_mask(corners, 96);
    CHECK(mask.sum().item<double>() < 850.0);
    CHECK(mask.sum().item<double>() == oracle_mask_count(corners, 96, 15, 20));
    CHECK(((mask == 0) | (mask == 1)).all().item<bool>());
  }

  TEST_CASE("patch sizes scale with parity") {
    CHECK(patch_sizes_for(96).eye == 15);
    CHECK(patch_sizes_for(96).mouth == 20);
    CHECK(patch_sizes_for(32).eye == 5);    // 15 / 3 = 5, odd
    CHECK(patch_sizes_for(32).mouth == 6);  // 20 / 3 = 6.67 -> nearest even 6
    CHECK(patch_sizes_for(192).eye == 31);
    CHECK(patch_sizes_for(192).mouth == 40);
    CHECK(patch_sizes_for(16).eye % 2 == 1);
    CHECK(patch_sizes_for(16).mouth % 2 == 0);
  }

  TEST_CASE("mask matches the rasteriser for random landmarks at several sizes") {
    std::mt19937_64 rng(3);
    for (int size : {16, 32, 64, 96}) {
      std::uniform_real_distribution<double> coord(0.0, size - 1e-6);
      const auto sizes = patch_sizes_for(size);
      for (int trial = 0; trial < 20; ++trial) {
        LandmarkSet lm{{coord(rng), coord(rng)}, {coord(rng), coord(rng)}, {coord(rng), coord(rng)}};
        CHECK(build_mask(lm, size).sum().item<double>() == oracle_mask_count(lm, size, sizes.eye, sizes.mouth));
      }
    }
  }

  TEST_CASE("intensity map endpoints") {
    cv::Mat raw(2, 2, CV_8UC3, cv::Scalar(0, 0, 0));
    raw.at<cv::Vec3b>(1, 1) = cv::Vec3b(255, 255, 255);
    auto t = to_face_tensor(raw);
    CHECK(t[0][0][0].item<float>() == -1.0f);
    CHECK(t[2][1][1].item<float>() == 1.0f);
    cv::Mat back = to_rgb8(t);
    CHECK(cv::norm(back, raw, cv::NORM_INF) == 0.0);
  }

  TEST_CASE("preprocess of a canonical render is the identity") {
    for (int size : {32, 96}) {
      const auto face = render_face(SyntheticFaceSpec::canonical(), 0.0, size);
      const auto tmpl = alignment_template(size);
      CHECK(face.landmarks.left_eye.col == doctest::Approx(tmpl.left_eye.col));
      CHECK(face.landmarks.mouth_center.row == doctest::Approx(tmpl.mouth_center.row));
      const auto out = preprocess(face.rgb8, face.landmarks, size);
      CHECK(out.image.min().item<float>() >= -1.0f);
      CHECK(out.image.max().item<float>() <= 1.0f);
      CHECK(std::abs(out.landmarks.left_eye.col - tmpl.left_eye.col) <= 1.0);
      CHECK(std::abs(out.landmarks.right_eye.row - tmpl.right_eye.row) <= 1.0);
      CHECK(std::abs(out.landmarks.mouth_center.col - tmpl.mouth_center.col) <= 1.0);
      const double err = (out.image - to_face_tensor(face.rgb8)).abs().max().item<double>();
      CHECK(err <= 2.0 / 255.0 * 2.0);  // 2 levels on the 8-bit scale, [-1, 1] spans 2
      // idempotent
      const auto again = preprocess(to_rgb8(out.image), out.landmarks, size);
      CHECK((again.image - out.image).abs().max().item<double>() <= 2.0 / 255.0 * 2.0);
    }
  }

  TEST_CASE("preprocess undoes a similarity transform") {
    const auto face = render_face(SyntheticFaceSpec::canonical(), 0.0, 96);
    // place the face rotated by 10 degrees and scaled 1.5x inside a 160 px frame
    const double angle = 10.0 * M_PI / 180.0, scale = 1.5;
    cv::Matx23d fwd(scale * std::cos(angle), -scale * std::sin(angle), 20.0, scale * std::sin(angle),
                    scale * std::cos(angle), 5.0);
    cv::Matx23d cv_fwd = fwd;
    for (int i = 0; i < 2; ++i) cv_fwd(i, 2) += 0.5 * (fwd(i, 0) + fwd(i, 1)) - 0.5;
    cv::Mat raw;
    cv::warpAffine(face.rgb8, raw, cv::Mat(cv_fwd), cv::Size(160, 160), cv::INTER_LINEAR, cv::BORDER_REPLICATE);
    const auto raw_landmarks = transform_landmarks(face.landmarks, fwd);

    const auto out = preprocess(raw, raw_landmarks, 96);
    const auto tmpl = alignment_template(96);
    CHECK(std::abs(out.landmarks.left_eye.col - tmpl.left_eye.col) < 1.0);
    CHECK(std::abs(out.landmarks.left_eye.row - out.landmarks.right_eye.row) < 1e-6);  // eyes horizontal
    CHECK(std::abs(out.landmarks.mouth_center.row - tmpl.mouth_center.row) < 1.0);
    // double resampling blurs edges; the bulk of the face survives
    const double mean_err = (out.image - to_face_tensor(face.rgb8)).abs().mean().item<double>();
    CHECK(mean_err < 0.05);
  }

  TEST_CASE("coincident eyes cannot be aligned") {
    cv::Mat raw(40, 40, CV_8UC3, cv::Scalar(10, 20, 30));
    CHECK_THROWS_AS(preprocess(raw, LandmarkSet{{10, 10}, {10, 10}, {30, 20}}, 32), AlignmentError);
  }

  TEST_CASE("frontal renders are mirror symmetric") {
    for (int id = 0; id < 20; ++id) {
      const auto spec = SyntheticFaceSpec::from_seed(identity_seed_for(5, id));
      for (int size : {32, 96}) {
        const auto lm = render_face(spec, 0.0, size).landmarks;
        CHECK(std::abs((lm.left_eye.col + lm.right_eye.col) - size) <= 1.0);
        CHECK(lm.left_eye.row == lm.right_eye.row);
      }
    }
  }

  TEST_CASE("yaw moves features with sin(yaw) and hides the far eye") {
    const auto spec = SyntheticFaceSpec::canonical();
    const auto a = synthetic_landmarks(spec, 30.0, 96), b = synthetic_landmarks(spec, -30.0, 96);
    CHECK(a.mouth_center.col - 48.0 == doctest::Approx(48.0 - b.mouth_center.col));
    CHECK(a.mouth_center.col - 48.0 == doctest::Approx(0.22 * 96 * 0.5));
    // the far (+col) eye is drawn up to 60 degrees and hidden beyond
    const cv::Mat frontal = render_face(spec, 0.0, 96).rgb8;
    const cv::Vec3b skin = frontal.at<cv::Vec3b>(static_cast<int>(0.62 * 96), static_cast<int>(0.38 * 96));
    auto at_right_eye = [&](double yaw) {
      const auto f = render_face(spec, yaw, 96);
      return f.rgb8.at<cv::Vec3b>(static_cast<int>(f.landmarks.right_eye.row), static_cast<int>(f.landmarks.right_eye.col));
    };
    CHECK(at_right_eye(60.0) != skin);
    CHECK(at_right_eye(75.0) == skin);
    CHECK(render_face(spec, 90.0, 96).landmarks.within(96, 96));
  }

  TEST_CASE("different identities differ in at least 1% of pixels") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> pose(0, kNumPoses - 1);
    int worst = 1 << 30;
    for (int pair = 0; pair < 100; ++pair) {
      const auto a = SyntheticFaceSpec::from_seed(identity_seed_for(rng(), pair));
      const auto b = SyntheticFaceSpec::from_seed(identity_seed_for(rng(), pair + 1));
      const double yaw = index_to_pose(pose(rng)).degrees;
      cv::Mat diff;
      cv::absdiff(render_face(a, yaw, 32).rgb8, render_face(b, yaw, 32).rgb8, diff);
      cv::Mat any_channel = diff.reshape(1, 32 * 32);
      cv::Mat per_pixel;
      cv::reduce(any_channel, per_pixel, 1, cv::REDUCE_MAX);
      worst = std::min(worst, cv::countNonZero(per_pixel));
    }
    CHECK(worst >= static_cast<int>(std::ceil(0.01 * 32 * 32)));
  }

  TEST_CASE("synthetic dataset layout and determinism") {
    const auto dir_a = scratch_dir("synth_a");
    const auto dir_b = scratch_dir("synth_b");
    const auto m = generate_synthetic_dataset(3, 9, 32, dir_a);
    CHECK(m.records.size() == 39);
    CHECK(m.n_id == 3);
    generate_synthetic_dataset(3, 9, 32, dir_b);
    std::set<std::pair<int, int>> pairs;
    for (const auto& r : m.records) {
      CHECK(file_bytes(dir_a / r.path) == file_bytes(dir_b / r.path));
      pairs.insert({r.identity.id, r.pose.degrees});
    }
    CHECK(pairs.size() == 39);  // every (identity, pose) exactly once
    CHECK(file_bytes(dir_a / "manifest.json") == file_bytes(dir_b / "manifest.json"));

    const auto loaded = load_manifest(dir_a);
    CHECK(loaded.records.size() == 39);
    CHECK(loaded.records[5].landmarks == m.records[5].landmarks);
    CHECK(loaded.records[5].identity_seed == m.records[5].identity_seed);
  }

  TEST_CASE("thirty identities give 390 records") {
    const auto m = generate_synthetic_dataset(30, 1, 16, scratch_dir("synth_30"));
    CHECK(m.records.size() == 390);
  }

  TEST_CASE("generation needs two identities and a writable directory") {
    CHECK_THROWS_AS(generate_synthetic_dataset(1, 1, 32, scratch_dir("synth_one")), InvalidParameter);
    const auto blocker = scratch_dir("synth_blocked") / "file";
    std::ofstream(blocker) << "x";
    CHECK_THROWS_AS(generate_synthetic_dataset(2, 1, 32, blocker / "sub"), IoError);
  }

  TEST_CASE("batch sampling") {
    const auto dir = scratch_dir("synth_sample");
    Dataset data(generate_synthetic_dataset(4, 2, 16, dir));
    Rng rng(5);
    const auto frontal = data.sample(24, true, rng);
    CHECK(frontal.size() == 24);
    CHECK((frontal.pose_indices == kFrontalIndex).all().item<bool>());

    Rng r1(42), r2(42);
    const auto a = data.sample(24, false, r1), b = data.sample(24, false, r2);
    CHECK(a.records == b.records);
    CHECK(torch::equal(a.images, b.images));
    CHECK(a.masks.sizes() == std::vector<int64_t>{24, 1, 16, 16});

    CHECK(data.find(3, 12).has_value());
    CHECK_FALSE(data.find(4, 0).has_value());
    CHECK(data.records_at_pose(kFrontalIndex).size() == 4);

    DatasetManifest no_frontal = data.manifest();
    std::erase_if(no_frontal.records, [](const ManifestRecord& r) { return r.pose == kFrontalPose; });
    CHECK_THROWS_AS(sample_record_indices(no_frontal, 4, true, rng), SamplingError);
    CHECK_NOTHROW(sample_record_indices(no_frontal, 4, false, rng));
  }

  TEST_CASE("manifest rejects identities beyond n_id") {
    nlohmann::json j = {{"version", 1}, {"n_id", 1}, {"image_size", 16},
                        {"records", {{{"path", "a.png"}, {"id", 1}, {"pose_degrees", 0},
                                      {"landmarks", {{"left_eye", {5, 5}}, {"right_eye", {5, 10}}, {"mouth", {12, 8}}}}}}}};
    CHECK_THROWS_AS(manifest_from_json(j, "."), InvalidInput);
    j["records"][0]["id"] = 0;
    CHECK_NOTHROW(manifest_from_json(j, "."));
    j["version"] = 7;
    CHECK_THROWS_AS(manifest_from_json(j, "."), InvalidInput);
  }
}
