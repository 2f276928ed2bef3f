#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "stegan/error.hpp"
#include "stegan/metrics.hpp"
#include "stegan/stego.hpp"

using namespace stegan;

namespace {

ImageU8 random_image(int h, int w, std::mt19937_64& rng) {
  ImageU8 img(h, w);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng());
  return img;
}

// Mean SSIM straight from the definition: weighted local statistics at every
// valid window position, 2-D Gaussian weights.
double ssim_oracle(const ImageU8& a, const ImageU8& b) {
  const int r = 5;
  double wsum = 0;
  double wt[11][11];
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) wsum += wt[i + r][j + r] = std::exp(-(i * i + j * j) / (2 * 1.5 * 1.5));
  const double c1 = std::pow(0.01 * 255, 2), c2 = std::pow(0.03 * 255, 2);
  double total = 0;
  for (int c = 0; c < 3; ++c) {
    double sum = 0;
    int count = 0;
    for (int y = r; y < a.height - r; ++y) {
      for (int x = r; x < a.width - r; ++x) {
        double mx = 0, my = 0;
        for (int i = -r; i <= r; ++i)
          for (int j = -r; j <= r; ++j) {
            const double w = wt[i + r][j + r] / wsum;
            mx += w * a.at(y + i, x + j, c);
            my += w * b.at(y + i, x + j, c);
          }
        double vx = 0, vy = 0, cxy = 0;
        for (int i = -r; i <= r; ++i)
          for (int j = -r; j <= r; ++j) {
            const double w = wt[i + r][j + r] / wsum;
            const double dx = a.at(y + i, x + j, c) - mx, dy = b.at(y + i, x + j, c) - my;
            vx += w * dx * dx;
            vy += w * dy * dy;
            cxy += w * dx * dy;
          }
        sum += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
    }
    total += sum / count;
  }
  return total / 3;
}

double kld_oracle(const std::vector<float>& a, const std::vector<float>& b, int bins) {
  double lo = a[0], hi = a[0];
  for (const auto* set : {&a, &b})
    for (float v : *set) {
      lo = std::min<double>(lo, v);
      hi = std::max<double>(hi, v);
    }
  auto hist = [&](const std::vector<float>& s) {
    std::vector<double> h(bins, 0.0);
    for (float v : s) {
      int k = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
      h[std::min(k, bins - 1)] += 1;
    }
    for (auto& x : h) x = (x / s.size() + 1e-10) / (1 + bins * 1e-10);
    return h;
  };
  const auto p = hist(a), q = hist(b);
  double kl = 0;
  for (int i = 0; i < bins; ++i) kl += p[i] * std::log(p[i] / q[i]);
  return kl;
}

StegoModel tiny_model(std::uint64_t seed, int iters) {
  TrainConfig cfg;
  cfg.stages = 2;
  cfg.coarsest_min_dim = 12;
  cfg.width = 8;
  cfg.iters_per_stage = iters;
  cfg.seed = seed;
  ImageU8 cover(16, 16);
  for (std::size_t i = 0; i < cover.data.size(); ++i) cover.data[i] = static_cast<std::uint8_t>(i * 37 % 251);
  return train(cover, {}, {}, cfg).model;
}

}  // namespace

TEST_CASE("psnr") {
  std::mt19937_64 rng(1);
  const ImageU8 a = random_image(9, 7, rng);
  CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  ImageU8 b = a;
  for (auto& v : b.data) v = v == 255 ? 254 : v + 1;
  CHECK(psnr(a, b) == doctest::Approx(20 * std::log10(255.0)));
  CHECK(psnr(a, b) == doctest::Approx(48.13).epsilon(1e-4));
  CHECK(psnr(ImageU8(4, 4, 0), ImageU8(4, 4, 255)) == doctest::Approx(0.0));
  double last = std::numeric_limits<double>::infinity();
  for (int e = 1; e < 100; e += 7) {
    const double p = psnr(ImageU8(3, 3, 100), ImageU8(3, 3, 100 + e));
    CHECK(p < last);
    last = p;
  }
  CHECK(psnr(a, b) == psnr(b, a));
  CHECK_THROWS_AS(psnr(a, ImageU8(9, 8)), Error);
}

TEST_CASE("ssim") {
  std::mt19937_64 rng(2);
  SUBCASE("identity") {
    const ImageU8 a = random_image(16, 20, rng);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("constant vs constant + 128 matches the literal oracle") {
    const ImageU8 a(13, 15, 50), b(13, 15, 178);
    CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-6);
    const double c1 = std::pow(0.01 * 255, 2);
    CHECK(ssim(a, b) == doctest::Approx((2.0 * 50 * 178 + c1) / (50.0 * 50 + 178.0 * 178 + c1)));
  }
  SUBCASE("random images match the literal oracle") {
    for (int t = 0; t < 5; ++t) {
      const ImageU8 a = random_image(14 + t, 19 - t, rng);
      ImageU8 b = a;
      for (auto& v : b.data) v = static_cast<std::uint8_t>(std::clamp<int>(v + int(rng() % 61) - 30, 0, 255));
      CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-6);
    }
  }
  SUBCASE("symmetry") {
    for (int t = 0; t < 50; ++t) {
      const ImageU8 a = random_image(12, 12, rng), b = random_image(12, 12, rng);
      CHECK(ssim(a, b) == ssim(b, a));
      CHECK(ssim(a, b) >= -1.0);
      CHECK(ssim(a, b) <= 1.0);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(ssim(ImageU8(10, 20), ImageU8(10, 20)), Error);
    CHECK_THROWS_AS(ssim(ImageU8(12, 12), ImageU8(12, 13)), Error);
  }
}

TEST_CASE("grayscale") {
  ImageU8 img(1, 2);
  img.at(0, 0, 0) = 255;
  img.at(0, 1, 1) = 100;
  const auto g = grayscale(img);
  CHECK(g[0] == doctest::Approx(0.299 * 255));
  CHECK(g[1] == doctest::Approx(58.7));
}

TEST_CASE("diversity score") {
  ImageU8 cover(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) cover.at(y, x, c) = x < 16 ? 0 : 255;
  SUBCASE("deterministic sampler") {
    const Sampler same = [&](std::uint64_t) { return cover; };
    CHECK(diversity_score(same, cover) == 0.0);
  }
  SUBCASE("uniform noise sampler") {
    const Sampler noise = [](std::uint64_t seed) {
      std::mt19937_64 rng(seed * 7919 + 1);
      ImageU8 img(32, 32);
      for (std::size_t p = 0; p < img.data.size(); p += 3) img.data[p] = img.data[p + 1] = img.data[p + 2] = rng() % 256;
      return img;
    };
    const double sigma = std::sqrt((256.0 * 256.0 - 1) / 12), sigma_c = 127.5;
    // population std over n draws: E[s^2] = sigma^2 (n - 1) / n
    const int n = 25;
    CHECK(diversity_score(noise, cover, n) == doctest::Approx(sigma * std::sqrt((n - 1.0) / n) / sigma_c).epsilon(0.03));
  }
  SUBCASE("errors") {
    const Sampler same = [&](std::uint64_t) { return cover; };
    CHECK_THROWS_AS(diversity_score(same, cover, 1), Error);
    CHECK_THROWS_AS(diversity_score(same, ImageU8(32, 32, 9)), Error);
  }
}

TEST_CASE("frechet distance") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  const int rows = 20000;
  FeatureMatrix a(rows, 4), b(rows, 4);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < 4; ++j) {
      a(i, j) = n01(rng);
      b(i, j) = 1.0 + n01(rng);
    }
  const auto r = frechet_distance(a, b);
  CHECK(r.distance == doctest::Approx(4.0).epsilon(0.05));
  CHECK_FALSE(r.regularized);
  CHECK(frechet_distance(a, a).distance == 0.0);
  CHECK(frechet_distance(a, b).distance == doctest::Approx(frechet_distance(b, a).distance).epsilon(1e-6));
  const auto few = frechet_distance(a.topRows(3), b.topRows(3));
  CHECK(few.regularized);
  CHECK(few.distance >= 0.0);
}

TEST_CASE("sifid") {
  std::mt19937_64 rng(4);
  const ImageU8 ref = random_image(16, 16, rng);
  const auto fx = default_feature_extractor();
  CHECK(fx(ref).cols() == 16);
  CHECK(fx(ref).rows() == 256);
  CHECK(fx(ref) == fx(ref));
  const std::vector<ImageU8> same{ref};
  CHECK(sifid(ref, same, fx) == 0.0);
  const std::vector<ImageU8> other{random_image(16, 16, rng), ImageU8(16, 16, 0)};
  CHECK(sifid(ref, other, fx) > 0.0);
}

TEST_CASE("histogram kld") {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> n0(0.0f, 1.0f), n5(0.5f, 1.0f);
  std::vector<float> a(100000), b(100000);
  for (auto& v : a) v = n0(rng);
  for (auto& v : b) v = n5(rng);
  CHECK(std::abs(histogram_kld(a, b) - kld_oracle(a, b, 100)) < 1e-6);
  CHECK(std::abs(histogram_kld(b, a, 37) - kld_oracle(b, a, 37)) < 1e-6);
  // N(0,1) vs N(0.5,1): continuous KL is 0.125
  CHECK(histogram_kld(a, b) == doctest::Approx(0.125).epsilon(0.1));
  CHECK(histogram_kld(a, a) == 0.0);
  const std::vector<float> flat(10, 2.0f);
  CHECK(histogram_kld(flat, flat) == 0.0);
  const auto h = pooled_histogram(a, b, 10);
  std::uint64_t na = 0;
  for (auto c : h.a) na += c;
  CHECK(na == a.size());
}

TEST_CASE("weight kld") {
  const StegoModel m1 = tiny_model(1, 2), m2 = tiny_model(2, 2);
  const auto self = weight_kld(m1, m1);
  CHECK(self.total == 0.0);
  REQUIRE(self.per_stage.size() == 2);
  for (double v : self.per_stage) CHECK(v == 0.0);
  const auto diff = weight_kld(m1, m2);
  CHECK(diff.total > 0.0);
  for (double v : diff.per_stage) CHECK(v >= 0.0);
  CHECK(diff.total == histogram_kld(flatten_parameters(m1), flatten_parameters(m2)));
  CHECK(diff.per_stage[1] ==
        histogram_kld(flatten_block_parameters(m1, 1), flatten_block_parameters(m2, 1)));

  TrainConfig cfg;
  cfg.stages = 2;
  cfg.coarsest_min_dim = 12;
  cfg.width = 4;
  cfg.iters_per_stage = 1;
  const StegoModel narrow = train(ImageU8(16, 16, 80), {}, {}, cfg).model;
  CHECK_THROWS_AS(weight_kld(m1, narrow), Error);
}

TEST_CASE("leakage audit") {
  std::mt19937_64 rng(6);
  const ImageU8 secret = random_image(16, 16, rng);
  const Sampler echo = [&](std::uint64_t) { return secret; };
  const auto none = leakage_audit(echo, secret, 0);
  CHECK(none.samples_drawn == 0);
  CHECK_FALSE(none.max_ssim.has_value());
  CHECK(none.flagged == 0);
  const auto all = leakage_audit(echo, secret, 7);
  CHECK(all.samples_drawn == 7);
  CHECK(all.flagged == 7);
  CHECK(*all.max_ssim == doctest::Approx(1.0));
  const Sampler flat = [](std::uint64_t s) { return ImageU8(16, 16, static_cast<std::uint8_t>(s)); };
  const auto low = leakage_audit(flat, secret, 5);
  CHECK(low.flagged == 0);
  CHECK(low.flagged <= low.samples_drawn);
  // the secret is resized to the sample dims
  CHECK(leakage_audit(echo, resize(secret, 32, 24), 2).samples_drawn == 2);
}
