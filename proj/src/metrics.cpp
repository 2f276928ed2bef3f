#include "stegan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <random>
#include <string>

#include "stegan/error.hpp"
#include "stegan/nn/layers.hpp"
#include "stegan/stego.hpp"

namespace stegan {

double psnr(const ImageU8& a, const ImageU8& b) {
  if (a.dims() != b.dims()) fail(ErrorCode::DimensionMismatch, "psnr: image dims differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    sum += d * d;
  }
  if (sum == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sum / static_cast<double>(a.data.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace {

std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> g{};
  double total = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Separable "valid" filtering of a (h, w) plane.
std::vector<double> filter_valid(const std::vector<double>& in, int h, int w, const std::array<double, kSsimWindow>& g) {
  const int ow = w - kSsimWindow + 1;
  const int oh = h - kSsimWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[k] * in[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const ImageU8& a, const ImageU8& b) {
  if (a.dims() != b.dims()) fail(ErrorCode::DimensionMismatch, "ssim: image dims differ");
  if (a.height < kSsimWindow || a.width < kSsimWindow) {
    fail(ErrorCode::InvalidArgument, "ssim: images must be at least 11x11");
  }
  const auto g = gaussian_taps();
  const double c1 = (kSsimK1 * 255.0) * (kSsimK1 * 255.0);
  const double c2 = (kSsimK2 * 255.0) * (kSsimK2 * 255.0);
  const int h = a.height, w = a.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.data[i * 3 + c];
      y[i] = b.data[i * 3 + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, g), my = filter_valid(y, h, w, g);
    const auto sxx = filter_valid(xx, h, w, g), syy = filter_valid(yy, h, w, g), sxy = filter_valid(xy, h, w, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / 3.0;
}

Sampler model_sampler(const StegoModel& model) {
  return [m = &model](std::uint64_t seed) { return sample(*m, seed); };
}

std::vector<double> grayscale(const ImageU8& img) {
  std::vector<double> g(static_cast<std::size_t>(img.height) * img.width);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = 0.299 * img.data[i * 3] + 0.587 * img.data[i * 3 + 1] + 0.114 * img.data[i * 3 + 2];
  }
  return g;
}

double diversity_score(const Sampler& sampler, const ImageU8& cover, int n_samples, std::uint64_t first_seed) {
  if (n_samples < 2) fail(ErrorCode::InvalidArgument, "diversity_score: need at least two samples");
  const std::size_t n = static_cast<std::size_t>(cover.height) * cover.width;
  std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
  for (int s = 0; s < n_samples; ++s) {
    const ImageU8 img = sampler(first_seed + static_cast<std::uint64_t>(s));
    if (img.dims() != cover.dims()) fail(ErrorCode::DimensionMismatch, "diversity_score: sample dims differ from cover");
    const auto g = grayscale(img);
    for (std::size_t i = 0; i < n; ++i) {
      sum[i] += g[i];
      sum_sq[i] += g[i] * g[i];
    }
  }
  double mean_std = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = sum[i] / n_samples;
    mean_std += std::sqrt(std::max(0.0, sum_sq[i] / n_samples - m * m));
  }
  mean_std /= static_cast<double>(n);

  const auto cg = grayscale(cover);
  double cm = 0.0;
  for (double v : cg) cm += v;
  cm /= static_cast<double>(n);
  double cv = 0.0;
  for (double v : cg) cv += (v - cm) * (v - cm);
  const double cover_std = std::sqrt(cv / static_cast<double>(n));
  if (cover_std == 0.0) fail(ErrorCode::InvalidArgument, "diversity_score: cover has zero intensity variance");
  return mean_std / cover_std;
}

FeatureExtractor default_feature_extractor() {
  static constexpr int kFeatures = 16;
  struct Net {
    nn::Conv2d first{3, kFeatures};
    nn::Conv2d second{kFeatures, kFeatures};
  };
  auto net = std::make_shared<Net>();
  std::mt19937_64 rng(0x51F1Dull);
  nn::init_normal(net->first.weight.value, std::sqrt(2.0f / 27.0f), rng);
  nn::init_normal(net->second.weight.value, std::sqrt(2.0f / (9.0f * kFeatures)), rng);
  return [net](const ImageU8& img) {
    Tensor h = net->first.forward(dequantize(img));
    nn::leaky_relu_inplace(h, 0.2f);
    Tensor f = net->second.forward(h);
    nn::leaky_relu_inplace(f, 0.2f);
    const std::size_t hw = f.plane();
    FeatureMatrix m(static_cast<Eigen::Index>(hw), kFeatures);
    for (int c = 0; c < kFeatures; ++c) {
      const float* p = f.channel(c);
      for (std::size_t i = 0; i < hw; ++i) m(static_cast<Eigen::Index>(i), c) = p[i];
    }
    return m;
  };
}

namespace {

Eigen::MatrixXd covariance(const FeatureMatrix& x, const Eigen::RowVectorXd& mean) {
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  if (x.rows() < 2) return Eigen::MatrixXd::Zero(x.cols(), x.cols());
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

FrechetResult frechet_distance(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.cols() != b.cols() || a.rows() == 0 || b.rows() == 0) {
    fail(ErrorCode::DimensionMismatch, "frechet_distance: feature sets must be non-empty with equal dims");
  }
  FrechetResult res;
  if (a.rows() == b.rows() && a == b) return res;
  const Eigen::RowVectorXd mu1 = a.colwise().mean(), mu2 = b.colwise().mean();
  Eigen::MatrixXd s1 = covariance(a, mu1), s2 = covariance(b, mu2);
  const Eigen::Index dim = a.cols();
  if (a.rows() < dim) {
    s1 += 1e-6 * Eigen::MatrixXd::Identity(dim, dim);
    res.regularized = true;
  }
  if (b.rows() < dim) {
    s2 += 1e-6 * Eigen::MatrixXd::Identity(dim, dim);
    res.regularized = true;
  }
  if (res.regularized) {
    std::clog << "warning: fewer feature vectors than feature dims; covariance regularized\n";
  }
  const Eigen::MatrixXd r1 = psd_sqrt(s1);
  const Eigen::MatrixXd inner = r1 * s2 * r1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  res.distance = std::max(0.0, (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * tr_sqrt);
  return res;
}

double sifid(const ImageU8& reference, std::span<const ImageU8> samples, const FeatureExtractor& extractor) {
  if (samples.empty()) fail(ErrorCode::InvalidArgument, "sifid: need at least one sample");
  const FeatureMatrix ref = extractor(reference);
  std::vector<FeatureMatrix> parts;
  Eigen::Index rows = 0;
  for (const auto& s : samples) {
    parts.push_back(extractor(s));
    rows += parts.back().rows();
  }
  FeatureMatrix pooled(rows, ref.cols());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    pooled.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return frechet_distance(ref, pooled).distance;
}

PooledHistogram pooled_histogram(std::span<const float> a, std::span<const float> b, int bins) {
  if (bins < 1) fail(ErrorCode::InvalidArgument, "histogram: bins must be >= 1");
  if (a.empty() || b.empty()) fail(ErrorCode::InvalidArgument, "histogram: empty value set");
  float lo = a[0], hi = a[0];
  for (float v : a) lo = std::min(lo, v), hi = std::max(hi, v);
  for (float v : b) lo = std::min(lo, v), hi = std::max(hi, v);
  PooledHistogram h{lo, hi, std::vector<std::uint64_t>(bins, 0), std::vector<std::uint64_t>(bins, 0)};
  const double range = static_cast<double>(hi) - lo;
  auto fill = [&](std::span<const float> xs, std::vector<std::uint64_t>& counts) {
    for (float v : xs) {
      const int i = range > 0 ? static_cast<int>((static_cast<double>(v) - lo) / range * bins) : 0;
      ++counts[std::clamp(i, 0, bins - 1)];
    }
  };
  fill(a, h.a);
  fill(b, h.b);
  return h;
}

double histogram_kld(std::span<const float> a, std::span<const float> b, int bins) {
  const PooledHistogram h = pooled_histogram(a, b, bins);
  auto probs = [&](const std::vector<std::uint64_t>& counts, std::size_t n) {
    std::vector<double> p(counts.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = (static_cast<double>(counts[i]) / static_cast<double>(n) + kKldSmoothing) / (1.0 + bins * kKldSmoothing);
    }
    return p;
  };
  const auto p = probs(h.a, a.size()), q = probs(h.b, b.size());
  double kld = 0.0;
  for (int i = 0; i < bins; ++i) kld += p[i] * std::log(p[i] / q[i]);
  return std::max(0.0, kld);
}

std::vector<float> flatten_parameters(const StegoModel& model) {
  std::vector<float> out;
  for (const auto& p : const_cast<nn::Generator&>(model.generator).parameters()) {
    out.insert(out.end(), p.param->value.begin(), p.param->value.end());
  }
  return out;
}

std::vector<float> flatten_block_parameters(const StegoModel& model, int block) {
  std::vector<float> out;
  for (const nn::Parameter* p : const_cast<nn::Generator&>(model.generator).block_parameters(block)) {
    out.insert(out.end(), p->value.begin(), p->value.end());
  }
  return out;
}

KldResult weight_kld(const StegoModel& a, const StegoModel& b, int bins) {
  const auto& ga = a.generator;
  const auto& gb = b.generator;
  if (ga.width() != gb.width() || ga.block_count() != gb.block_count() || ga.param_count() != gb.param_count()) {
    fail(ErrorCode::DimensionMismatch, "weight_kld: models have different architectures");
  }
  if (ga.block_count() == 0) fail(ErrorCode::InvalidArgument, "weight_kld: models have no parameters");
  KldResult r;
  r.total = histogram_kld(flatten_parameters(a), flatten_parameters(b), bins);
  for (int j = 0; j < ga.block_count(); ++j) {
    r.per_stage.push_back(histogram_kld(flatten_block_parameters(a, j), flatten_block_parameters(b, j), bins));
  }
  return r;
}

LeakageRecord leakage_audit(const Sampler& sampler, const ImageU8& secret, int n_samples, double ssim_threshold,
                            std::uint64_t first_seed) {
  LeakageRecord rec;
  if (n_samples <= 0) return rec;
  ImageU8 target;
  for (int s = 0; s < n_samples; ++s) {
    const ImageU8 img = sampler(first_seed + static_cast<std::uint64_t>(s));
    if (s == 0) target = resize(secret, img.height, img.width);
    const double v = ssim(img, target);
    rec.max_ssim = rec.max_ssim ? std::max(*rec.max_ssim, v) : v;
    if (v > ssim_threshold) ++rec.flagged;
    ++rec.samples_drawn;
  }
  return rec;
}

}  // namespace stegan
