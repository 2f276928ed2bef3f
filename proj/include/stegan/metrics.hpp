#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stegan/image.hpp"
#include "stegan/model.hpp"

namespace stegan {

// 10 log10(255^2 / MSE) over all channels; +infinity for identical images.
double psnr(const ImageU8& a, const ImageU8& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

// Mean SSIM with an 11x11 Gaussian window (sigma 1.5) over every window
// position fully inside the image, computed per channel and averaged.
double ssim(const ImageU8& a, const ImageU8& b);

// Draws one image for a given seed.
using Sampler = std::function<ImageU8(std::uint64_t seed)>;
Sampler model_sampler(const StegoModel& model);

// Luma (0.299 R + 0.587 G + 0.114 B) of every pixel.
std::vector<double> grayscale(const ImageU8& img);

// Per-pixel standard deviation of grayscale intensity over n_samples draws
// (seeds first_seed, first_seed + 1, ...), averaged over pixels and divided
// by the standard deviation of the cover's grayscale intensities.
double diversity_score(const Sampler& sampler, const ImageU8& cover, int n_samples = 25,
                       std::uint64_t first_seed = 0);

// Rows are feature vectors.
using FeatureMatrix = Eigen::MatrixXd;
using FeatureExtractor = std::function<FeatureMatrix(const ImageU8&)>;

// Fixed random two-layer convolutional extractor (16 features per pixel).
FeatureExtractor default_feature_extractor();

struct FrechetResult {
  double distance = 0.0;
  bool regularized = false;  // covariance got an epsilon diagonal
};

// ||mu1 - mu2||^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2)) between Gaussians fitted to
// the rows of a and b. Covariances fitted from fewer rows than columns get
// 1e-6 added to their diagonal.
FrechetResult frechet_distance(const FeatureMatrix& a, const FeatureMatrix& b);

// Frechet distance between reference features and the pooled features of all
// samples.
double sifid(const ImageU8& reference, std::span<const ImageU8> samples, const FeatureExtractor& extractor);

inline constexpr double kKldSmoothing = 1e-10;

// Counts of two value sets over `bins` equal-width bins spanning their pooled
// [min, max]. A degenerate range puts everything in bin 0.
struct PooledHistogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::uint64_t> a;
  std::vector<std::uint64_t> b;
};
PooledHistogram pooled_histogram(std::span<const float> a, std::span<const float> b, int bins = 100);

// Both sets are histogrammed over their pooled [min, max] with `bins` equal
// bins; p_i = (count_i / n + eps) / (1 + bins * eps); returns KL(p_a || p_b).
double histogram_kld(std::span<const float> a, std::span<const float> b, int bins = 100);

struct KldResult {
  double total = 0.0;
  std::vector<double> per_stage;  // one per conv block, coarsest block first
};

// All generator parameters of each model, then each block's parameters.
// Throws DimensionMismatch if the architectures differ.
KldResult weight_kld(const StegoModel& a, const StegoModel& b, int bins = 100);

std::vector<float> flatten_parameters(const StegoModel& model);
std::vector<float> flatten_block_parameters(const StegoModel& model, int block);

struct LeakageRecord {
  int samples_drawn = 0;
  std::optional<double> max_ssim;  // empty if no samples were drawn
  int flagged = 0;
};

// SSIM of each unconditional sample against the secret (resized to the sample
// dims); samples scoring above the threshold are flagged.
LeakageRecord leakage_audit(const Sampler& sampler, const ImageU8& secret, int n_samples,
                            double ssim_threshold = 0.5, std::uint64_t first_seed = 0);

}  // namespace stegan
