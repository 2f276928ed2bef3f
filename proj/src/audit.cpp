#include "stegan/audit.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "stegan/error.hpp"

namespace stegan {

namespace {

std::vector<ImageU8> draw(const Sampler& sampler, int n, std::uint64_t first_seed) {
  std::vector<ImageU8> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(sampler(first_seed + static_cast<std::uint64_t>(i)));
  return out;
}

double diversity_of(const std::vector<ImageU8>& samples, const ImageU8& cover) {
  std::size_t next = 0;
  return diversity_score([&](std::uint64_t) { return samples[next++]; }, cover, static_cast<int>(samples.size()));
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

AuditReport run_audit(const StegoModel& stego, const StegoModel* original, const ImageU8& cover,
                      const ImageU8* secret, const AuditOptions& options, const FeatureExtractor& extractor) {
  if (cover.dims() != stego.image_dims()) {
    fail(ErrorCode::DimensionMismatch, "audit: cover dims differ from the stego model's output dims");
  }
  AuditReport r;
  const auto stego_samples = draw(model_sampler(stego), options.diversity_samples, options.first_seed);
  r.ds_stego = diversity_of(stego_samples, cover);
  if (original) {
    if (original->image_dims() != stego.image_dims()) {
      fail(ErrorCode::DimensionMismatch, "audit: original and stego models have different output dims");
    }
    const auto orig_samples = draw(model_sampler(*original), options.diversity_samples, options.first_seed);
    r.ds_original = diversity_of(orig_samples, cover);
    r.sifid_original = sifid(cover, orig_samples, extractor);
    r.sifid_stego = sifid(cover, stego_samples, extractor);
    r.kld = weight_kld(*original, stego, options.kld_bins);
  }
  if (secret) {
    r.leakage = leakage_audit(model_sampler(stego), *secret, options.leakage_samples, options.leakage_threshold,
                              options.first_seed);
  }
  return r;
}

std::string format_report(const AuditReport& r) {
  std::ostringstream os;
  os << "[sifid]\n";
  if (r.sifid_original && r.sifid_stego) {
    os << "original = " << num(*r.sifid_original) << "\n";
    os << "stego = " << num(*r.sifid_stego) << "\n";
  } else {
    os << "skipped = needs --original\n";
  }
  os << "\n[diversity]\n";
  os << "original = " << (r.ds_original ? num(*r.ds_original) : std::string("skipped")) << "\n";
  os << "stego = " << num(r.ds_stego) << "\n";
  os << "\n[weight_kld]\n";
  if (r.kld) {
    os << "total = " << num(r.kld->total) << "\n";
    const int blocks = static_cast<int>(r.kld->per_stage.size());
    os << "block,scale,kld\n";
    for (int j = 0; j < blocks; ++j) {
      os << j << "," << blocks - 1 - j << "," << num(r.kld->per_stage[j]) << "\n";
    }
  } else {
    os << "skipped = needs --original\n";
  }
  os << "\n[leakage]\n";
  if (r.leakage) {
    os << "samples_drawn = " << r.leakage->samples_drawn << "\n";
    os << "max_ssim_vs_secret = " << (r.leakage->max_ssim ? num(*r.leakage->max_ssim) : std::string("none")) << "\n";
    os << "flagged = " << r.leakage->flagged << "\n";
  } else {
    os << "skipped = needs --secret\n";
  }
  return os.str();
}

std::vector<std::filesystem::path> write_histogram_csvs(const std::filesystem::path& dir, const StegoModel& original,
                                                        const StegoModel& stego, int bins) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::vector<float>& a, const std::vector<float>& b) {
    const PooledHistogram h = pooled_histogram(a, b, bins);
    const auto path = dir / (name + ".csv");
    std::ofstream out(path);
    if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
    out << "bin_lo,bin_hi,original,stego\n";
    const double width = (h.hi - h.lo) / bins;
    for (int i = 0; i < bins; ++i) {
      out << num(h.lo + i * width) << "," << num(h.lo + (i + 1) * width) << "," << h.a[i] << "," << h.b[i] << "\n";
    }
    if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
    written.push_back(path);
  };
  if (original.generator.block_count() != stego.generator.block_count()) {
    fail(ErrorCode::DimensionMismatch, "histograms: models have different architectures");
  }
  emit("total", flatten_parameters(original), flatten_parameters(stego));
  for (int j = 0; j < stego.generator.block_count(); ++j) {
    emit("block" + std::to_string(j), flatten_block_parameters(original, j), flatten_block_parameters(stego, j));
  }
  return written;
}

}  // namespace stegan
