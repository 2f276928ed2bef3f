#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stegan/image.hpp"
#include "stegan/metrics.hpp"
#include "stegan/model.hpp"

namespace stegan {

struct AuditOptions {
  int diversity_samples = 25;   // also the SIFID sample set
  int leakage_samples = 1000;
  double leakage_threshold = 0.5;
  std::uint64_t first_seed = 0;
  int kld_bins = 100;
};

// Sections that could not be computed from the given inputs stay empty.
struct AuditReport {
  std::optional<double> sifid_original;
  std::optional<double> sifid_stego;
  std::optional<double> ds_original;
  double ds_stego = 0.0;
  std::optional<KldResult> kld;
  std::optional<LeakageRecord> leakage;
};

AuditReport run_audit(const StegoModel& stego, const StegoModel* original, const ImageU8& cover,
                      const ImageU8* secret, const AuditOptions& options = {},
                      const FeatureExtractor& extractor = default_feature_extractor());

// Sectioned key = value text; values are printed with 17 significant digits.
std::string format_report(const AuditReport& report);

// One CSV per weight set ("total", "block0", ...): bin_lo,bin_hi,original,stego.
// Returns the written paths.
std::vector<std::filesystem::path> write_histogram_csvs(const std::filesystem::path& dir, const StegoModel& original,
                                                        const StegoModel& stego, int bins = 100);

}  // namespace stegan
